//! Global texture comparison: persistence-weighted kernel densities of a quadrant,
//! pairwise ℓ₂ distances between them, and UPGMA trees over the distance matrix.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid2::Grid2;

#[derive(Debug, Error, PartialEq)]
pub enum GlobalError {
    #[error("no points to estimate a density from")]
    EmptyPointSet,
    #[error("kernel width must be positive, got {0}")]
    BadSigma(f64),
    #[error("grid needs at least 2x2 cells and finite, increasing bounds")]
    BadGrid,
    #[error("density grids differ in bounds or resolution")]
    GridMismatch,
    #[error("distance matrix is not square and symmetric")]
    NotSymmetric,
    #[error("distance matrix has a negative or non-finite entry at ({0}, {1})")]
    NegativeDistance(usize, usize),
    #[error("{labels} labels for {n} leaves")]
    LabelCount { labels: usize, n: usize },
}

/// Kernel density values at the cell centers of `grid`, birth index fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub grid: Grid2,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.resolution[0] + i]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Scaled to unit mass; a zero grid is returned unchanged.
    pub fn normalized(&self) -> DensityGrid {
        let m = self.mass();
        let values = if m > 0.0 { self.values.iter().map(|v| v / m).collect() } else { self.values.clone() };
        DensityGrid { grid: self.grid, values }
    }
}

fn check_grid(grid: &Grid2) -> Result<(), GlobalError> {
    if !grid.is_valid() || grid.resolution[0] < 2 || grid.resolution[1] < 2 {
        return Err(GlobalError::BadGrid);
    }
    Ok(())
}

/// Σᵢ wᵢ (2πσ²)⁻¹ exp(−‖u − yᵢ‖² / 2σ²) at every node `u` of `grid`.
pub fn kde(points: &[([f64; 2], f64)], grid: &Grid2, sigma: f64) -> Result<DensityGrid, GlobalError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(GlobalError::BadSigma(sigma));
    }
    check_grid(grid)?;
    if points.is_empty() {
        return Err(GlobalError::EmptyPointSet);
    }
    let norm = 1.0 / (2.0 * PI * sigma * sigma);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let [hb, hd] = grid.step();
    let [b0, _, d0, _] = grid.bounds;
    let [nb, nd] = grid.resolution;
    let mut values = vec![0.0; nb * nd];
    values.par_chunks_mut(nb).enumerate().for_each(|(j, row)| {
        let y = d0 + (j as f64 + 0.5) * hd;
        for (i, v) in row.iter_mut().enumerate() {
            let x = b0 + (i as f64 + 0.5) * hb;
            *v = points
                .iter()
                .map(|&([px, py], w)| w * norm * (-((x - px).powi(2) + (y - py).powi(2)) * inv).exp())
                .sum();
        }
    });
    Ok(DensityGrid { grid: *grid, values })
}

/// Bounding box of every sample's points expanded by 3σ, shared across samples.
pub fn shared_grid<'a>(
    samples: impl IntoIterator<Item = &'a [([f64; 2], f64)]>,
    sigma: f64,
    resolution: [usize; 2],
) -> Result<Grid2, GlobalError> {
    Grid2::around(samples.into_iter().flatten().map(|p| p.0), 3.0 * sigma, resolution)
        .ok_or(GlobalError::EmptyPointSet)
}

/// √(Σ (aᵤ − bᵤ)² ΔA) over a common grid.
pub fn l2_distance(a: &DensityGrid, b: &DensityGrid) -> Result<f64, GlobalError> {
    if a.grid != b.grid || a.values.len() != b.values.len() {
        return Err(GlobalError::GridMismatch);
    }
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((s * a.grid.cell_area()).sqrt())
}

/// Symmetric matrix of pairwise ℓ₂ distances.
pub fn distance_matrix(grids: &[DensityGrid]) -> Result<Vec<Vec<f64>>, GlobalError> {
    let n = grids.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let ds: Vec<f64> = pairs.par_iter().map(|&(i, j)| l2_distance(&grids[i], &grids[j])).collect::<Result<_, _>>()?;
    let mut m = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(ds) {
        m[i][j] = d;
        m[j][i] = d;
    }
    Ok(m)
}

/// One agglomeration step: nodes `left` and `right` join as node `id` at `height`.
/// Leaves are `0..n`; internal nodes are numbered `n, n+1, …` in merge order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

/// UPGMA: repeatedly joins the closest pair of clusters (ties to the smallest index
/// pair), with size-weighted average linkage and merge height half the distance.
pub fn upgma(dist: &[Vec<f64>], labels: &[String]) -> Result<Dendrogram, GlobalError> {
    let n = dist.len();
    if labels.len() != n {
        return Err(GlobalError::LabelCount { labels: labels.len(), n });
    }
    for i in 0..n {
        if dist[i].len() != n {
            return Err(GlobalError::NotSymmetric);
        }
        for j in 0..n {
            let v = dist[i][j];
            if !(v >= 0.0 && v.is_finite()) {
                return Err(GlobalError::NegativeDistance(i, j));
            }
            if (v - dist[j][i]).abs() > 1e-12 * v.abs().max(1.0) || (i == j && v != 0.0) {
                return Err(GlobalError::NotSymmetric);
            }
        }
    }
    let mut d: Vec<Vec<f64>> = dist.to_vec();
    let mut node: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut alive: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while alive.len() > 1 {
        let mut best = (0, 0, f64::INFINITY);
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                if d[i][j] < best.2 {
                    best = (i, j, d[i][j]);
                }
            }
        }
        let (i, j, dij) = best;
        let id = n + merges.len();
        merges.push(Merge { left: node[i], right: node[j], height: dij / 2.0, id });
        let (si, sj) = (size[i] as f64, size[j] as f64);
        for &k in &alive {
            if k != i && k != j {
                let v = (si * d[i][k] + sj * d[j][k]) / (si + sj);
                d[i][k] = v;
                d[k][i] = v;
            }
        }
        size[i] += size[j];
        node[i] = id;
        alive.retain(|&k| k != j);
    }
    Ok(Dendrogram { labels: labels.to_vec(), merges })
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.labels.len()
    }

    /// Cluster index of every leaf after discarding merges above `height`; clusters are
    /// numbered by their smallest leaf.
    pub fn cut(&self, height: f64) -> Vec<usize> {
        let n = self.n_leaves();
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for m in &self.merges {
            if m.height <= height {
                let a = find(&mut parent, m.left);
                let b = find(&mut parent, m.right);
                parent[a] = m.id;
                parent[b] = m.id;
            }
        }
        let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut ids: Vec<usize> = Vec::new();
        roots
            .iter()
            .map(|r| match ids.iter().position(|x| x == r) {
                Some(k) => k,
                None => {
                    ids.push(*r);
                    ids.len() - 1
                }
            })
            .collect()
    }

    /// Newick text with branch lengths, e.g. `((A:1,B:1):3,C:4);`.
    pub fn to_newick(&self) -> String {
        let n = self.n_leaves();
        if n == 0 {
            return ";".into();
        }
        let mut text: Vec<String> = self.labels.iter().map(|l| newick_label(l)).collect();
        let mut height = vec![0.0; n + self.merges.len()];
        for m in &self.merges {
            let l = format!("{}:{}", text[m.left], m.height - height[m.left]);
            let r = format!("{}:{}", text[m.right], m.height - height[m.right]);
            text.push(format!("({l},{r})"));
            height[m.id] = m.height;
        }
        format!("{};", text.last().unwrap())
    }

    /// Distance implied by the tree between two leaves: twice the height of their
    /// lowest common merge.
    pub fn cophenetic(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let n = self.n_leaves();
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for m in &self.merges {
            let mut s = members[m.left].clone();
            s.extend_from_slice(&members[m.right]);
            if s.contains(&a) && s.contains(&b) {
                return 2.0 * m.height;
            }
            members.push(s);
        }
        f64::INFINITY
    }
}

fn newick_label(l: &str) -> String {
    if l.chars().any(|c| "()[]':;, \t".contains(c)) {
        format!("'{}'", l.replace('\'', "''"))
    } else {
        l.to_string()
    }
}

/// Binary PGM (P5) heatmap, values scaled to 0..=255 by the grid maximum; the top row
/// holds the largest death value.
pub fn to_pgm(d: &DensityGrid) -> Vec<u8> {
    let [nb, nd] = d.grid.resolution;
    let max = d.values.iter().copied().fold(0.0, f64::max);
    let mut out = format!("P5\n{nb} {nd}\n255\n").into_bytes();
    for j in (0..nd).rev() {
        for i in 0..nb {
            let v = if max > 0.0 { (d.at(i, j) / max * 255.0).round() } else { 0.0 };
            out.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect()
    }

    #[test]
    fn kernel_values() {
        let grid = Grid2::new([-1.0, 1.0, -1.0, 1.0], [4, 4]);
        // cell centers at ±0.25, ±0.75
        let d = kde(&[([0.25, 0.25], 2.0)], &grid, 0.5).unwrap();
        assert!((d.at(2, 2) - 4.0 / PI).abs() < 1e-12);
        assert!((d.at(3, 2) - 4.0 / PI * (-0.5f64).exp()).abs() < 1e-12);
        let twice = kde(&[([0.1, 0.3], 1.0), ([0.1, 0.3], 1.0)], &grid, 0.5).unwrap();
        let once = kde(&[([0.1, 0.3], 2.0)], &grid, 0.5).unwrap();
        for (a, b) in twice.values.iter().zip(&once.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(kde(&[], &grid, 0.5), Err(GlobalError::EmptyPointSet));
        assert_eq!(kde(&[([0.0, 0.0], 1.0)], &grid, 0.0), Err(GlobalError::BadSigma(0.0)));
    }

    #[test]
    fn kde_mass_converges() {
        let pts = [([0.0, 1.0], 1.5), ([2.0, 3.0], 0.5)];
        let grid = shared_grid([&pts[..]], 0.5, [200, 200]).unwrap();
        let g = Grid2::new([grid.bounds[0] - 1.0, grid.bounds[1] + 1.0, grid.bounds[2] - 1.0, grid.bounds[3] + 1.0], [200, 200]);
        let d = kde(&pts, &g, 0.5).unwrap();
        assert!((d.mass() - 2.0).abs() < 0.02);
        assert!(d.values.iter().all(|&v| v >= 0.0));
        assert!((d.normalized().mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l2_metric() {
        let g = Grid2::new([0.0, 1.0, 0.0, 1.0], [2, 2]);
        let c = |v: f64| DensityGrid { grid: g, values: vec![v; 4] };
        assert_eq!(l2_distance(&c(1.0), &c(1.0)).unwrap(), 0.0);
        assert!((l2_distance(&c(1.0), &c(3.5)).unwrap() - 2.5).abs() < 1e-15);
        let other = DensityGrid { grid: Grid2::new([0.0, 2.0, 0.0, 1.0], [2, 2]), values: vec![0.0; 4] };
        assert_eq!(l2_distance(&c(1.0), &other), Err(GlobalError::GridMismatch));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let grids: Vec<DensityGrid> = (0..6)
            .map(|_| {
                let pts: Vec<([f64; 2], f64)> =
                    (0..5).map(|_| ([rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)], 1.0)).collect();
                kde(&pts, &g, 0.5).unwrap()
            })
            .collect();
        let m = distance_matrix(&grids).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(m[i][j], m[j][i]);
                for k in 0..6 {
                    assert!(m[i][k] <= m[i][j] + m[j][k] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn three_leaf_tree() {
        let d = vec![vec![0.0, 2.0, 8.0], vec![2.0, 0.0, 8.0], vec![8.0, 8.0, 0.0]];
        let t = upgma(&d, &labels(3)).unwrap();
        assert_eq!(t.merges[0], Merge { left: 0, right: 1, height: 1.0, id: 3 });
        assert_eq!(t.merges[1], Merge { left: 3, right: 2, height: 4.0, id: 4 });
        assert_eq!(t.cut(2.0), vec![0, 0, 1]);
        assert_eq!(t.cut(0.5), vec![0, 1, 2]);
        assert_eq!(t.cut(10.0), vec![0, 0, 0]);
        assert_eq!(t.to_newick(), "((A:1,B:1):3,C:4);");
        let two = upgma(&[vec![0.0, 6.0], vec![6.0, 0.0]], &labels(2)).unwrap();
        assert_eq!(two.merges, vec![Merge { left: 0, right: 1, height: 3.0, id: 2 }]);
    }

    #[test]
    fn input_checks() {
        assert_eq!(upgma(&[vec![0.0, 1.0], vec![2.0, 0.0]], &labels(2)), Err(GlobalError::NotSymmetric));
        assert_eq!(upgma(&[vec![0.0, -1.0], vec![-1.0, 0.0]], &labels(2)), Err(GlobalError::NegativeDistance(0, 1)));
    }

    #[test]
    fn heights_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 7;
            let mut d = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let v = ((i as f64 - j as f64).abs() + 1.0).ln() * 4.0 + rng.random_range(0.0..0.5);
                    d[i][j] = v;
                    d[j][i] = v;
                }
            }
            let t = upgma(&d, &labels(n)).unwrap();
            let mut h = vec![0.0; 2 * n - 1];
            for m in &t.merges {
                assert!(m.height >= h[m.left] && m.height >= h[m.right]);
                h[m.id] = m.height;
            }
        }
    }

    #[test]
    fn pgm_header() {
        let g = Grid2::new([0.0, 1.0, 0.0, 1.0], [3, 2]);
        let d = DensityGrid { grid: g, values: vec![0.0, 1.0, 2.0, 0.0, 0.0, 4.0] };
        let p = to_pgm(&d);
        assert!(p.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&p[p.len() - 6..], &[0, 0, 255, 0, 64, 128]);
    }
}
