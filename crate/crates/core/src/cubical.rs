//! Sublevel-set persistent homology of a scalar field on a cubical complex.
//!
//! Voxels are the top-dimensional cells. Every lower-dimensional cell (face, edge,
//! vertex) takes the minimum value of its incident voxels, so a voxel enters the
//! filtration together with its closure. Cells are addressed on the doubled grid of
//! size `(2nx+1) × (2ny+1) × (2nz+1)`: a coordinate is odd when the cell spans that
//! axis and even when it sits on a lattice plane. The filtration order is
//! `(value, dimension, cell index)`, so ties are broken reproducibly.
//!
//! Degree 0 is computed with union–find over vertices and edges. Degree 2 is computed
//! with union–find on the dual graph (voxels plus one exterior node, joined through
//! shared faces) swept in reverse order. Degree 1 reduces only the faces that were not
//! paired in degree 2, with the boundary rows of edges already paired in degree 0
//! dropped.
//!
//! Every finite point records the voxel that attains its birth value and the voxel that
//! attains its death value.

use std::cmp::Ordering;

use rayon::prelude::*;
use thiserror::Error;

use crate::sdt::ScalarField;
use crate::volume::{coords_of, linear_index, Dims, Spacing};

#[derive(Debug, Error, PartialEq)]
pub enum PersistenceError {
    #[error("complex with {cells} cells exceeds the brute-force limit of {limit}")]
    TooLarge { cells: usize, limit: usize },
    #[error("invalid chunking {grid:?} for dims {dims:?}")]
    InvalidChunking { grid: [usize; 3], dims: Dims },
}

/// One interval of the persistence diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistencePoint {
    pub degree: u8,
    pub birth: f64,
    /// `f64::INFINITY` for essential classes.
    pub death: f64,
    pub birth_cell: Option<[usize; 3]>,
    pub death_cell: Option<[usize; 3]>,
}

impl PersistencePoint {
    pub fn is_essential(&self) -> bool {
        self.death == f64::INFINITY
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// A persistence diagram with provenance.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Diagram {
    pub points: Vec<PersistencePoint>,
    pub source_id: String,
    pub dims: Dims,
    pub spacing: Spacing,
}

impl Diagram {
    pub fn new(points: Vec<PersistencePoint>) -> Self {
        Self { points, ..Default::default() }
    }

    pub fn with_points(&self, points: Vec<PersistencePoint>) -> Self {
        Self { points, source_id: self.source_id.clone(), dims: self.dims, spacing: self.spacing }
    }

    pub fn degree(&self, d: u8) -> impl Iterator<Item = &PersistencePoint> {
        self.points.iter().filter(move |p| p.degree == d)
    }

    pub fn essential(&self) -> impl Iterator<Item = &PersistencePoint> {
        self.points.iter().filter(|p| p.is_essential())
    }

    /// Sorted `(degree, birth, death)` triples, for multiset comparison.
    pub fn signature(&self) -> Vec<(u8, f64, f64)> {
        let mut v: Vec<_> = self.points.iter().map(|p| (p.degree, p.birth, p.death)).collect();
        v.sort_by(|a, b| {
            a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
        });
        v
    }

    /// Number of classes of degree `d` alive at `t` (born at or before `t`, dying after).
    pub fn betti_at(&self, d: u8, t: f64) -> usize {
        self.degree(d).filter(|p| p.birth <= t && p.death > t).count()
    }
}

/// Diagram of one chunk, with anchors in the coordinates of the full field.
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkDiagram {
    pub index: usize,
    pub origin: [usize; 3],
    pub size: Dims,
    pub diagram: Diagram,
}

/// Result of [`persistence_chunked`].
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkedPersistence {
    pub chunks: Vec<ChunkDiagram>,
    /// Set when more than one chunk was used: cutting the field introduces spurious
    /// degree-0 classes (and destroys features crossing chunk boundaries).
    pub boundary_artifacts: bool,
}

/// The cubical complex of a field on the doubled grid.
pub(crate) struct Complex {
    pub dims: Dims,
    pub grid: [usize; 3],
    /// Per cell: filtration value.
    pub value: Vec<f64>,
    /// Per cell: linear index of the voxel that attains the value.
    pub anchor: Vec<u32>,
}

impl Complex {
    pub fn new(field: &ScalarField) -> Self {
        let dims = field.dims();
        let grid = [2 * dims[0] + 1, 2 * dims[1] + 1, 2 * dims[2] + 1];
        let n = grid[0] * grid[1] * grid[2];
        let vals = field.values();
        let mut value = vec![f64::INFINITY; n];
        let mut anchor = vec![u32::MAX; n];
        // Scatter every voxel to its 27 closure cells; voxels are visited in increasing
        // linear order, so a strict comparison keeps the smallest index on ties.
        for (vi, &v) in vals.iter().enumerate() {
            let [x, y, z] = coords_of(dims, vi);
            let (cx, cy, cz) = (2 * x + 1, 2 * y + 1, 2 * z + 1);
            for k in cz - 1..=cz + 1 {
                for j in cy - 1..=cy + 1 {
                    let row = grid[0] * (j + grid[1] * k);
                    for i in cx - 1..=cx + 1 {
                        let c = row + i;
                        if v < value[c] {
                            value[c] = v;
                            anchor[c] = vi as u32;
                        }
                    }
                }
            }
        }
        Self { dims, grid, value, anchor }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    #[inline]
    pub fn coords(&self, c: usize) -> [usize; 3] {
        coords_of(self.grid, c)
    }

    #[inline]
    pub fn index(&self, p: [usize; 3]) -> usize {
        linear_index(self.grid, p)
    }

    #[inline]
    pub fn dim(&self, c: usize) -> usize {
        self.coords(c).iter().filter(|&&v| v % 2 == 1).count()
    }

    pub fn anchor_coords(&self, c: usize) -> [usize; 3] {
        coords_of(self.dims, self.anchor[c] as usize)
    }

    /// Filtration order for two cells of equal dimension.
    #[inline]
    pub fn cmp_same_dim(&self, a: usize, b: usize) -> Ordering {
        self.value[a].total_cmp(&self.value[b]).then(a.cmp(&b))
    }

    /// Cells of dimension `d`, sorted in filtration order.
    pub fn sorted_cells(&self, d: usize) -> Vec<usize> {
        let mut cells: Vec<usize> = (0..self.len()).filter(|&c| self.dim(c) == d).collect();
        cells.sort_unstable_by(|&a, &b| self.cmp_same_dim(a, b));
        cells
    }

    /// Codimension-one faces of cell `c`.
    pub fn boundary(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.coords(c);
        (0..3).filter(move |&a| p[a] % 2 == 1).flat_map(move |a| {
            let mut lo = p;
            let mut hi = p;
            lo[a] -= 1;
            hi[a] += 1;
            [self.index(lo), self.index(hi)]
        })
    }

    fn point(&self, degree: u8, birth_cell: usize, death_cell: Option<usize>) -> PersistencePoint {
        PersistencePoint {
            degree,
            birth: self.value[birth_cell],
            death: death_cell.map_or(f64::INFINITY, |c| self.value[c]),
            birth_cell: Some(self.anchor_coords(birth_cell)),
            death_cell: death_cell.map(|c| self.anchor_coords(c)),
        }
    }
}

struct UnionFind {
    parent: Vec<u32>,
    /// Representative element carried by each root (meaning depends on the caller).
    rep: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), rep: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }
}

/// Persistence diagram of the sublevel filtration of `field` in degrees 0, 1 and 2.
pub fn persistence(field: &ScalarField) -> Diagram {
    let cx = Complex::new(field);
    let mut points = Vec::new();

    // Degree 0: vertices merged along edges, elder rule on (value, index).
    let vdims = [cx.dims[0] + 1, cx.dims[1] + 1, cx.dims[2] + 1];
    let vertex_id = |c: usize| {
        let p = cx.coords(c);
        linear_index(vdims, [p[0] / 2, p[1] / 2, p[2] / 2]) as u32
    };
    let vertex_cell = |v: u32| {
        let p = coords_of(vdims, v as usize);
        cx.index([2 * p[0], 2 * p[1], 2 * p[2]])
    };
    let edges = cx.sorted_cells(1);
    let mut negative_edge = vec![false; cx.len()];
    let mut uf = UnionFind::new(vdims.iter().product());
    for &e in &edges {
        let mut ends = cx.boundary(e);
        let (a, b) = (ends.next().unwrap(), ends.next().unwrap());
        let (ra, rb) = (uf.find(vertex_id(a)), uf.find(vertex_id(b)));
        if ra == rb {
            continue;
        }
        negative_edge[e] = true;
        let (oa, ob) = (vertex_cell(uf.rep[ra as usize]), vertex_cell(uf.rep[rb as usize]));
        let (elder, younger, young_root, old_root) =
            if cx.cmp_same_dim(oa, ob) == Ordering::Less { (oa, ob, rb, ra) } else { (ob, oa, ra, rb) };
        if cx.value[younger] < cx.value[e] {
            points.push(cx.point(0, younger, Some(e)));
        }
        uf.parent[young_root as usize] = old_root;
        uf.rep[old_root as usize] = vertex_id(elder);
    }
    let oldest = (0..vdims.iter().product::<usize>() as u32)
        .map(vertex_cell)
        .min_by(|&a, &b| cx.cmp_same_dim(a, b))
        .unwrap();
    points.push(cx.point(0, oldest, None));

    // Degree 2: reverse sweep over faces on the dual graph. Node n_vox is the exterior.
    let n_vox = field.len();
    let voxel_cell = |v: u32| {
        let [x, y, z] = coords_of(cx.dims, v as usize);
        cx.index([2 * x + 1, 2 * y + 1, 2 * z + 1])
    };
    let faces = cx.sorted_cells(2);
    let mut positive_face = vec![false; cx.len()];
    let mut duf = UnionFind::new(n_vox + 1);
    let exterior = n_vox as u32;
    // later in filtration order = elder in the reverse sweep; the exterior is eldest
    let elder_rev = |a: u32, b: u32| -> bool {
        if a == exterior {
            return true;
        }
        if b == exterior {
            return false;
        }
        cx.cmp_same_dim(voxel_cell(a), voxel_cell(b)) == Ordering::Greater
    };
    for &f in faces.iter().rev() {
        let p = cx.coords(f);
        let a = (0..3).find(|&a| p[a] % 2 == 0).unwrap();
        // voxel at index `i` along axis a on either side of the face, or the exterior
        let side = |i: Option<usize>| -> u32 {
            match i.filter(|&i| i < cx.dims[a]) {
                Some(i) => {
                    let v: [usize; 3] = std::array::from_fn(|k| if k == a { i } else { (p[k] - 1) / 2 });
                    linear_index(cx.dims, v) as u32
                }
                None => exterior,
            }
        };
        let (na, nb) = (side((p[a] / 2).checked_sub(1)), side(Some(p[a] / 2)));
        let (ra, rb) = (duf.find(na), duf.find(nb));
        if ra == rb {
            continue;
        }
        positive_face[f] = true;
        let (ea, eb) = (duf.rep[ra as usize], duf.rep[rb as usize]);
        let (elder, younger, young_root, old_root) =
            if elder_rev(ea, eb) { (ea, eb, rb, ra) } else { (eb, ea, ra, rb) };
        let death_cell = voxel_cell(younger);
        if cx.value[f] < cx.value[death_cell] {
            points.push(cx.point(2, f, Some(death_cell)));
        }
        duf.parent[young_root as usize] = old_root;
        duf.rep[old_root as usize] = elder;
    }

    // Degree 1: reduce the remaining faces against positive edges.
    let mut edge_rank = vec![u32::MAX; cx.len()];
    for (r, &e) in edges.iter().enumerate() {
        if !negative_edge[e] {
            edge_rank[e] = r as u32;
        }
    }
    let mut pivot_owner: Vec<u32> = vec![u32::MAX; edges.len()];
    let mut reduced: Vec<Vec<u32>> = Vec::new();
    let mut scratch = Vec::new();
    for &f in &faces {
        if positive_face[f] {
            continue;
        }
        let mut col: Vec<u32> =
            cx.boundary(f).map(|e| edge_rank[e]).filter(|&r| r != u32::MAX).collect();
        col.sort_unstable();
        while let Some(&piv) = col.last() {
            let owner = pivot_owner[piv as usize];
            if owner == u32::MAX {
                break;
            }
            symmetric_difference(&col, &reduced[owner as usize], &mut scratch);
            std::mem::swap(&mut col, &mut scratch);
        }
        match col.last() {
            Some(&piv) => {
                pivot_owner[piv as usize] = reduced.len() as u32;
                let e = edges[piv as usize];
                if cx.value[e] < cx.value[f] {
                    points.push(cx.point(1, e, Some(f)));
                }
                reduced.push(col);
            }
            None => debug_assert!(false, "unpaired negative face"),
        }
    }
    // Positive edges never used as a pivot are essential 1-cycles (none in a box).
    for (r, &e) in edges.iter().enumerate() {
        if !negative_edge[e] && pivot_owner[r] == u32::MAX {
            points.push(cx.point(1, e, None));
        }
    }

    sort_points(&mut points);
    Diagram { points, source_id: String::new(), dims: field.dims(), spacing: field.spacing() }
}

fn symmetric_difference(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

fn sort_points(points: &mut [PersistencePoint]) {
    points.sort_by(|a, b| {
        a.degree
            .cmp(&b.degree)
            .then(a.birth.total_cmp(&b.birth))
            .then(a.death.total_cmp(&b.death))
            .then(a.birth_cell.cmp(&b.birth_cell))
            .then(a.death_cell.cmp(&b.death_cell))
    });
}

/// Largest complex [`persistence_bruteforce`] accepts.
pub const BRUTEFORCE_LIMIT: usize = 100_000;

/// Plain boundary-matrix reduction over all cells, used as a test oracle.
pub fn persistence_bruteforce(field: &ScalarField) -> Result<Diagram, PersistenceError> {
    let dims = field.dims();
    let grid = [2 * dims[0] + 1, 2 * dims[1] + 1, 2 * dims[2] + 1];
    let n: usize = grid.iter().product();
    if n > BRUTEFORCE_LIMIT {
        return Err(PersistenceError::TooLarge { cells: n, limit: BRUTEFORCE_LIMIT });
    }
    // Cell values from the incident-voxel definition, computed independently of `Complex`.
    let mut value = vec![0.0; n];
    let mut anchor = vec![[0usize; 3]; n];
    let mut dim = vec![0usize; n];
    for c in 0..n {
        let p = coords_of(grid, c);
        dim[c] = p.iter().filter(|&&v| v % 2 == 1).count();
        let ranges: [Vec<usize>; 3] = std::array::from_fn(|a| {
            if p[a] % 2 == 1 {
                vec![(p[a] - 1) / 2]
            } else {
                let mut r = Vec::new();
                if p[a] >= 2 {
                    r.push(p[a] / 2 - 1);
                }
                if p[a] / 2 < dims[a] {
                    r.push(p[a] / 2);
                }
                r
            }
        });
        let mut best = (f64::INFINITY, [0; 3]);
        for &z in &ranges[2] {
            for &y in &ranges[1] {
                for &x in &ranges[0] {
                    let v = field.get([x, y, z]);
                    let q = [x, y, z];
                    if v < best.0 || (v == best.0 && linear_index(dims, q) < linear_index(dims, best.1)) {
                        best = (v, q);
                    }
                }
            }
        }
        value[c] = best.0;
        anchor[c] = best.1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| value[a].total_cmp(&value[b]).then(dim[a].cmp(&dim[b])).then(a.cmp(&b)));
    let mut pos = vec![0usize; n];
    for (i, &c) in order.iter().enumerate() {
        pos[c] = i;
    }
    let mut columns: Vec<Vec<usize>> = order
        .iter()
        .map(|&c| {
            let p = coords_of(grid, c);
            let mut col = Vec::new();
            for a in 0..3 {
                if p[a] % 2 == 1 {
                    for d in [p[a] - 1, p[a] + 1] {
                        let mut q = p;
                        q[a] = d;
                        col.push(pos[linear_index(grid, q)]);
                    }
                }
            }
            col.sort_unstable();
            col
        })
        .collect();
    let mut low_owner: Vec<Option<usize>> = vec![None; n];
    let mut paired = vec![false; n];
    let mut points = Vec::new();
    for j in 0..n {
        while let Some(&low) = columns[j].last() {
            match low_owner[low] {
                Some(k) => {
                    let other = columns[k].clone();
                    let mut out = Vec::new();
                    let a: Vec<u32> = columns[j].iter().map(|&v| v as u32).collect();
                    let b: Vec<u32> = other.iter().map(|&v| v as u32).collect();
                    symmetric_difference(&a, &b, &mut out);
                    columns[j] = out.into_iter().map(|v| v as usize).collect();
                }
                None => break,
            }
        }
        if let Some(&low) = columns[j].last() {
            low_owner[low] = Some(j);
            paired[low] = true;
            paired[j] = true;
            let (b, d) = (order[low], order[j]);
            if value[b] < value[d] {
                points.push(PersistencePoint {
                    degree: dim[b] as u8,
                    birth: value[b],
                    death: value[d],
                    birth_cell: Some(anchor[b]),
                    death_cell: Some(anchor[d]),
                });
            }
        }
    }
    for j in 0..n {
        if !paired[j] && columns[j].is_empty() {
            let c = order[j];
            points.push(PersistencePoint {
                degree: dim[c] as u8,
                birth: value[c],
                death: f64::INFINITY,
                birth_cell: Some(anchor[c]),
                death_cell: None,
            });
        }
    }
    sort_points(&mut points);
    Ok(Diagram { points, source_id: String::new(), dims, spacing: field.spacing() })
}

/// Splits `n` into `parts` near-equal contiguous ranges.
fn split_axis(n: usize, parts: usize) -> Vec<(usize, usize)> {
    (0..parts).map(|i| (i * n / parts, (i + 1) * n / parts - i * n / parts)).collect()
}

/// Runs [`persistence`] independently on a grid of axis-aligned chunks.
///
/// Chunks are ordered x fastest and anchors are reported in full-field coordinates.
pub fn persistence_chunked(
    field: &ScalarField,
    chunk_grid: [usize; 3],
) -> Result<ChunkedPersistence, PersistenceError> {
    let dims = field.dims();
    if (0..3).any(|a| chunk_grid[a] == 0 || chunk_grid[a] > dims[a]) {
        return Err(PersistenceError::InvalidChunking { grid: chunk_grid, dims });
    }
    let splits: [Vec<(usize, usize)>; 3] = std::array::from_fn(|a| split_axis(dims[a], chunk_grid[a]));
    let mut blocks = Vec::new();
    for &(oz, sz) in &splits[2] {
        for &(oy, sy) in &splits[1] {
            for &(ox, sx) in &splits[0] {
                blocks.push(([ox, oy, oz], [sx, sy, sz]));
            }
        }
    }
    let chunks = blocks
        .into_par_iter()
        .enumerate()
        .map(|(index, (origin, size))| {
            let mut diagram = persistence(&field.sub_field(origin, size));
            let shift = |c: [usize; 3]| [c[0] + origin[0], c[1] + origin[1], c[2] + origin[2]];
            for p in &mut diagram.points {
                p.birth_cell = p.birth_cell.map(shift);
                p.death_cell = p.death_cell.map(shift);
            }
            diagram.dims = dims;
            ChunkDiagram { index, origin, size, diagram }
        })
        .collect::<Vec<_>>();
    Ok(ChunkedPersistence { boundary_artifacts: chunks.len() > 1, chunks })
}

/// Euler characteristic of the sublevel complex `{cells with value ≤ t}`.
pub fn euler_characteristic(field: &ScalarField, t: f64) -> i64 {
    let cx = Complex::new(field);
    (0..cx.len())
        .filter(|&c| cx.value[c] <= t)
        .map(|c| if cx.dim(c) % 2 == 0 { 1 } else { -1 })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(dims: Dims, values: Vec<f64>) -> ScalarField {
        ScalarField::new(dims, [1.0; 3], values).unwrap()
    }

    fn random_int_field(n: usize, rng: &mut ChaCha8Rng) -> ScalarField {
        let values = (0..n * n * n).map(|_| rng.random_range(-5..=5) as f64).collect();
        field([n, n, n], values)
    }

    #[test]
    fn constant_field() {
        let f = field([3, 3, 3], vec![0.0; 27]);
        for d in [persistence(&f), persistence_bruteforce(&f).unwrap()] {
            assert_eq!(d.signature(), vec![(0, 0.0, f64::INFINITY)]);
        }
    }

    #[test]
    fn three_cell_row() {
        let f = field([1, 1, 3], vec![0.0, 5.0, 1.0]);
        let expected = vec![(0, 0.0, f64::INFINITY), (0, 1.0, 5.0)];
        assert_eq!(persistence(&f).signature(), expected);
        assert_eq!(persistence_bruteforce(&f).unwrap().signature(), expected);
        let p = persistence(&f).points.into_iter().find(|p| p.birth == 1.0).unwrap();
        assert_eq!(p.birth_cell, Some([0, 0, 2]));
        assert_eq!(p.death_cell, Some([0, 0, 1]));
    }

    #[test]
    fn square_single_component() {
        let f = field([2, 2, 1], vec![-1.0, 2.0, 3.0, 4.0]);
        assert_eq!(persistence_bruteforce(&f).unwrap().signature(), vec![(0, -1.0, f64::INFINITY)]);
        assert_eq!(persistence(&f).signature(), vec![(0, -1.0, f64::INFINITY)]);
    }

    #[test]
    fn ring_gives_one_cycle() {
        // 3x3x1 ring of low values around a high center
        let mut v = vec![0.0; 9];
        v[4] = 10.0;
        let f = field([3, 3, 1], v);
        let d = persistence(&f);
        assert_eq!(d.signature(), vec![(0, 0.0, f64::INFINITY), (1, 0.0, 10.0)]);
        assert_eq!(d.signature(), persistence_bruteforce(&f).unwrap().signature());
    }

    #[test]
    fn hollow_cube_gives_void() {
        let mut v = vec![0.0; 27];
        v[13] = 7.0;
        let f = field([3, 3, 3], v);
        let d = persistence(&f);
        assert_eq!(d.signature(), vec![(0, 0.0, f64::INFINITY), (2, 0.0, 7.0)]);
        assert_eq!(d.signature(), persistence_bruteforce(&f).unwrap().signature());
    }

    #[test]
    fn matches_bruteforce_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let f = random_int_field(5, &mut rng);
            assert_eq!(persistence(&f).signature(), persistence_bruteforce(&f).unwrap().signature());
        }
        for _ in 0..10 {
            let dims = [rng.random_range(1..7), rng.random_range(1..7), rng.random_range(1..7)];
            let values = (0..dims.iter().product()).map(|_| rng.random::<f64>() - 0.5).collect();
            let f = field(dims, values);
            assert_eq!(persistence(&f).signature(), persistence_bruteforce(&f).unwrap().signature());
        }
    }

    #[test]
    fn anchors_carry_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = random_int_field(6, &mut rng);
            for p in persistence(&f).points {
                assert_eq!(f.get(p.birth_cell.unwrap()), p.birth);
                match p.death_cell {
                    Some(c) => assert_eq!(f.get(c), p.death),
                    None => assert!(p.is_essential()),
                }
                assert!(p.death > p.birth);
            }
        }
    }

    #[test]
    fn euler_poincare() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let f = random_int_field(5, &mut rng);
            let d = persistence(&f);
            for t in -6..=6 {
                let t = t as f64 + 0.5;
                let alt = d.betti_at(0, t) as i64 - d.betti_at(1, t) as i64 + d.betti_at(2, t) as i64;
                assert_eq!(alt, euler_characteristic(&f, t), "t = {t}");
            }
        }
    }

    #[test]
    fn bruteforce_size_limit() {
        let f = field([40, 40, 40], vec![0.0; 64000]);
        assert!(matches!(persistence_bruteforce(&f), Err(PersistenceError::TooLarge { .. })));
    }

    #[test]
    fn chunking() {
        let f = field([4, 3, 2], vec![0.0; 24]);
        let one = persistence_chunked(&f, [1, 1, 1]).unwrap();
        assert_eq!(one.chunks.len(), 1);
        assert!(!one.boundary_artifacts);
        assert_eq!(one.chunks[0].diagram, persistence(&f));
        let two = persistence_chunked(&f, [2, 1, 1]).unwrap();
        assert_eq!(two.chunks.len(), 2);
        assert!(two.boundary_artifacts);
        assert_eq!(two.chunks[1].origin, [2, 0, 0]);
        for c in &two.chunks {
            assert_eq!(c.diagram.signature(), vec![(0, 0.0, f64::INFINITY)]);
        }
        assert!(persistence_chunked(&f, [5, 1, 1]).is_err());
        assert!(persistence_chunked(&f, [0, 1, 1]).is_err());
    }

    #[test]
    fn chunk_anchors_are_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_int_field(6, &mut rng);
        for c in persistence_chunked(&f, [2, 2, 1]).unwrap().chunks {
            for p in &c.diagram.points {
                assert_eq!(f.get(p.birth_cell.unwrap()), p.birth);
            }
        }
    }
}
