//! Partitioning of feature rows: k-means, unweighted GMM, and k-medoids (PAM, CLARA).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_rows, TextureError};
use crate::mixture::{e_step, em_fit, EmOptions, WeightedPoint};
use crate::stats::{derive_seed, kmeans_plus_plus, sq_dist};

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub trace: Vec<f64>,
}

fn check_k(rows: &[Vec<f64>], k: usize) -> Result<usize, TextureError> {
    let d = check_rows(rows, 1)?;
    if k == 0 || k > rows.len() {
        return Err(TextureError::InvalidK { k, n: rows.len() });
    }
    Ok(d)
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (m, c) in centers.iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (m, d);
        }
    }
    best
}

/// Lloyd's algorithm from k-means++ seeds. A cluster that empties keeps its centroid.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KMeansResult, TextureError> {
    let d = check_k(rows, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> =
        kmeans_plus_plus(rows, k, &mut rng).into_iter().map(|i| rows[i].clone()).collect();
    let mut labels = vec![0; rows.len()];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut inertia = 0.0;
        for (l, r) in labels.iter_mut().zip(rows) {
            let (m, dist) = nearest(r, &centroids);
            *l = m;
            inertia += dist;
        }
        trace.push(inertia);
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (&l, r) in labels.iter().zip(rows) {
            counts[l] += 1;
            sums[l].iter_mut().zip(r).for_each(|(s, x)| *s += x);
        }
        let mut shift: f64 = 0.0;
        for m in 0..k {
            if counts[m] == 0 {
                continue;
            }
            let c: Vec<f64> = sums[m].iter().map(|s| s / counts[m] as f64).collect();
            shift = shift.max(sq_dist(&c, &centroids[m]).sqrt());
            centroids[m] = c;
        }
        if shift <= tol {
            break;
        }
    }
    let mut inertia = 0.0;
    for (l, r) in labels.iter_mut().zip(rows) {
        let (m, dist) = nearest(r, &centroids);
        *l = m;
        inertia += dist;
    }
    trace.push(inertia);
    Ok(KMeansResult { labels, centroids, inertia, trace })
}

/// Fits an unweighted Gaussian mixture and labels each row by its most probable component.
pub fn cluster_gmm(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>, TextureError> {
    check_k(rows, k)?;
    let pts: Vec<WeightedPoint> = rows.iter().map(|r| WeightedPoint::unit(r.clone())).collect();
    let fit = em_fit(&pts, k, seed, EmOptions::default())?;
    let resp = e_step(&fit.model, &pts)?;
    Ok((0..rows.len())
        .map(|j| {
            let row = resp.row(j);
            (0..k).fold(0, |b, m| if row[m] > row[b] { m } else { b })
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PamResult {
    /// Row indices of the medoids, ascending.
    pub medoids: Vec<usize>,
    pub labels: Vec<usize>,
    /// Sum of Euclidean distances from each row to its medoid.
    pub cost: f64,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn total_cost(dist: &[Vec<f64>], medoids: &[usize]) -> f64 {
    (0..dist.len()).map(|i| medoids.iter().map(|&m| dist[i][m]).fold(f64::INFINITY, f64::min)).sum()
}

fn assign(rows: &[Vec<f64>], points: &[Vec<f64>], medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (m, &i) in medoids.iter().enumerate() {
                let d = euclid(p, &rows[i]);
                if d < best.1 {
                    best = (m, d);
                }
            }
            cost += best.1;
            best.0
        })
        .collect();
    (labels, cost)
}

/// Partitioning Around Medoids: greedy BUILD, then best-improvement SWAP until no swap
/// lowers the total distance.
pub fn pam(rows: &[Vec<f64>], k: usize) -> Result<PamResult, TextureError> {
    check_k(rows, k)?;
    let n = rows.len();
    let dist: Vec<Vec<f64>> = rows.iter().map(|a| rows.iter().map(|b| euclid(a, b)).collect()).collect();
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::INFINITY);
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            medoids.push(c);
            let cost = total_cost(&dist, &medoids);
            medoids.pop();
            if cost < best.1 {
                best = (c, cost);
            }
        }
        medoids.push(best.0);
    }
    let mut cost = total_cost(&dist, &medoids);
    loop {
        let mut best = (0, 0, cost);
        for slot in 0..k {
            for c in 0..n {
                if medoids.contains(&c) {
                    continue;
                }
                let old = medoids[slot];
                medoids[slot] = c;
                let trial = total_cost(&dist, &medoids);
                medoids[slot] = old;
                if trial < best.2 - 1e-12 * cost.max(1.0) {
                    best = (slot, c, trial);
                }
            }
        }
        if best.2 < cost {
            medoids[best.0] = best.1;
            cost = best.2;
        } else {
            break;
        }
    }
    medoids.sort_unstable();
    let (labels, cost) = assign(rows, rows, &medoids);
    Ok(PamResult { medoids, labels, cost })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClaraResult {
    pub labels: Vec<usize>,
    /// Row indices of the medoids in the full input, ascending.
    pub medoids: Vec<usize>,
    pub cost: f64,
}

/// CLARA: PAM on `n_subsamples` random subsets of `subsample_size` rows; the medoid set
/// with the lowest total distance over all rows wins. Subsample `s` is drawn with
/// `derive_seed(seed, s)`.
pub fn cluster_clara(
    rows: &[Vec<f64>],
    k: usize,
    n_subsamples: usize,
    subsample_size: usize,
    seed: u64,
) -> Result<ClaraResult, TextureError> {
    check_k(rows, k)?;
    if subsample_size < k {
        return Err(TextureError::InvalidK { k, n: subsample_size });
    }
    let n = rows.len();
    let size = subsample_size.min(n);
    let mut best: Option<ClaraResult> = None;
    for s in 0..n_subsamples.max(1) {
        let mut idx: Vec<usize> = if size == n {
            (0..n).collect()
        } else {
            sample(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, s as u64)), n, size).into_vec()
        };
        idx.sort_unstable();
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
        let local = pam(&sub, k)?;
        let medoids: Vec<usize> = local.medoids.iter().map(|&m| idx[m]).collect();
        let (labels, cost) = assign(rows, rows, &medoids);
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(ClaraResult { labels, medoids, cost });
        }
        if size == n {
            break;
        }
    }
    Ok(best.unwrap())
}
