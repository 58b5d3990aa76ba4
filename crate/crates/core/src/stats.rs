//! Small numeric helpers shared by the clustering and mixture code.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent seed for sub-task `stream` of a run seeded with `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream.wrapping_add(1));
    rng.next_u64()
}

/// Mean and population (1/n) standard deviation; `None` for an empty slice.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Population variance; 0 for an empty slice.
pub fn variance(xs: &[f64]) -> f64 {
    mean_std(xs).map_or(0.0, |(_, s)| s * s)
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: returns the indices of the `k` chosen rows.
///
/// The first center is uniform; each further center is drawn with probability
/// proportional to its squared distance to the nearest chosen center. When every
/// remaining row coincides with a center, the lowest unused index is taken.
pub fn kmeans_plus_plus<R: Rng>(rows: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<usize> {
    let n = rows.len();
    assert!(k >= 1 && k <= n);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // guard against rounding landing on a zero-weight tail
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap();
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &rows[next]));
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[2.0, 4.0]), Some((3.0, 1.0)));
        assert_eq!(mean_std(&[5.0]), Some((5.0, 0.0)));
        assert_eq!(mean_std(&[]), None);
    }

    #[test]
    fn plus_plus_picks_distinct_rows() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = kmeans_plus_plus(&rows, 10, &mut rng);
        let mut s = c.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 10);
        let dup = vec![vec![1.0]; 4];
        assert_eq!(kmeans_plus_plus(&dup, 3, &mut rng).len(), 3);
    }
}
