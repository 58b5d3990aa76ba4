//! Exact Euclidean signed distance transform.
//!
//! Inside the object the value is minus the distance from a voxel center to the nearest
//! empty voxel center, where the volume is surrounded by an infinite empty exterior.
//! Outside it is the distance to the nearest occupied voxel center. Spacing is applied
//! per axis inside the transform.
//!
//! The transform is the separable lower-envelope-of-parabolas algorithm, run once per
//! axis. Per-axis terms are evaluated as `(Δ·s)²` and accumulated x, then y, then z, so
//! the result is bit-for-bit the same expression the brute-force search evaluates.

use rayon::prelude::*;
use thiserror::Error;

use crate::volume::{check_grid, coords_of, linear_index, BinaryVolume, Dims, Spacing, VolumeError};

#[derive(Debug, Error, PartialEq)]
pub enum SdtError {
    #[error("volume has no occupied voxel")]
    EmptyVolume,
    #[error("field value at index {0} is not finite")]
    NonFinite(usize),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// Dense real-valued grid over the same lattice as a [`BinaryVolume`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    dims: Dims,
    spacing: Spacing,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(dims: Dims, spacing: Spacing, values: Vec<f64>) -> Result<Self, SdtError> {
        check_grid(dims, spacing, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SdtError::NonFinite(i));
        }
        Ok(Self { dims, spacing, values })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, p: [usize; 3]) -> f64 {
        self.values[linear_index(self.dims, p)]
    }

    /// Copy of the axis-aligned block starting at `origin` with size `size`.
    pub fn sub_field(&self, origin: [usize; 3], size: Dims) -> ScalarField {
        let mut values = Vec::with_capacity(size.iter().product());
        for z in 0..size[2] {
            for y in 0..size[1] {
                let row = linear_index(self.dims, [origin[0], origin[1] + y, origin[2] + z]);
                values.extend_from_slice(&self.values[row..row + size[0]]);
            }
        }
        ScalarField { dims: size, spacing: self.spacing, values }
    }
}

#[inline]
fn axis_term(delta: f64, s: f64) -> f64 {
    let d = delta * s;
    d * d
}

/// One-dimensional squared distance transform of `f` (∞ marks non-features) with
/// per-step scale `s`. Scratch buffers are reused across scan lines.
fn edt_1d(f: &[f64], s: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    let s2 = s * s;
    let key = |q: usize| f[q] + s2 * (q as f64) * (q as f64);
    for q in 0..n {
        if f[q] == f64::INFINITY {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let cross = (key(q) - key(p)) / (2.0 * s2 * (q as f64 - p as f64));
                    if cross <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(cross);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *o = axis_term(q as f64 - p as f64, s) + f[p];
    }
}

/// Squared EDT of a grid where `grid[i] == 0.0` marks features and ∞ marks the rest.
/// Runs the x, y and z passes in place.
fn squared_edt(grid: &mut [f64], dims: Dims, spacing: Spacing) {
    let [nx, ny, nz] = dims;
    // x pass: contiguous rows
    grid.par_chunks_mut(nx).for_each_init(
        || (vec![0.0; nx], Vec::new(), Vec::new()),
        |(out, v, z), row| {
            edt_1d(row, spacing[0], out, v, z);
            row.copy_from_slice(out);
        },
    );
    // y pass: per z-slab, gather columns
    grid.par_chunks_mut(nx * ny).for_each_init(
        || (vec![0.0; ny], vec![0.0; ny], Vec::new(), Vec::new()),
        |(line, out, v, z), slab| {
            for x in 0..nx {
                for y in 0..ny {
                    line[y] = slab[x + nx * y];
                }
                edt_1d(line, spacing[1], out, v, z);
                for y in 0..ny {
                    slab[x + nx * y] = out[y];
                }
            }
        },
    );
    // z pass: columns strided by one slab
    let slab = nx * ny;
    let columns: Vec<Vec<f64>> = (0..slab)
        .into_par_iter()
        .map_init(
            || (vec![0.0; nz], Vec::new(), Vec::new()),
            |(out, v, z), c| {
                let line: Vec<f64> = (0..nz).map(|k| grid[c + slab * k]).collect();
                edt_1d(&line, spacing[2], out, v, z);
                out.clone()
            },
        )
        .collect();
    for (c, col) in columns.into_iter().enumerate() {
        for (k, val) in col.into_iter().enumerate() {
            grid[c + slab * k] = val;
        }
    }
}

/// Exact Euclidean signed distance field: negative inside, positive outside.
pub fn signed_distance(vol: &BinaryVolume) -> Result<ScalarField, SdtError> {
    if vol.occupied_count() == 0 {
        return Err(SdtError::EmptyVolume);
    }
    let dims = vol.dims();
    let spacing = vol.spacing();
    let occ = vol.voxels();

    // Distance to occupied voxels, for empty voxels.
    let mut outside: Vec<f64> =
        occ.iter().map(|&o| if o { 0.0 } else { f64::INFINITY }).collect();
    squared_edt(&mut outside, dims, spacing);

    // Distance to empty voxels, for occupied voxels, on a grid padded by one empty layer.
    let pdims = [dims[0] + 2, dims[1] + 2, dims[2] + 2];
    let mut inside = vec![0.0; pdims.iter().product()];
    for (i, &o) in occ.iter().enumerate() {
        if o {
            let [x, y, z] = coords_of(dims, i);
            inside[linear_index(pdims, [x + 1, y + 1, z + 1])] = f64::INFINITY;
        }
    }
    squared_edt(&mut inside, pdims, spacing);

    let values = occ
        .iter()
        .enumerate()
        .map(|(i, &o)| {
            if o {
                let [x, y, z] = coords_of(dims, i);
                -inside[linear_index(pdims, [x + 1, y + 1, z + 1])].sqrt()
            } else {
                outside[i].sqrt()
            }
        })
        .collect();
    Ok(ScalarField { dims, spacing, values })
}

/// Exhaustive nearest-neighbour version of [`signed_distance`], used as a test oracle.
pub fn signed_distance_bruteforce(vol: &BinaryVolume) -> Result<ScalarField, SdtError> {
    if vol.occupied_count() == 0 {
        return Err(SdtError::EmptyVolume);
    }
    let dims = vol.dims();
    let s = vol.spacing();
    let (mut full, mut empty) = (Vec::new(), Vec::new());
    for (i, &o) in vol.voxels().iter().enumerate() {
        let c = coords_of(dims, i).map(|v| v as f64);
        if o {
            full.push(c)
        } else {
            empty.push(c)
        }
    }
    let nearest = |p: [f64; 3], set: &[[f64; 3]]| {
        set.iter()
            .map(|q| {
                let tx = axis_term(p[0] - q[0], s[0]);
                let ty = axis_term(p[1] - q[1], s[1]);
                let tz = axis_term(p[2] - q[2], s[2]);
                tz + (ty + tx)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let values = vol
        .voxels()
        .par_iter()
        .enumerate()
        .map(|(i, &o)| {
            let p = coords_of(dims, i).map(|v| v as f64);
            if o {
                // nearest exterior lattice point is one step past a face along one axis
                let exterior = (0..3)
                    .flat_map(|a| [p[a] + 1.0, dims[a] as f64 - p[a]].map(|d| axis_term(d, s[a])))
                    .fold(f64::INFINITY, f64::min);
                -nearest(p, &empty).min(exterior).sqrt()
            } else {
                nearest(p, &full).sqrt()
            }
        })
        .collect();
    Ok(ScalarField { dims, spacing: s, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(n: usize, seed: u64, spacing: Spacing) -> BinaryVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vol = BinaryVolume::from_fn([n, n, n], spacing, |_| rng.random_bool(0.5)).unwrap();
        vol.set([0, 0, 0], true);
        vol
    }

    #[test]
    fn single_voxel() {
        let mut vol = BinaryVolume::empty([11, 11, 11], [1.0; 3]).unwrap();
        vol.set([5, 5, 5], true);
        let f = signed_distance(&vol).unwrap();
        assert_eq!(f.get([5, 5, 5]), -1.0);
        assert_eq!(f.get([5, 5, 7]), 2.0);
        assert_eq!(f.get([6, 6, 5]), 2f64.sqrt());
        assert_eq!(f, signed_distance_bruteforce(&vol).unwrap());
    }

    #[test]
    fn full_cube_uses_exterior() {
        let vol = BinaryVolume::from_voxels([3, 3, 3], [1.0; 3], vec![true; 27]).unwrap();
        let b = signed_distance_bruteforce(&vol).unwrap();
        assert_eq!(b.get([1, 1, 1]), -2.0);
        assert_eq!(b.get([0, 0, 0]), -1.0);
        assert_eq!(signed_distance(&vol).unwrap(), b);
    }

    #[test]
    fn empty_volume_errors() {
        let vol = BinaryVolume::empty([4, 4, 4], [1.0; 3]).unwrap();
        assert_eq!(signed_distance(&vol), Err(SdtError::EmptyVolume));
        assert_eq!(signed_distance_bruteforce(&vol), Err(SdtError::EmptyVolume));
    }

    #[test]
    fn matches_oracle_on_random_volumes() {
        for seed in 0..50 {
            let vol = random_volume(10, seed, [1.0; 3]);
            assert_eq!(signed_distance(&vol).unwrap(), signed_distance_bruteforce(&vol).unwrap());
        }
        for seed in 0..5 {
            let vol = random_volume(20, 1000 + seed, [1.0; 3]);
            assert_eq!(signed_distance(&vol).unwrap(), signed_distance_bruteforce(&vol).unwrap());
        }
    }

    #[test]
    fn anisotropic_spacing_matches_oracle() {
        for seed in 0..10 {
            let vol = random_volume(9, seed, [0.5, 1.0, 2.0]);
            assert_eq!(signed_distance(&vol).unwrap(), signed_distance_bruteforce(&vol).unwrap());
        }
    }

    #[test]
    fn sparse_volumes_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let mut vol = BinaryVolume::from_fn([12, 9, 7], [1.0; 3], |_| rng.random_bool(0.03)).unwrap();
            vol.set([3, 3, 3], true);
            assert_eq!(signed_distance(&vol).unwrap(), signed_distance_bruteforce(&vol).unwrap());
        }
    }

    #[test]
    fn sign_partition_and_lipschitz() {
        let vol = random_volume(8, 5, [1.0, 1.0, 1.5]);
        let f = signed_distance(&vol).unwrap();
        let dims = f.dims();
        for i in 0..f.len() {
            assert_eq!(f.values()[i] < 0.0, vol.voxels()[i]);
            assert!(f.values()[i] != 0.0);
        }
        let smax = 1.5;
        for i in 0..f.len() {
            let p = coords_of(dims, i);
            for j in 0..f.len() {
                let q = coords_of(dims, j);
                let dist = (0..3).map(|a| (p[a] as f64 - q[a] as f64).powi(2)).sum::<f64>().sqrt();
                // each one-sided distance is 1-Lipschitz; across the boundary both add up
                let bound = if vol.voxels()[i] == vol.voxels()[j] { dist * smax } else { 2.0 * dist * smax };
                assert!((f.values()[i] - f.values()[j]).abs() <= bound + 1e-12);
            }
        }
    }
}
