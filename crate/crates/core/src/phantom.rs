//! Deterministic synthetic volumes: balls, tori and random vessel networks.
//!
//! Every generator is a pure function of its arguments. Distances are measured between
//! voxel centers on the integer lattice.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{BinaryVolume, Dims, VolumeError};

#[derive(Debug, Error, PartialEq)]
pub enum PhantomError {
    #[error("ball of radius {radius} at {center:?} does not fit in {dims:?} with a one-voxel margin")]
    BallOutOfBounds { dims: Dims, center: [f64; 3], radius: f64 },
    #[error("torus does not fit in {dims:?} with a one-voxel margin")]
    TorusOutOfBounds { dims: Dims },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("degenerate phantom spec: {0}")]
    DegenerateSpec(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

fn fits(dims: Dims, center: [f64; 3], extent: [f64; 3]) -> bool {
    (0..3).all(|a| center[a] - extent[a] >= 1.0 && center[a] + extent[a] <= dims[a] as f64 - 2.0)
}

fn center_of(p: [usize; 3]) -> [f64; 3] {
    [p[0] as f64, p[1] as f64, p[2] as f64]
}

/// Solid ball: a voxel is occupied iff its center lies within `radius` of `center`.
pub fn make_ball(dims: Dims, center: [f64; 3], radius: f64) -> Result<BinaryVolume, PhantomError> {
    if !(radius > 0.0) || !fits(dims, center, [radius; 3]) {
        return Err(PhantomError::BallOutOfBounds { dims, center, radius });
    }
    let r2 = radius * radius;
    Ok(BinaryVolume::from_fn(dims, [1.0; 3], |p| {
        let q = center_of(p);
        (0..3).map(|a| (q[a] - center[a]).powi(2)).sum::<f64>() <= r2
    })?)
}

/// Solid torus with the given ring and tube radii, its symmetry axis along `axis`.
pub fn make_torus(
    dims: Dims,
    center: [f64; 3],
    ring_radius: f64,
    tube_radius: f64,
    axis: Axis,
) -> Result<BinaryVolume, PhantomError> {
    if !(tube_radius > 0.0) || !(ring_radius > tube_radius) {
        return Err(PhantomError::InvalidGeometry(format!(
            "need ring radius > tube radius > 0, got {ring_radius} and {tube_radius}"
        )));
    }
    let a = axis.index();
    let mut extent = [ring_radius + tube_radius; 3];
    extent[a] = tube_radius;
    if !fits(dims, center, extent) {
        return Err(PhantomError::TorusOutOfBounds { dims });
    }
    let (u, v) = ((a + 1) % 3, (a + 2) % 3);
    let r2 = tube_radius * tube_radius;
    Ok(BinaryVolume::from_fn(dims, [1.0; 3], |p| {
        let q = center_of(p);
        let rho = ((q[u] - center[u]).powi(2) + (q[v] - center[v]).powi(2)).sqrt();
        let h = q[a] - center[a];
        (rho - ring_radius).powi(2) + h * h <= r2
    })?)
}

/// Morphology class of a synthetic vessel network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomClass {
    /// Thick vessels with wide interstitial gaps.
    ThickSparse,
    /// Thin vessels packed with small gaps.
    ThinDense,
    /// Thin vessels with much larger gaps.
    ThinDilated,
}

impl PhantomClass {
    pub const ALL: [PhantomClass; 3] =
        [PhantomClass::ThickSparse, PhantomClass::ThinDense, PhantomClass::ThinDilated];

    pub fn name(self) -> &'static str {
        match self {
            PhantomClass::ThickSparse => "thick-sparse",
            PhantomClass::ThinDense => "thin-dense",
            PhantomClass::ThinDilated => "thin-dilated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Parameters of [`make_vessel_network`]. Radii and gaps are in voxels; gaps are
/// surface-to-surface distances between neighbouring parallel tubes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub class: PhantomClass,
    pub dims: Dims,
    pub tube_radius_range: (f64, f64),
    pub gap_range: (f64, f64),
    pub n_tubes: usize,
    pub seed: u64,
}

impl PhantomSpec {
    /// Calibrated defaults for each class on a 64³ grid.
    pub fn for_class(class: PhantomClass, seed: u64) -> Self {
        let (tube_radius_range, gap_range, n_tubes) = match class {
            PhantomClass::ThickSparse => ((3.0, 4.0), (10.0, 14.0), 36),
            PhantomClass::ThinDense => ((1.5, 2.0), (4.0, 6.0), 90),
            PhantomClass::ThinDilated => ((1.5, 2.0), (10.0, 14.0), 48),
        };
        Self { class, dims: [64, 64, 64], tube_radius_range, gap_range, n_tubes, seed }
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let ok_range = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi && hi.is_finite();
        if !ok_range(self.tube_radius_range) {
            return Err(PhantomError::InvalidSpec(format!(
                "tube_radius_range {:?}",
                self.tube_radius_range
            )));
        }
        if !ok_range(self.gap_range) {
            return Err(PhantomError::InvalidSpec(format!("gap_range {:?}", self.gap_range)));
        }
        if self.n_tubes == 0 {
            return Err(PhantomError::InvalidSpec("n_tubes must be at least 1".into()));
        }
        if self.dims.iter().any(|&n| n == 0) {
            return Err(PhantomError::InvalidSpec(format!("dims {:?}", self.dims)));
        }
        Ok(())
    }
}

/// Cylinder with hemispherical caps around the segment `a`–`b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

impl Capsule {
    pub fn length(&self) -> f64 {
        (0..3).map(|i| (self.b[i] - self.a[i]).powi(2)).sum::<f64>().sqrt()
    }

    /// Analytic volume π r² L + 4/3 π r³.
    pub fn volume(&self) -> f64 {
        let r = self.radius;
        std::f64::consts::PI * r * r * self.length() + 4.0 / 3.0 * std::f64::consts::PI * r * r * r
    }

    pub fn distance_sq(&self, p: [f64; 3]) -> f64 {
        let ab: [f64; 3] = std::array::from_fn(|i| self.b[i] - self.a[i]);
        let ap: [f64; 3] = std::array::from_fn(|i| p[i] - self.a[i]);
        let len2: f64 = ab.iter().map(|v| v * v).sum();
        let t = if len2 > 0.0 {
            (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (0..3).map(|i| (ap[i] - t * ab[i]).powi(2)).sum()
    }

    fn rasterize(&self, vol: &mut BinaryVolume) {
        let dims = vol.dims();
        let r = self.radius;
        let lo: [usize; 3] = std::array::from_fn(|i| {
            (self.a[i].min(self.b[i]) - r).floor().max(0.0) as usize
        });
        let hi: [usize; 3] = std::array::from_fn(|i| {
            ((self.a[i].max(self.b[i]) + r).ceil().max(0.0) as usize).min(dims[i] - 1)
        });
        let r2 = r * r;
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    if self.distance_sq(center_of([x, y, z])) <= r2 {
                        vol.set([x, y, z], true);
                    }
                }
            }
        }
    }
}

/// Capsules placed by [`make_vessel_network`], in placement order.
pub fn vessel_capsules(spec: &PhantomSpec) -> Result<Vec<Capsule>, PhantomError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dims = spec.dims;
    let (rlo, rhi) = spec.tube_radius_range;
    let (glo, ghi) = spec.gap_range;
    let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    };

    // Tube axes sit on a jittered lattice: along each axis the centre lines are
    // separated by one tube diameter plus a gap draw.
    let lattice: [Vec<f64>; 3] = std::array::from_fn(|a| {
        let mut coords = Vec::new();
        let mut c = rhi + 1.0 + draw(&mut rng, 0.0, ghi / 2.0);
        while c <= dims[a] as f64 - rhi - 2.0 {
            coords.push(c);
            c += 2.0 * rhi + draw(&mut rng, glo, ghi);
        }
        coords
    });

    let mut slots: Vec<(usize, f64, f64)> = Vec::new();
    for a in 0..3 {
        let (u, v) = ((a + 1) % 3, (a + 2) % 3);
        for &cu in &lattice[u] {
            for &cv in &lattice[v] {
                slots.push((a, cu, cv));
            }
        }
    }
    if slots.is_empty() {
        return Err(PhantomError::DegenerateSpec(format!(
            "no tube fits in {dims:?} with radius up to {rhi} and gaps {:?}",
            spec.gap_range
        )));
    }
    slots.shuffle(&mut rng);

    let mut capsules = Vec::with_capacity(spec.n_tubes);
    for &(a, cu, cv) in slots.iter().take(spec.n_tubes) {
        let radius = draw(&mut rng, rlo, rhi);
        let (u, v) = ((a + 1) % 3, (a + 2) % 3);
        let margin = radius + 1.0;
        let diagonal = rng.random_bool(0.1);
        let mut dir = [0.0; 3];
        dir[a] = 1.0;
        let mut p = [0.0; 3];
        p[u] = cu;
        p[v] = cv;
        p[a] = (dims[a] as f64 - 1.0) / 2.0;
        if diagonal {
            // tilt within the (a, u) plane
            let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            dir = [0.0; 3];
            dir[a] = std::f64::consts::FRAC_1_SQRT_2;
            dir[u] = s * std::f64::consts::FRAC_1_SQRT_2;
        }
        // Clip the infinite line p + t·dir to the box shrunk by the margin.
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let (lo, hi) = (margin, dims[i] as f64 - 1.0 - margin);
            if dir[i] == 0.0 {
                if p[i] < lo || p[i] > hi {
                    t0 = f64::INFINITY;
                }
                continue;
            }
            let (ta, tb) = ((lo - p[i]) / dir[i], (hi - p[i]) / dir[i]);
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
        if t0 > t1 {
            continue;
        }
        capsules.push(Capsule {
            a: std::array::from_fn(|i| p[i] + t0 * dir[i]),
            b: std::array::from_fn(|i| p[i] + t1 * dir[i]),
            radius,
        });
    }
    if capsules.is_empty() {
        return Err(PhantomError::DegenerateSpec("no tube could be placed".into()));
    }
    Ok(capsules)
}

/// Union of randomly placed axis-aligned or diagonal capsules.
pub fn make_vessel_network(spec: &PhantomSpec) -> Result<BinaryVolume, PhantomError> {
    let capsules = vessel_capsules(spec)?;
    let mut vol = BinaryVolume::empty(spec.dims, [1.0; 3])?;
    for c in &capsules {
        c.rasterize(&mut vol);
    }
    let occupied = vol.occupied_count();
    if occupied == 0 || occupied == vol.len() {
        return Err(PhantomError::DegenerateSpec(format!(
            "{occupied} of {} voxels occupied",
            vol.len()
        )));
    }
    Ok(vol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice_ball_count(radius: f64) -> usize {
        let r = radius.ceil() as i64;
        let mut n = 0;
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    if ((x * x + y * y + z * z) as f64) <= radius * radius {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    #[test]
    fn ball_counts() {
        let v = make_ball([11, 11, 11], [5.0; 3], 0.5).unwrap();
        assert_eq!(v.occupied_count(), 1);
        assert!(v.get([5, 5, 5]));
        let v = make_ball([11, 11, 11], [5.0; 3], 3.0).unwrap();
        assert_eq!(lattice_ball_count(3.0), 123);
        assert_eq!(v.occupied_count(), 123);
    }

    #[test]
    fn ball_matches_lattice_predicate() {
        for (c, r) in [([6.0, 7.0, 6.5], 2.2), ([5.5, 5.5, 5.5], 3.7), ([7.0, 6.0, 8.0], 4.0)] {
            let v = make_ball([14, 14, 14], c, r).unwrap();
            for i in 0..v.len() {
                let p = crate::volume::coords_of(v.dims(), i);
                let d2: f64 = (0..3).map(|a| (p[a] as f64 - c[a]).powi(2)).sum();
                assert_eq!(v.voxels()[i], d2 <= r * r);
            }
        }
    }

    #[test]
    fn ball_out_of_bounds() {
        assert!(matches!(
            make_ball([5, 5, 5], [2.0; 3], 3.0),
            Err(PhantomError::BallOutOfBounds { .. })
        ));
        assert!(make_ball([5, 5, 5], [2.0; 3], 1.0).is_ok());
    }

    #[test]
    fn torus_symmetric_and_validated() {
        let v = make_torus([31, 31, 11], [15.0, 15.0, 5.0], 10.0, 3.0, Axis::Z).unwrap();
        assert!(v.occupied_count() > 0);
        for x in 0..31 {
            for y in 0..31 {
                for z in 0..11 {
                    // (x, y) -> (30 - y, x) is a quarter turn about (15, 15)
                    assert_eq!(v.get([x, y, z]), v.get([30 - y, x, z]));
                }
            }
        }
        assert!(matches!(
            make_torus([31, 31, 11], [15.0, 15.0, 5.0], 3.0, 3.0, Axis::Z),
            Err(PhantomError::InvalidGeometry(_))
        ));
        assert!(matches!(
            make_torus([20, 20, 11], [10.0, 10.0, 5.0], 10.0, 3.0, Axis::Z),
            Err(PhantomError::TorusOutOfBounds { .. })
        ));
    }

    #[test]
    fn network_is_deterministic() {
        let spec = PhantomSpec::for_class(PhantomClass::ThinDense, 7);
        let a = make_vessel_network(&spec).unwrap();
        let b = make_vessel_network(&spec).unwrap();
        assert_eq!(a, b);
        let other = make_vessel_network(&PhantomSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn single_capsule_volume() {
        for seed in 0..10 {
            let spec = PhantomSpec {
                class: PhantomClass::ThickSparse,
                dims: [40, 40, 40],
                tube_radius_range: (2.0, 2.0),
                gap_range: (6.0, 8.0),
                n_tubes: 1,
                seed,
            };
            let caps = vessel_capsules(&spec).unwrap();
            assert_eq!(caps.len(), 1);
            let vol = make_vessel_network(&spec).unwrap();
            let expected = caps[0].volume();
            let got = vol.occupied_count() as f64;
            assert!((got - expected).abs() <= 0.2 * expected, "seed {seed}: {got} vs {expected}");
        }
    }

    #[test]
    fn invalid_specs() {
        let mut spec = PhantomSpec::for_class(PhantomClass::ThinDense, 1);
        spec.n_tubes = 0;
        assert!(matches!(make_vessel_network(&spec), Err(PhantomError::InvalidSpec(_))));
        let mut spec = PhantomSpec::for_class(PhantomClass::ThinDense, 1);
        spec.tube_radius_range = (3.0, 2.0);
        assert!(matches!(make_vessel_network(&spec), Err(PhantomError::InvalidSpec(_))));
        let mut spec = PhantomSpec::for_class(PhantomClass::ThinDense, 1);
        spec.dims = [4, 4, 4];
        assert!(matches!(make_vessel_network(&spec), Err(PhantomError::DegenerateSpec(_))));
    }
}
