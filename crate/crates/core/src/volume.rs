//! Dense voxel grids shared by the binary volume and the scalar field.

use thiserror::Error;

/// Voxel counts along x, y, z.
pub type Dims = [usize; 3];
/// Physical size of one voxel along x, y, z (micrometers).
pub type Spacing = [f64; 3];

#[derive(Debug, Error, PartialEq)]
pub enum VolumeError {
    #[error("dimensions must be positive, got {0:?}")]
    ZeroDimension(Dims),
    #[error("spacing must be positive and finite, got {0:?}")]
    BadSpacing(Spacing),
    #[error("expected {expected} voxels for dims {dims:?}, got {got}")]
    LengthMismatch { dims: Dims, expected: usize, got: usize },
}

pub(crate) fn check_grid(dims: Dims, spacing: Spacing, len: usize) -> Result<(), VolumeError> {
    if dims.iter().any(|&n| n == 0) {
        return Err(VolumeError::ZeroDimension(dims));
    }
    if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(VolumeError::BadSpacing(spacing));
    }
    let expected = dims[0] * dims[1] * dims[2];
    if len != expected {
        return Err(VolumeError::LengthMismatch { dims, expected, got: len });
    }
    Ok(())
}

/// Linear index of a voxel, x fastest.
#[inline]
pub fn linear_index(dims: Dims, [x, y, z]: [usize; 3]) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

/// Inverse of [`linear_index`].
#[inline]
pub fn coords_of(dims: Dims, idx: usize) -> [usize; 3] {
    let x = idx % dims[0];
    let rest = idx / dims[0];
    [x, rest % dims[1], rest / dims[1]]
}

/// A 3D occupancy grid. Occupied voxels form the object whose signed distance is taken.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryVolume {
    dims: Dims,
    spacing: Spacing,
    voxels: Vec<bool>,
}

impl BinaryVolume {
    /// An all-empty volume.
    pub fn empty(dims: Dims, spacing: Spacing) -> Result<Self, VolumeError> {
        let n = dims.iter().product();
        Self::from_voxels(dims, spacing, vec![false; n])
    }

    pub fn from_voxels(dims: Dims, spacing: Spacing, voxels: Vec<bool>) -> Result<Self, VolumeError> {
        check_grid(dims, spacing, voxels.len())?;
        Ok(Self { dims, spacing, voxels })
    }

    /// Builds a volume by evaluating `pred` at every voxel coordinate.
    pub fn from_fn(
        dims: Dims,
        spacing: Spacing,
        mut pred: impl FnMut([usize; 3]) -> bool,
    ) -> Result<Self, VolumeError> {
        let n: usize = dims.iter().product();
        let voxels = (0..n).map(|i| pred(coords_of(dims, i))).collect();
        Self::from_voxels(dims, spacing, voxels)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn voxels(&self) -> &[bool] {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn get(&self, p: [usize; 3]) -> bool {
        self.voxels[linear_index(self.dims, p)]
    }

    pub fn set(&mut self, p: [usize; 3], value: bool) {
        let i = linear_index(self.dims, p);
        self.voxels[i] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v).count()
    }

    /// Copy with a different physical spacing.
    pub fn with_spacing(mut self, spacing: Spacing) -> Result<Self, VolumeError> {
        check_grid(self.dims, spacing, self.voxels.len())?;
        self.spacing = spacing;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let dims = [3, 4, 5];
        for i in 0..60 {
            assert_eq!(linear_index(dims, coords_of(dims, i)), i);
        }
        assert_eq!(linear_index(dims, [1, 0, 0]), 1);
        assert_eq!(linear_index(dims, [0, 1, 0]), 3);
        assert_eq!(linear_index(dims, [0, 0, 1]), 12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(
            BinaryVolume::empty([0, 2, 2], [1.0; 3]),
            Err(VolumeError::ZeroDimension([0, 2, 2]))
        );
        assert!(matches!(
            BinaryVolume::empty([2, 2, 2], [1.0, -1.0, 1.0]),
            Err(VolumeError::BadSpacing(_))
        ));
        assert!(matches!(
            BinaryVolume::from_voxels([2, 2, 2], [1.0; 3], vec![true; 7]),
            Err(VolumeError::LengthMismatch { expected: 8, got: 7, .. })
        ));
    }
}
