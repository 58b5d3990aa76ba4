//! Cell-centered 2D grids over (birth, death) space, used for KDE heatmaps and for
//! midpoint quadrature of mixture densities.

use serde::{Deserialize, Serialize};

/// `bounds = [bmin, bmax, dmin, dmax]`; `resolution = [nb, nd]` cells. Nodes sit at cell
/// centers, so the node values times [`Grid2::cell_area`] form a midpoint-rule integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub bounds: [f64; 4],
    pub resolution: [usize; 2],
}

impl Grid2 {
    pub fn new(bounds: [f64; 4], resolution: [usize; 2]) -> Self {
        Self { bounds, resolution }
    }

    pub fn is_valid(&self) -> bool {
        let [b0, b1, d0, d1] = self.bounds;
        self.bounds.iter().all(|v| v.is_finite()) && b1 > b0 && d1 > d0
    }

    pub fn step(&self) -> [f64; 2] {
        let [b0, b1, d0, d1] = self.bounds;
        [(b1 - b0) / self.resolution[0] as f64, (d1 - d0) / self.resolution[1] as f64]
    }

    pub fn cell_area(&self) -> f64 {
        let [hb, hd] = self.step();
        hb * hd
    }

    pub fn len(&self) -> usize {
        self.resolution[0] * self.resolution[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates, birth index fastest.
    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        let [hb, hd] = self.step();
        let [b0, _, d0, _] = self.bounds;
        let [nb, nd] = self.resolution;
        (0..nd).flat_map(move |j| {
            (0..nb).map(move |i| [b0 + (i as f64 + 0.5) * hb, d0 + (j as f64 + 0.5) * hd])
        })
    }

    /// Bounding box of `points` expanded by `margin` on every side.
    pub fn around(points: impl IntoIterator<Item = [f64; 2]>, margin: f64, resolution: [usize; 2]) -> Option<Self> {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        let mut any = false;
        for [x, y] in points {
            any = true;
            b[0] = b[0].min(x);
            b[1] = b[1].max(x);
            b[2] = b[2].min(y);
            b[3] = b[3].max(y);
        }
        any.then(|| Self::new([b[0] - margin, b[1] + margin, b[2] - margin, b[3] + margin], resolution))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centers() {
        let g = Grid2::new([0.0, 1.0, 0.0, 2.0], [2, 2]);
        let nodes: Vec<_> = g.nodes().collect();
        assert_eq!(nodes, vec![[0.25, 0.5], [0.75, 0.5], [0.25, 1.5], [0.75, 1.5]]);
        assert_eq!(g.cell_area(), 0.5);
        assert!(g.is_valid());
        assert!(!Grid2::new([1.0, 1.0, 0.0, 1.0], [2, 2]).is_valid());
    }
}
