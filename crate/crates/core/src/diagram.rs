//! Critical-size analysis of signed distance diagrams.
//!
//! Under a signed distance filtration each finite point falls in one of seven
//! (degree, quadrant) classes, each pairing two critical sizes:
//!
//! | quadrant | pairing        |
//! |----------|----------------|
//! | PH0 SW   | (−r₀, −r₁)     |
//! | PH0 NW   | (−r₀, g₁)      |
//! | PH1 SW   | (−r₁, −r₂)     |
//! | PH1 NW   | (−r₁, g₂)      |
//! | PH1 NE   | (g₁, g₂)       |
//! | PH2 NW   | (−r₂, g₃)      |
//! | PH2 NE   | (g₂, g₃)       |
//!
//! r-sizes measure vessel thickness, g-sizes the gaps between vessels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cubical::{Diagram, PersistencePoint};

#[derive(Debug, Error, PartialEq)]
pub enum DiagramError {
    #[error("essential point has no quadrant")]
    EssentialPoint,
    #[error("birth or death is exactly zero")]
    ZeroBoundary,
    #[error("degree {degree} point ({birth}, {death}) cannot occur in a signed distance diagram")]
    ImpossibleQuadrant { degree: u8, birth: f64, death: f64 },
    #[error("{kind:?} ratio needs a {expected} point, got {got}")]
    WrongQuadrant { kind: AspectKind, expected: Quadrant, got: Quadrant },
    #[error("aspect ratio denominator is zero")]
    DegenerateDenominator,
    #[error("point {0} has no cell anchors")]
    MissingAnchors(usize),
    #[error("persistence threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),
    #[error("unknown quadrant label {0:?}")]
    UnknownQuadrant(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    PH0SW,
    PH0NW,
    PH1SW,
    PH1NW,
    PH1NE,
    PH2NW,
    PH2NE,
}

impl Quadrant {
    pub const ALL: [Quadrant; 7] = [
        Quadrant::PH0SW,
        Quadrant::PH0NW,
        Quadrant::PH1SW,
        Quadrant::PH1NW,
        Quadrant::PH1NE,
        Quadrant::PH2NW,
        Quadrant::PH2NE,
    ];

    pub fn degree(self) -> u8 {
        match self {
            Quadrant::PH0SW | Quadrant::PH0NW => 0,
            Quadrant::PH1SW | Quadrant::PH1NW | Quadrant::PH1NE => 1,
            Quadrant::PH2NW | Quadrant::PH2NE => 2,
        }
    }

    /// Names of the two critical sizes, birth side first.
    pub fn pairing(self) -> (&'static str, &'static str) {
        match self {
            Quadrant::PH0SW => ("r0", "r1"),
            Quadrant::PH0NW => ("r0", "g1"),
            Quadrant::PH1SW => ("r1", "r2"),
            Quadrant::PH1NW => ("r1", "g2"),
            Quadrant::PH1NE => ("g1", "g2"),
            Quadrant::PH2NW => ("r2", "g3"),
            Quadrant::PH2NE => ("g2", "g3"),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quadrant::PH0SW => "PH0SW",
            Quadrant::PH0NW => "PH0NW",
            Quadrant::PH1SW => "PH1SW",
            Quadrant::PH1NW => "PH1NW",
            Quadrant::PH1NE => "PH1NE",
            Quadrant::PH2NW => "PH2NW",
            Quadrant::PH2NE => "PH2NE",
        }
    }

    /// Quadrants whose points are artifacts of chunked computation or noise and are
    /// excluded from mixture-model classification.
    pub fn excluded_from_classification(self) -> bool {
        matches!(self, Quadrant::PH0NW | Quadrant::PH2NW)
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Quadrant {
    type Err = DiagramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| !c.is_whitespace() && *c != '_').collect();
        Quadrant::ALL
            .into_iter()
            .find(|q| q.label().eq_ignore_ascii_case(&norm))
            .ok_or_else(|| DiagramError::UnknownQuadrant(s.to_string()))
    }
}

/// A finite diagram point annotated with its quadrant and critical sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadrantPoint {
    pub degree: u8,
    pub quadrant: Quadrant,
    pub birth: f64,
    pub death: f64,
    /// Absolute values of birth and death, in that order.
    pub sizes: [f64; 2],
    /// Persistence, death − birth.
    pub weight: f64,
}

impl QuadrantPoint {
    /// Rebuilds `(birth, death)` from the quadrant and the two sizes.
    pub fn reconstruct(quadrant: Quadrant, sizes: [f64; 2]) -> (f64, f64) {
        let (b, d) = match quadrant {
            Quadrant::PH0SW | Quadrant::PH1SW => (-sizes[0], -sizes[1]),
            Quadrant::PH0NW | Quadrant::PH1NW | Quadrant::PH2NW => (-sizes[0], sizes[1]),
            Quadrant::PH1NE | Quadrant::PH2NE => (sizes[0], sizes[1]),
        };
        (b, d)
    }
}

/// Classifies a finite point into its critical-size quadrant.
pub fn quadrant_of(point: &PersistencePoint) -> Result<QuadrantPoint, DiagramError> {
    if point.is_essential() {
        return Err(DiagramError::EssentialPoint);
    }
    let (b, d) = (point.birth, point.death);
    if b == 0.0 || d == 0.0 {
        return Err(DiagramError::ZeroBoundary);
    }
    let impossible =
        || DiagramError::ImpossibleQuadrant { degree: point.degree, birth: b, death: d };
    let quadrant = match (point.degree, b < 0.0, d < 0.0) {
        (0, true, true) => Quadrant::PH0SW,
        (0, true, false) => Quadrant::PH0NW,
        (1, true, true) => Quadrant::PH1SW,
        (1, true, false) => Quadrant::PH1NW,
        (1, false, false) => Quadrant::PH1NE,
        (2, true, false) => Quadrant::PH2NW,
        (2, false, false) => Quadrant::PH2NE,
        _ => return Err(impossible()),
    };
    Ok(QuadrantPoint {
        degree: point.degree,
        quadrant,
        birth: b,
        death: d,
        sizes: [b.abs(), d.abs()],
        weight: d - b,
    })
}

/// Finite points of `diagram` with their quadrants. Points that cannot be classified
/// (essential, zero boundary, impossible sign pattern) are skipped.
pub fn quadrant_points(diagram: &Diagram) -> Vec<QuadrantPoint> {
    diagram.points.iter().filter_map(|p| quadrant_of(p).ok()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AspectKind {
    /// 1 − r₁/r₀ on PH0 SW; 0 means constant vessel thickness.
    Undulation,
    /// g₂/r₁ on PH1 NW; loop size relative to vessel thickness.
    Loop,
    /// 1 − g₁/g₂ on PH1 NE.
    Waviness,
}

impl AspectKind {
    pub fn quadrant(self) -> Quadrant {
        match self {
            AspectKind::Undulation => Quadrant::PH0SW,
            AspectKind::Loop => Quadrant::PH1NW,
            AspectKind::Waviness => Quadrant::PH1NE,
        }
    }
}

pub fn aspect_ratio(qp: &QuadrantPoint, kind: AspectKind) -> Result<f64, DiagramError> {
    let expected = kind.quadrant();
    if qp.quadrant != expected {
        return Err(DiagramError::WrongQuadrant { kind, expected, got: qp.quadrant });
    }
    let [s0, s1] = qp.sizes;
    let denom = match kind {
        AspectKind::Undulation | AspectKind::Loop => s0,
        AspectKind::Waviness => s1,
    };
    if denom == 0.0 {
        return Err(DiagramError::DegenerateDenominator);
    }
    Ok(match kind {
        AspectKind::Undulation => 1.0 - s1 / s0,
        AspectKind::Loop => s1 / s0,
        AspectKind::Waviness => 1.0 - s0 / s1,
    })
}

/// Keeps points with persistence ≥ `tau`; essential points are always kept.
pub fn filter_persistence(diagram: &Diagram, tau: f64) -> Diagram {
    let points = diagram
        .points
        .iter()
        .filter(|p| p.is_essential() || p.persistence() >= tau)
        .cloned()
        .collect();
    diagram.with_points(points)
}

/// Like [`filter_persistence`] but rejects a negative threshold.
pub fn try_filter_persistence(diagram: &Diagram, tau: f64) -> Result<Diagram, DiagramError> {
    if !(tau >= 0.0) {
        return Err(DiagramError::NegativeThreshold(tau));
    }
    Ok(filter_persistence(diagram, tau))
}

/// Axis-aligned ellipsoid with one horizontal (x, y) radius and one vertical (z) radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub r_xy: f64,
    pub r_z: f64,
}

impl Ellipsoid {
    pub fn contains(&self, p: [usize; 3]) -> bool {
        let dx = p[0] as f64 - self.center[0];
        let dy = p[1] as f64 - self.center[1];
        let dz = p[2] as f64 - self.center[2];
        (dx * dx + dy * dy) / (self.r_xy * self.r_xy) + dz * dz / (self.r_z * self.r_z) <= 1.0
    }
}

/// Keeps finite points whose birth and death voxels both lie in `ball`.
pub fn restrict_to_ball(diagram: &Diagram, ball: &Ellipsoid) -> Result<Diagram, DiagramError> {
    let mut points = Vec::new();
    for (i, p) in diagram.points.iter().enumerate() {
        if p.is_essential() {
            continue;
        }
        let (Some(b), Some(d)) = (p.birth_cell, p.death_cell) else {
            return Err(DiagramError::MissingAnchors(i));
        };
        if ball.contains(b) && ball.contains(d) {
            points.push(p.clone());
        }
    }
    Ok(diagram.with_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(degree: u8, birth: f64, death: f64) -> PersistencePoint {
        PersistencePoint { degree, birth, death, birth_cell: Some([0, 0, 0]), death_cell: Some([0, 0, 0]) }
    }

    #[test]
    fn quadrant_examples() {
        let q = quadrant_of(&pt(0, -3.0, -1.0)).unwrap();
        assert_eq!((q.quadrant, q.sizes, q.weight), (Quadrant::PH0SW, [3.0, 1.0], 2.0));
        let q = quadrant_of(&pt(1, -1.0, 2.0)).unwrap();
        assert_eq!((q.quadrant, q.sizes, q.weight), (Quadrant::PH1NW, [1.0, 2.0], 3.0));
        let q = quadrant_of(&pt(2, 1.0, 3.0)).unwrap();
        assert_eq!((q.quadrant, q.sizes, q.weight), (Quadrant::PH2NE, [1.0, 3.0], 2.0));
        assert_eq!(quadrant_of(&pt(0, -3.0, 2.0)).unwrap().quadrant, Quadrant::PH0NW);
        assert_eq!(quadrant_of(&pt(1, -3.0, -2.0)).unwrap().quadrant, Quadrant::PH1SW);
        assert_eq!(quadrant_of(&pt(1, 1.0, 2.0)).unwrap().quadrant, Quadrant::PH1NE);
        assert_eq!(quadrant_of(&pt(2, -1.0, 2.0)).unwrap().quadrant, Quadrant::PH2NW);
    }

    #[test]
    fn quadrant_errors() {
        assert_eq!(quadrant_of(&pt(0, -1.0, f64::INFINITY)), Err(DiagramError::EssentialPoint));
        assert_eq!(quadrant_of(&pt(1, 0.0, 2.0)), Err(DiagramError::ZeroBoundary));
        assert!(matches!(
            quadrant_of(&pt(2, -3.0, -1.0)),
            Err(DiagramError::ImpossibleQuadrant { degree: 2, .. })
        ));
        assert!(matches!(quadrant_of(&pt(0, 1.0, 2.0)), Err(DiagramError::ImpossibleQuadrant { .. })));
    }

    #[test]
    fn aspect_ratios() {
        let und = QuadrantPoint {
            degree: 0,
            quadrant: Quadrant::PH0SW,
            birth: -2.0,
            death: -2.0,
            sizes: [2.0, 2.0],
            weight: 0.0,
        };
        assert_eq!(aspect_ratio(&und, AspectKind::Undulation).unwrap(), 0.0);
        let lp = quadrant_of(&pt(1, -2.0, 4.0)).unwrap();
        assert_eq!(aspect_ratio(&lp, AspectKind::Loop).unwrap(), 2.0);
        let wav = QuadrantPoint {
            degree: 1,
            quadrant: Quadrant::PH1NE,
            birth: 3.0,
            death: 3.0,
            sizes: [3.0, 3.0],
            weight: 0.0,
        };
        assert_eq!(aspect_ratio(&wav, AspectKind::Waviness).unwrap(), 0.0);
        assert!(matches!(aspect_ratio(&lp, AspectKind::Waviness), Err(DiagramError::WrongQuadrant { .. })));
        let zero = QuadrantPoint { sizes: [0.0, 4.0], ..lp };
        assert_eq!(aspect_ratio(&zero, AspectKind::Loop), Err(DiagramError::DegenerateDenominator));
    }

    #[test]
    fn filtering() {
        let d = Diagram::new(vec![pt(1, -1.0, -0.6), pt(1, -1.0, -0.5), pt(1, -1.0, 2.0), pt(0, -4.0, f64::INFINITY)]);
        let f = filter_persistence(&d, 0.5);
        let pers: Vec<f64> = f.points.iter().map(|p| p.persistence()).collect();
        assert_eq!(pers, vec![0.5, 3.0, f64::INFINITY]);
        assert_eq!(filter_persistence(&d, 0.0), d);
        assert!(try_filter_persistence(&d, -1.0).is_err());
    }

    #[test]
    fn ball_restriction() {
        let ball = Ellipsoid { center: [10.0, 10.0, 5.0], r_xy: 4.0, r_z: 2.0 };
        let mut inside = pt(1, -1.0, 2.0);
        inside.birth_cell = Some([10, 10, 5]);
        inside.death_cell = Some([10, 10, 5]);
        let mut out = inside.clone();
        out.death_cell = Some([10, 10, 8]);
        let ess = PersistencePoint { death: f64::INFINITY, death_cell: None, ..inside.clone() };
        let d = Diagram::new(vec![inside.clone(), out, ess]);
        assert_eq!(restrict_to_ball(&d, &ball).unwrap().points, vec![inside.clone()]);
        let bare = PersistencePoint { birth_cell: None, ..inside };
        assert_eq!(restrict_to_ball(&Diagram::new(vec![bare]), &ball), Err(DiagramError::MissingAnchors(0)));
    }

    #[test]
    fn quadrant_labels_parse() {
        for q in Quadrant::ALL {
            assert_eq!(q.label().parse::<Quadrant>().unwrap(), q);
        }
        assert_eq!("ph1_nw".parse::<Quadrant>().unwrap(), Quadrant::PH1NW);
        assert!("PH3NE".parse::<Quadrant>().is_err());
    }

    proptest! {
        #[test]
        fn quadrants_exhaustive_and_sizes_roundtrip(
            degree in 0u8..3,
            b in prop_oneof![-20.0f64..-0.01, 0.01f64..20.0],
            len in 0.01f64..30.0,
        ) {
            let d = b + len;
            prop_assume!(d != 0.0);
            let p = pt(degree, b, d);
            let hits = Quadrant::ALL.iter().filter(|q| {
                q.degree() == degree && match q {
                    Quadrant::PH0SW | Quadrant::PH1SW => b < 0.0 && d < 0.0,
                    Quadrant::PH0NW | Quadrant::PH1NW | Quadrant::PH2NW => b < 0.0 && d > 0.0,
                    Quadrant::PH1NE | Quadrant::PH2NE => b > 0.0 && d > 0.0,
                }
            }).count();
            match quadrant_of(&p) {
                Ok(qp) => {
                    prop_assert_eq!(hits, 1);
                    prop_assert_eq!(QuadrantPoint::reconstruct(qp.quadrant, qp.sizes), (b, d));
                    prop_assert!(qp.weight > 0.0);
                }
                Err(DiagramError::ImpossibleQuadrant { .. }) => prop_assert_eq!(hits, 0),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }

        #[test]
        fn filter_idempotent_and_monotone(
            pers in prop::collection::vec(0.0f64..5.0, 0..40),
            t1 in 0.0f64..5.0,
            t2 in 0.0f64..5.0,
        ) {
            let d = Diagram::new(pers.iter().map(|&l| pt(1, -1.0, -1.0 + l)).collect());
            let f1 = filter_persistence(&d, t1);
            prop_assert_eq!(filter_persistence(&f1, t1), f1.clone());
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let big = filter_persistence(&d, lo);
            let small = filter_persistence(&d, hi);
            prop_assert!(small.points.iter().all(|p| big.points.contains(p)));
        }
    }
}
