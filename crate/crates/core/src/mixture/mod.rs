//! Persistence-weighted Gaussian mixture models.
//!
//! Each diagram point `y` carries its persistence `w = death − birth` and enters the
//! model through the scaled density
//!
//! ```text
//! f(y) = Σₘ αₘ Φ(y | μₘ, Σₘ / w)
//! ```
//!
//! which is proportional to `Φ(y | μₘ, Σₘ)^w`, so long-lived features pull harder on
//! the fit. Parameters are estimated by EM ([`em_fit`]), sizes are chosen by BIC
//! ([`select_size`]), phase models are averaged over bootstrap replicates
//! ([`bootstrap_fit`]) and compared through Hellinger distance or KL divergence
//! evaluated by midpoint quadrature ([`hellinger`], [`kl_divergence`]).

mod compare;
mod em;
pub mod gaussian;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{Quadrant, QuadrantPoint};

pub use compare::{
    classify, hellinger, integration_grid, kl_divergence, Classification, ClassifyOptions,
};
pub use em::{
    bic, bootstrap_fit, bootstrap_resample, e_step, em_fit, log_likelihood, m_step, select_size,
    split_half, EmOptions, FitReport, FitResult, Responsibilities, SizeSelection,
};
pub use gaussian::{gaussian_pdf, COVARIANCE_FLOOR};

#[derive(Debug, Error, PartialEq)]
pub enum MixtureError {
    #[error("covariance is not symmetric positive definite")]
    NotSpd,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("every component has zero density at point {0}")]
    NumericalUnderflow(usize),
    #[error("component {0} received no responsibility")]
    EmptyComponent(usize),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("integration grid too coarse: density mass {mass:.4} < 0.99")]
    GridTooCoarse { mass: f64 },
    #[error("quadrant {0} is excluded from classification")]
    ExcludedQuadrant(Quadrant),
    #[error("no phase models supplied")]
    NoModels,
    #[error("invalid mixture: {0}")]
    InvalidModel(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
}

impl MixtureError {
    /// Failures of the numerics, as opposed to invalid inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            MixtureError::NotSpd
                | MixtureError::NumericalUnderflow(_)
                | MixtureError::EmptyComponent(_)
                | MixtureError::GridTooCoarse { .. }
        )
    }
}

/// Morphological stage label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    O,
    I,
    II,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::O, Phase::I, Phase::II];

    pub fn label(self) -> &'static str {
        match self {
            Phase::O => "O",
            Phase::I => "I",
            Phase::II => "II",
        }
    }

    /// Default mixture size: 3 for phase O, one more for each later phase.
    pub fn default_components(self) -> usize {
        match self {
            Phase::O => 3,
            Phase::I => 4,
            Phase::II => 5,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Phase {
    type Err = MixtureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "O" | "0" | "o" => Ok(Phase::O),
            "I" | "1" | "i" => Ok(Phase::I),
            "II" | "2" | "ii" => Ok(Phase::II),
            other => Err(MixtureError::InvalidModel(format!("unknown phase {other:?}"))),
        }
    }
}

/// A data point with its persistence weight.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPoint {
    pub y: Vec<f64>,
    pub w: f64,
}

impl WeightedPoint {
    pub fn new(y: Vec<f64>, w: f64) -> Self {
        Self { y, w }
    }

    pub fn unit(y: Vec<f64>) -> Self {
        Self { y, w: 1.0 }
    }

    pub fn validate(&self) -> Result<(), MixtureError> {
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(MixtureError::InvalidPoint(format!("weight {}", self.w)));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(MixtureError::InvalidPoint(format!("coordinates {:?}", self.y)));
        }
        Ok(())
    }
}

impl From<&QuadrantPoint> for WeightedPoint {
    /// `(birth, death)` weighted by persistence.
    fn from(q: &QuadrantPoint) -> Self {
        WeightedPoint { y: vec![q.birth, q.death], w: q.weight }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub alpha: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

/// Summary of the fit that produced a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub loglik: f64,
    pub bic: f64,
    pub iters: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    #[serde(default)]
    pub quadrant: Option<Quadrant>,
    #[serde(default)]
    pub phase: Option<Phase>,
    pub components: Vec<Component>,
    #[serde(default)]
    pub fit: Option<FitInfo>,
}

impl MixtureModel {
    pub fn new(components: Vec<Component>) -> Self {
        Self { quadrant: None, phase: None, components, fit: None }
    }

    pub fn c(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mu.len())
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = Some(phase);
        self
    }

    pub fn with_quadrant(mut self, quadrant: Quadrant) -> Self {
        self.quadrant = Some(quadrant);
        self
    }

    /// Checks weights, shapes and positive definiteness.
    pub fn validate(&self) -> Result<(), MixtureError> {
        if self.components.is_empty() {
            return Err(MixtureError::InvalidModel("no components".into()));
        }
        let d = self.dim();
        let mut total = 0.0;
        for (m, c) in self.components.iter().enumerate() {
            if !(c.alpha > 0.0 && c.alpha <= 1.0) {
                return Err(MixtureError::InvalidModel(format!("alpha[{m}] = {}", c.alpha)));
            }
            if c.mu.len() != d || c.sigma.len() != d {
                return Err(MixtureError::DimensionMismatch { expected: d, got: c.mu.len() });
            }
            gaussian::cholesky(&c.sigma).ok_or(MixtureError::NotSpd)?;
            total += c.alpha;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(MixtureError::InvalidModel(format!("weights sum to {total}")));
        }
        Ok(())
    }

    pub(crate) fn prepared(&self) -> Result<Vec<gaussian::PreparedGaussian>, MixtureError> {
        self.components.iter().map(|c| gaussian::PreparedGaussian::new(&c.mu, &c.sigma)).collect()
    }

    /// Unscaled mixture density Σ αₘ Φ(x | μₘ, Σₘ).
    pub fn density(&self, x: &[f64]) -> Result<f64, MixtureError> {
        let prep = self.prepared()?;
        Ok(density_prepared(&self.components, &prep, x))
    }

    /// Draws `n` unit-weight samples.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>, MixtureError> {
        let d = self.dim();
        let chols: Vec<Vec<f64>> = self
            .components
            .iter()
            .map(|c| gaussian::cholesky(&c.sigma).ok_or(MixtureError::NotSpd))
            .collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut u = rng.random::<f64>();
            let mut m = self.c() - 1;
            for (i, c) in self.components.iter().enumerate() {
                if u < c.alpha {
                    m = i;
                    break;
                }
                u -= c.alpha;
            }
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let l = &chols[m];
            let y = (0..d)
                .map(|i| self.components[m].mu[i] + (0..=i).map(|k| l[i * d + k] * z[k]).sum::<f64>())
                .collect();
            out.push(y);
        }
        Ok(out)
    }
}

pub(crate) fn density_prepared(
    comps: &[Component],
    prep: &[gaussian::PreparedGaussian],
    x: &[f64],
) -> f64 {
    comps.iter().zip(prep).map(|(c, g)| c.alpha * g.log_pdf(x).exp()).sum()
}
