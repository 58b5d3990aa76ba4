//! Distances between mixtures and phase prediction.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use super::em::{em_fit, select_size, EmOptions};
use super::gaussian::eigenvalues;
use super::{density_prepared, MixtureError, MixtureModel, Phase, WeightedPoint};
use crate::diagram::Quadrant;
use crate::grid2::Grid2;

const MIN_RES: usize = 256;
const MAX_RES: usize = 2048;

/// A shared quadrature grid covering every component mean ± 5 times the largest
/// component standard deviation, with cells no wider than a third of the smallest one.
pub fn integration_grid(models: &[&MixtureModel]) -> Result<Grid2, MixtureError> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut s_max: f64 = 0.0;
    let mut s_min = f64::INFINITY;
    for m in models {
        if m.dim() != 2 {
            return Err(MixtureError::DimensionMismatch { expected: 2, got: m.dim() });
        }
        for k in &m.components {
            let ev = eigenvalues(&k.sigma);
            if !(ev[0] > 0.0) {
                return Err(MixtureError::NotSpd);
            }
            s_min = s_min.min(ev[0].sqrt());
            s_max = s_max.max(ev[1].sqrt());
            for i in 0..2 {
                lo[i] = lo[i].min(k.mu[i]);
                hi[i] = hi[i].max(k.mu[i]);
            }
        }
    }
    if !s_min.is_finite() {
        return Err(MixtureError::NoModels);
    }
    let h = s_min / 3.0;
    let mut res = [0; 2];
    let mut bounds = [0.0; 4];
    for i in 0..2 {
        bounds[2 * i] = lo[i] - 5.0 * s_max;
        bounds[2 * i + 1] = hi[i] + 5.0 * s_max;
        let cells = ((bounds[2 * i + 1] - bounds[2 * i]) / h).ceil();
        res[i] = if cells.is_finite() { (cells as usize).clamp(MIN_RES, MAX_RES) } else { MAX_RES };
    }
    Ok(Grid2::new(bounds, res))
}

/// Density values at the grid nodes, one row of birth values per death index.
fn evaluate(model: &MixtureModel, grid: &Grid2) -> Result<Vec<f64>, MixtureError> {
    if model.dim() != 2 {
        return Err(MixtureError::DimensionMismatch { expected: 2, got: model.dim() });
    }
    let prep = model.prepared()?;
    let [hb, hd] = grid.step();
    let [b0, _, d0, _] = grid.bounds;
    let [nb, nd] = grid.resolution;
    let mut out = vec![0.0; nb * nd];
    out.par_chunks_mut(nb).enumerate().for_each(|(j, row)| {
        let y = d0 + (j as f64 + 0.5) * hd;
        for (i, v) in row.iter_mut().enumerate() {
            *v = density_prepared(&model.components, &prep, &[b0 + (i as f64 + 0.5) * hb, y]);
        }
    });
    Ok(out)
}

fn checked(model: &MixtureModel, grid: &Grid2) -> Result<Vec<f64>, MixtureError> {
    if !grid.is_valid() || grid.is_empty() {
        return Err(MixtureError::InvalidModel(format!("bad grid {grid:?}")));
    }
    let v = evaluate(model, grid)?;
    let mass = v.iter().sum::<f64>() * grid.cell_area();
    if mass < 0.99 {
        return Err(MixtureError::GridTooCoarse { mass });
    }
    Ok(v)
}

/// Hellinger distance √(½ ∫ (√f − √g)²) by midpoint quadrature, clamped to [0, 1].
pub fn hellinger(f: &MixtureModel, g: &MixtureModel, grid: &Grid2) -> Result<f64, MixtureError> {
    let fv = checked(f, grid)?;
    let gv = checked(g, grid)?;
    let s: f64 = fv.iter().zip(&gv).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok((0.5 * s * grid.cell_area()).clamp(0.0, 1.0).sqrt())
}

/// KL(f ‖ g) = ∫ f ln(f / g) by midpoint quadrature, with g floored at 1e-300.
pub fn kl_divergence(f: &MixtureModel, g: &MixtureModel, grid: &Grid2) -> Result<f64, MixtureError> {
    let fv = checked(f, grid)?;
    let gv = checked(g, grid)?;
    let s: f64 = fv
        .iter()
        .zip(&gv)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b.max(1e-300)).ln())
        .sum();
    Ok(s * grid.cell_area())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyOptions {
    /// Fixed size of the sample mixture; BIC over `c_range` when `None`.
    pub c_sample: Option<usize>,
    pub c_range: RangeInclusive<usize>,
    pub seed: u64,
    pub em: EmOptions,
    /// Quadrant the sample points come from, if known.
    pub quadrant: Option<Quadrant>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { c_sample: None, c_range: 2..=6, seed: 0, em: EmOptions::default(), quadrant: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub phase: Phase,
    /// Hellinger distance from the sample mixture to each phase model.
    pub distances: BTreeMap<Phase, f64>,
    pub sample_model: MixtureModel,
}

/// Fits a mixture to the sample and returns the phase whose model is nearest in
/// Hellinger distance; ties go to the earlier phase.
pub fn classify(
    sample_points: &[WeightedPoint],
    phase_models: &BTreeMap<Phase, MixtureModel>,
    opts: &ClassifyOptions,
) -> Result<Classification, MixtureError> {
    if phase_models.is_empty() {
        return Err(MixtureError::NoModels);
    }
    let excluded = opts
        .quadrant
        .into_iter()
        .chain(phase_models.values().filter_map(|m| m.quadrant))
        .find(|q| q.excluded_from_classification());
    if let Some(q) = excluded {
        return Err(MixtureError::ExcludedQuadrant(q));
    }
    let sample_model = match opts.c_sample {
        Some(c) => em_fit(sample_points, c, opts.seed, opts.em)?.model,
        None => {
            let sel = select_size(sample_points, opts.c_range.clone(), opts.seed, opts.em)?;
            sel.best_fit().model.clone()
        }
    };
    let mut all: Vec<&MixtureModel> = phase_models.values().collect();
    all.push(&sample_model);
    let grid = integration_grid(&all)?;
    let mut distances = BTreeMap::new();
    for (&phase, model) in phase_models {
        distances.insert(phase, hellinger(&sample_model, model, &grid)?);
    }
    let phase = distances
        .iter()
        .fold(None::<(Phase, f64)>, |acc, (&p, &d)| match acc {
            Some((_, best)) if best <= d => acc,
            _ => Some((p, d)),
        })
        .unwrap()
        .0;
    Ok(Classification { phase, distances, sample_model })
}
