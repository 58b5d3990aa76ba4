//! Synthetic staging study: one phantom class per phase, models trained on half of each
//! phantom's points and evaluated on the other half.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sdph::diagram::{filter_persistence, quadrant_points};
use sdph::io::{self, EvalRow, Meta};
use sdph::mixture::{self, MixtureModel, Phase, WeightedPoint};
use sdph::phantom::{self, PhantomClass, PhantomSpec};
use sdph::sdt;
use sdph::stats::derive_seed;

use crate::commands::{classify_options, evaluate_rows, field_persistence, weighted_points};
use crate::{CliError, PipelineConfig};

/// Phantom class standing in for each phase.
pub const CLASS_OF_PHASE: [(Phase, PhantomClass); 3] = [
    (Phase::O, PhantomClass::ThickSparse),
    (Phase::I, PhantomClass::ThinDense),
    (Phase::II, PhantomClass::ThinDilated),
];

const TRAIN_STREAM: u64 = 1 << 32;
const TEST_STREAM: u64 = 2 << 32;

#[derive(Clone, Debug, Serialize)]
pub struct PhantomSummary {
    pub sample: String,
    pub phase: Phase,
    pub seed: u64,
    pub train_points: usize,
    pub test_points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproduceReport {
    pub seed: u64,
    pub quadrant: String,
    pub phantoms: Vec<PhantomSummary>,
    pub evaluation: Value,
    pub accuracy: f64,
}

struct Prepared {
    summary: PhantomSummary,
    train: Vec<WeightedPoint>,
    test: Vec<WeightedPoint>,
}

fn prepare(cfg: &PipelineConfig, phase: Phase, class: PhantomClass, index: usize) -> Result<Prepared, CliError> {
    let q = cfg.classification_quadrant()?;
    let ci = phase as usize;
    let seed = derive_seed(cfg.seed, (ci * cfg.phantoms_per_class + index) as u64);
    let spec = PhantomSpec { dims: cfg.phantom_dims, ..PhantomSpec::for_class(class, seed) };
    let vol = phantom::make_vessel_network(&spec)?;
    let field = sdt::signed_distance(&vol)?;
    let (dgm, _) = field_persistence(&field, cfg.chunks)?;
    let points = weighted_points(&quadrant_points(&filter_persistence(&dgm, cfg.persistence_tau)), q);
    let (train, test) = mixture::split_half(&points, derive_seed(seed, 0));
    let summary = PhantomSummary {
        sample: format!("{}-{index:02}", class.name()),
        phase,
        seed,
        train_points: train.len(),
        test_points: test.len(),
    };
    Ok(Prepared { summary, train, test })
}

/// Runs the study and returns the phase models, the evaluation rows and the report.
pub fn reproduce(cfg: &PipelineConfig) -> Result<(BTreeMap<Phase, MixtureModel>, Vec<EvalRow>, ReproduceReport), CliError> {
    let q = cfg.classification_quadrant()?;
    let jobs: Vec<(Phase, PhantomClass, usize)> = CLASS_OF_PHASE
        .iter()
        .flat_map(|&(p, c)| (0..cfg.phantoms_per_class).map(move |i| (p, c, i)))
        .collect();
    let prepared = jobs
        .par_iter()
        .map(|&(p, c, i)| prepare(cfg, p, c, i))
        .collect::<Result<Vec<_>, _>>()?;

    let mut models = BTreeMap::new();
    for (phase, _) in CLASS_OF_PHASE {
        let pool: Vec<WeightedPoint> = prepared
            .iter()
            .filter(|p| p.summary.phase == phase)
            .flat_map(|p| p.train.iter().cloned())
            .collect();
        let seed = derive_seed(cfg.seed, TRAIN_STREAM + phase as u64);
        let model = mixture::bootstrap_fit(&pool, cfg.phase_size(phase), cfg.bootstrap, seed, cfg.em())?;
        models.insert(phase, model.with_phase(phase).with_quadrant(q));
    }

    let rows = prepared
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let opts = classify_options(cfg, q, derive_seed(cfg.seed, TEST_STREAM + k as u64));
            let c = mixture::classify(&p.test, &models, &opts)?;
            Ok(EvalRow {
                sample: p.summary.sample.clone(),
                phase: Some(p.summary.phase),
                distances: c.distances,
                predicted: c.phase,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let evaluation = evaluate_rows(&rows)?;
    let report = ReproduceReport {
        seed: cfg.seed,
        quadrant: q.to_string(),
        phantoms: prepared.into_iter().map(|p| p.summary).collect(),
        accuracy: evaluation["accuracy"].as_f64().unwrap_or(0.0),
        evaluation,
    };
    Ok((models, rows, report))
}

pub fn cmd_reproduce(cfg: &PipelineConfig, out_dir: &Path) -> Result<Value, CliError> {
    let start = Instant::now();
    let (models, rows, report) = reproduce(cfg)?;
    let model_dir = out_dir.join("models");
    std::fs::create_dir_all(&model_dir).map_err(|e| CliError::Validation(format!("{}: {e}", model_dir.display())))?;
    for (phase, m) in &models {
        io::write_model(&model_dir.join(format!("phase_{phase}.json")), m)?;
    }
    io::write_evaluation(&out_dir.join("evaluation.csv"), &rows, &Meta::seed(cfg.seed))?;
    let text = serde_json::to_string_pretty(&report).unwrap();
    io::write_atomic(&out_dir.join("report.json"), format!("{text}\n").as_bytes())?;
    Ok(json!({
        "command": "reproduce",
        "out_dir": out_dir.display().to_string(),
        "samples": rows.len(),
        "accuracy": report.accuracy,
        "runtime_s": start.elapsed().as_secs_f64(),
    }))
}
