//! One function per subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sdph::cubical::{self, Diagram};
use sdph::diagram::{filter_persistence, quadrant_points, Quadrant, QuadrantPoint};
use sdph::io::{self, EvalRow, LabelRow, Meta, SampleFeatures};
use sdph::mixture::{self, ClassifyOptions, MixtureModel, Phase, WeightedPoint};
use sdph::phantom::{self, Axis, PhantomClass, PhantomSpec};
use sdph::stats::derive_seed;
use sdph::texture_global as global;
use sdph::texture_local::{self as local, cluster_clara, cluster_gmm, kmeans};
use sdph::{sdt, ScalarField};

use crate::{reproduce, CliError, Command, PhantomKind, PipelineConfig};

pub fn dispatch(cmd: &Command, cfg: &PipelineConfig) -> Result<Value, CliError> {
    match cmd {
        Command::Phantom { kind, class, dims, center, radius, ring_radius, tube_radius, axis, out } => {
            let dims = triple(dims.as_deref(), cfg.phantom_dims, "dims")?;
            cmd_phantom(cfg, *kind, class, dims, center.as_deref(), [*radius, *ring_radius, *tube_radius], axis, out)
        }
        Command::Sdt { input, out } => cmd_sdt(cfg, input, out),
        Command::Ph { input, out, id } => cmd_ph(cfg, input, out, id.as_deref()),
        Command::Quadrant { input, out } => cmd_quadrant(cfg, input, out),
        Command::Features { input, out } => cmd_features(cfg, input, out),
        Command::Cluster { input, out, compositions, embedding } => {
            cmd_cluster(cfg, input, out, compositions.as_deref(), embedding.as_deref())
        }
        Command::Kde { input, out_dir, pgm } => cmd_kde(cfg, input, out_dir, *pgm),
        Command::Tree { input, out, cut } => cmd_tree(cfg, input, out, *cut),
        Command::Fit { input, phase, components, out } => cmd_fit(cfg, input, *phase, *components, out),
        Command::Classify { input, model, truth, out } => cmd_classify(cfg, input, model, *truth, out),
        Command::Evaluate { input, out } => cmd_evaluate(input, out),
        Command::Reproduce { out_dir } => reproduce::cmd_reproduce(cfg, out_dir),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn triple<T: Copy>(v: Option<&[T]>, default: [T; 3], what: &str) -> Result<[T; 3], CliError> {
    match v {
        None => Ok(default),
        Some(&[a, b, c]) => Ok([a, b, c]),
        Some(_) => Err(invalid(format!("--{what} needs three values"))),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Seed recorded in the input, falling back to the configured master seed.
fn provenance(path: &Path, cfg: &PipelineConfig) -> Result<Meta, CliError> {
    let mut meta = io::read_meta(path)?;
    meta.seed = meta.seed.or(Some(cfg.seed));
    Ok(meta)
}

fn sample_id(path: &Path, meta: &Meta) -> String {
    meta.source_id.clone().unwrap_or_else(|| stem(path))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn parse_axis(s: &str) -> Result<Axis, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "x" => Ok(Axis::X),
        "y" => Ok(Axis::Y),
        "z" => Ok(Axis::Z),
        _ => Err(invalid(format!("unknown axis {s:?}"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_phantom(
    cfg: &PipelineConfig,
    kind: PhantomKind,
    class: &str,
    dims: [usize; 3],
    center: Option<&[f64]>,
    [radius, ring_radius, tube_radius]: [f64; 3],
    axis: &str,
    out: &Path,
) -> Result<Value, CliError> {
    let mid = dims.map(|d| (d as f64 - 1.0) / 2.0);
    let center = triple(center, mid, "center")?;
    let (vol, detail) = match kind {
        PhantomKind::Ball => (phantom::make_ball(dims, center, radius)?, json!({ "radius": radius })),
        PhantomKind::Torus => {
            let axis = parse_axis(axis)?;
            let v = phantom::make_torus(dims, center, ring_radius, tube_radius, axis)?;
            (v, json!({ "ring_radius": ring_radius, "tube_radius": tube_radius, "axis": axis }))
        }
        PhantomKind::Vessel => {
            let class = PhantomClass::parse(class).ok_or_else(|| invalid(format!("unknown phantom class {class:?}")))?;
            let spec = PhantomSpec { dims, ..PhantomSpec::for_class(class, cfg.seed) };
            (phantom::make_vessel_network(&spec)?, json!({ "class": class.name() }))
        }
    };
    io::write_volume(out, &vol, Some(cfg.seed))?;
    Ok(json!({
        "command": "phantom",
        "out": display(out),
        "dims": dims,
        "occupied": vol.occupied_count(),
        "seed": cfg.seed,
        "shape": detail,
    }))
}

fn cmd_sdt(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<Value, CliError> {
    let vol = io::read_volume(input)?;
    let seed = io::read_seed(input)?.unwrap_or(cfg.seed);
    let field = sdt::signed_distance(&vol)?;
    io::write_field(out, &field, Some(seed))?;
    let (lo, hi) = field.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok(json!({ "command": "sdt", "out": display(out), "dims": field.dims(), "min": lo, "max": hi, "seed": seed }))
}

/// Persistence of the whole field, or the union of per-chunk diagrams when chunked.
pub fn field_persistence(field: &ScalarField, chunks: [usize; 3]) -> Result<(Diagram, bool), CliError> {
    if chunks == [1, 1, 1] {
        return Ok((cubical::persistence(field), false));
    }
    let cp = cubical::persistence_chunked(field, chunks)?;
    let mut merged = Diagram { dims: field.dims(), spacing: field.spacing(), ..Default::default() };
    for c in cp.chunks {
        merged.points.extend(c.diagram.points);
    }
    Ok((merged, cp.boundary_artifacts))
}

fn cmd_ph(cfg: &PipelineConfig, input: &Path, out: &Path, id: Option<&str>) -> Result<Value, CliError> {
    let field = io::read_field(input)?;
    let seed = io::read_seed(input)?.unwrap_or(cfg.seed);
    let (mut dgm, artifacts) = field_persistence(&field, cfg.chunks)?;
    dgm.source_id = id.map_or_else(|| stem(input), str::to_string);
    io::write_diagram(out, &dgm, Some(seed))?;
    let counts: Vec<usize> = (0..3).map(|d| dgm.degree(d).count()).collect();
    Ok(json!({
        "command": "ph",
        "out": display(out),
        "source_id": dgm.source_id,
        "points_by_degree": counts,
        "essential": dgm.essential().count(),
        "chunks": cfg.chunks,
        "boundary_artifacts": artifacts,
        "seed": seed,
    }))
}

fn cmd_quadrant(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<Value, CliError> {
    let dgm = io::read_diagram(input)?;
    let meta = provenance(input, cfg)?;
    let kept = filter_persistence(&dgm, cfg.persistence_tau);
    let points = quadrant_points(&kept);
    io::write_quadrant_points(out, &points, &meta)?;
    let mut counts = BTreeMap::new();
    for q in Quadrant::ALL {
        counts.insert(q.to_string(), points.iter().filter(|p| p.quadrant == q).count());
    }
    Ok(json!({ "command": "quadrant", "out": display(out), "tau": cfg.persistence_tau, "counts": counts }))
}

fn cmd_features(cfg: &PipelineConfig, inputs: &[PathBuf], out: &Path) -> Result<Value, CliError> {
    let mut rows = Vec::new();
    let mut per_sample = BTreeMap::new();
    for path in inputs {
        let dgm = io::read_diagram(path)?;
        let id = if dgm.source_id.is_empty() { stem(path) } else { dgm.source_id.clone() };
        let kept = filter_persistence(&dgm, cfg.persistence_tau);
        let balls = local::sample_grid(dgm.dims, cfg.grid_spacing, cfg.ball_radius_xy, cfg.ball_rz_fraction)?;
        let feats = local::local_features(&kept, &balls)?;
        per_sample.insert(id.clone(), feats.len());
        rows.extend(feats.into_iter().map(|row| SampleFeatures { sample_id: id.clone(), row }));
    }
    io::write_features(out, &rows, &Meta::seed(cfg.seed))?;
    Ok(json!({ "command": "features", "out": display(out), "rows": rows.len(), "per_sample": per_sample }))
}

fn cmd_cluster(
    cfg: &PipelineConfig,
    input: &Path,
    out: &Path,
    compositions: Option<&Path>,
    embedding: Option<&Path>,
) -> Result<Value, CliError> {
    let feats = io::read_features(input)?;
    let raw: Vec<Vec<f64>> = feats.iter().map(|f| f.row.features.to_vec()).collect();
    let rows = local::normalize(&raw)?;
    let k = cfg.n_clusters;
    let labels = match cfg.cluster_method.as_str() {
        "kmeans" => kmeans(&rows, k, cfg.seed, 300, 1e-10)?.labels,
        "gmm" => cluster_gmm(&rows, k, cfg.seed)?,
        _ => cluster_clara(&rows, k, cfg.clara_subsamples, cfg.clara_subsample_size, cfg.seed)?.labels,
    };
    let meta = Meta::seed(cfg.seed);
    let label_rows: Vec<LabelRow> = feats
        .iter()
        .zip(&labels)
        .map(|(f, &label)| LabelRow { sample_id: f.sample_id.clone(), center: f.row.center, label })
        .collect();
    io::write_labels(out, &label_rows, &meta)?;

    let mut order: Vec<&str> = Vec::new();
    let mut by_sample: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (f, &l) in feats.iter().zip(&labels) {
        if !by_sample.contains_key(f.sample_id.as_str()) {
            order.push(&f.sample_id);
        }
        by_sample.entry(&f.sample_id).or_default().push(l);
    }
    let comps = order
        .iter()
        .map(|id| local::composition(id, &by_sample[id], k))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(p) = compositions {
        io::write_atomic(p, io::encode_compositions(&comps, &meta)?.as_bytes())?;
    }
    let mut explained = Value::Null;
    if let Some(p) = embedding {
        let pca = local::pca2(&comps.iter().map(|c| c.percentages.clone()).collect::<Vec<_>>())?;
        let ids: Vec<String> = comps.iter().map(|c| c.sample_id.clone()).collect();
        io::write_atomic(p, io::encode_embedding(&ids, &pca.embedding, &meta)?.as_bytes())?;
        explained = json!(pca.explained_variance);
    }
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    Ok(json!({
        "command": "cluster",
        "out": display(out),
        "method": cfg.cluster_method,
        "cluster_sizes": sizes,
        "compositions": comps.iter().map(|c| (c.sample_id.clone(), c.percentages.clone())).collect::<BTreeMap<_, _>>(),
        "explained_variance": explained,
    }))
}

fn quadrant_pairs(points: &[QuadrantPoint], q: Quadrant) -> Vec<([f64; 2], f64)> {
    points.iter().filter(|p| p.quadrant == q).map(|p| ([p.birth, p.death], p.weight)).collect()
}

fn cmd_kde(cfg: &PipelineConfig, inputs: &[PathBuf], out_dir: &Path, pgm: bool) -> Result<Value, CliError> {
    let q = cfg.quadrant()?;
    let mut samples = Vec::new();
    for path in inputs {
        let meta = provenance(path, cfg)?;
        let pairs = quadrant_pairs(&io::read_quadrant_points(path)?, q);
        if pairs.is_empty() {
            return Err(invalid(format!("{}: no {q} points", display(path))));
        }
        samples.push((sample_id(path, &meta), meta, pairs));
    }
    let res = cfg.kde_resolution;
    let grid = global::shared_grid(samples.iter().map(|s| s.2.as_slice()), cfg.kde_sigma, [res, res])?;
    std::fs::create_dir_all(out_dir).map_err(|e| invalid(format!("{}: {e}", display(out_dir))))?;
    let mut written = Vec::new();
    for (id, meta, pairs) in &samples {
        let dens = global::kde(pairs, &grid, cfg.kde_sigma)?;
        let path = out_dir.join(format!("{id}.density.csv"));
        let meta = Meta { source_id: Some(id.clone()), ..meta.clone() };
        io::write_density(&path, &dens, &meta)?;
        if pgm {
            io::write_atomic(&out_dir.join(format!("{id}.pgm")), &global::to_pgm(&dens))?;
        }
        written.push(display(&path));
    }
    Ok(json!({ "command": "kde", "quadrant": q.to_string(), "grid": grid, "outputs": written }))
}

fn cmd_tree(cfg: &PipelineConfig, inputs: &[PathBuf], out: &Path, cut: Option<f64>) -> Result<Value, CliError> {
    let mut labels = Vec::new();
    let mut grids = Vec::new();
    for path in inputs {
        let meta = provenance(path, cfg)?;
        labels.push(sample_id(path, &meta).trim_end_matches(".density").to_string());
        grids.push(io::read_density(path)?);
    }
    let dist = global::distance_matrix(&grids)?;
    let tree = global::upgma(&dist, &labels)?;
    io::write_atomic(out, format!("{}\n", tree.to_newick()).as_bytes())?;
    let clusters = cut.map(|h| tree.cut(h));
    Ok(json!({
        "command": "tree",
        "out": display(out),
        "labels": labels,
        "merge_heights": tree.merges.iter().map(|m| m.height).collect::<Vec<_>>(),
        "clusters": clusters,
    }))
}

/// `(birth, death)` points of quadrant `q`, weighted by persistence.
pub fn weighted_points(points: &[QuadrantPoint], q: Quadrant) -> Vec<WeightedPoint> {
    points.iter().filter(|p| p.quadrant == q).map(WeightedPoint::from).collect()
}

fn cmd_fit(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    phase: Phase,
    components: Option<usize>,
    out: &Path,
) -> Result<Value, CliError> {
    let q = cfg.classification_quadrant()?;
    let mut pool = Vec::new();
    for path in inputs {
        pool.extend(weighted_points(&io::read_quadrant_points(path)?, q));
    }
    let c = components.unwrap_or_else(|| cfg.phase_size(phase));
    let model = mixture::bootstrap_fit(&pool, c, cfg.bootstrap, cfg.seed, cfg.em())?.with_phase(phase).with_quadrant(q);
    io::write_model(out, &model)?;
    let fit = model.fit.as_ref();
    Ok(json!({
        "command": "fit",
        "out": display(out),
        "phase": phase.to_string(),
        "quadrant": q.to_string(),
        "points": pool.len(),
        "components": c,
        "bootstrap": cfg.bootstrap,
        "loglik": fit.map(|f| f.loglik),
        "bic": fit.map(|f| f.bic),
    }))
}

pub fn classify_options(cfg: &PipelineConfig, q: Quadrant, seed: u64) -> ClassifyOptions {
    ClassifyOptions {
        c_sample: None,
        c_range: cfg.sample_components[0]..=cfg.sample_components[1],
        seed,
        em: cfg.em(),
        quadrant: Some(q),
    }
}

fn cmd_classify(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    model_paths: &[PathBuf],
    truth: Option<Phase>,
    out: &Path,
) -> Result<Value, CliError> {
    let q = cfg.classification_quadrant()?;
    let mut models: BTreeMap<Phase, MixtureModel> = BTreeMap::new();
    for path in model_paths {
        let m = io::read_model(path)?;
        let phase = m.phase.ok_or_else(|| invalid(format!("{}: model has no phase", display(path))))?;
        if models.insert(phase, m).is_some() {
            return Err(invalid(format!("{}: second model for phase {phase}", display(path))));
        }
    }
    let mut rows = Vec::new();
    for (i, path) in inputs.iter().enumerate() {
        let meta = provenance(path, cfg)?;
        let points = weighted_points(&io::read_quadrant_points(path)?, q);
        let opts = classify_options(cfg, q, derive_seed(cfg.seed, i as u64));
        let c = mixture::classify(&points, &models, &opts)?;
        rows.push(EvalRow { sample: sample_id(path, &meta), phase: truth, distances: c.distances, predicted: c.phase });
    }
    io::write_evaluation(out, &rows, &Meta::seed(cfg.seed))?;
    Ok(json!({
        "command": "classify",
        "out": display(out),
        "predictions": rows.iter().map(|r| (r.sample.clone(), r.predicted.to_string())).collect::<BTreeMap<_, _>>(),
    }))
}

/// Accuracy and confusion counts (`confusion[truth][predicted]`) of labelled rows.
pub fn evaluate_rows(rows: &[EvalRow]) -> Result<Value, CliError> {
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut correct = 0;
    for r in rows {
        let t = r.phase.ok_or_else(|| invalid(format!("sample {} has no true phase", r.sample)))?;
        correct += (t == r.predicted) as usize;
        *confusion.entry(t.to_string()).or_default().entry(r.predicted.to_string()).or_default() += 1;
    }
    if rows.is_empty() {
        return Err(invalid("no evaluation rows"));
    }
    Ok(json!({
        "samples": rows.len(),
        "correct": correct,
        "accuracy": correct as f64 / rows.len() as f64,
        "confusion": confusion,
    }))
}

fn cmd_evaluate(inputs: &[PathBuf], out: &Path) -> Result<Value, CliError> {
    let mut rows = Vec::new();
    for path in inputs {
        rows.extend(io::read_evaluation(path)?);
    }
    let report = evaluate_rows(&rows)?;
    io::write_atomic(out, format!("{}\n", serde_json::to_string_pretty(&report).unwrap()).as_bytes())?;
    Ok(json!({ "command": "evaluate", "out": display(out), "accuracy": report["accuracy"], "samples": rows.len() }))
}
