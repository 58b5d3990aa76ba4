//! Pipeline configuration: a flat `key = value` TOML file plus `--set key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sdph::{Phase, Quadrant};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    /// Points with persistence below this are dropped before analysis.
    pub persistence_tau: f64,
    pub kde_sigma: f64,
    /// KDE grid cells per axis.
    pub kde_resolution: usize,
    pub grid_spacing: usize,
    pub ball_radius_xy: f64,
    /// Vertical ellipsoid radius as a fraction of the sample thickness.
    pub ball_rz_fraction: f64,
    /// Chunk grid for persistence; `[1, 1, 1]` processes the field whole.
    pub chunks: [usize; 3],
    pub n_clusters: usize,
    /// One of `kmeans`, `gmm`, `clara`.
    pub cluster_method: String,
    pub clara_subsamples: usize,
    pub clara_subsample_size: usize,
    /// Mixture sizes for phases O, I, II.
    pub phase_sizes: [usize; 3],
    pub bootstrap: usize,
    /// Size range searched by BIC for per-sample mixtures.
    pub sample_components: [usize; 2],
    /// Eigenvalue floor for every fitted covariance.
    pub cov_floor: f64,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub quadrant: String,
    /// Phantoms generated per class by `reproduce`.
    pub phantoms_per_class: usize,
    pub phantom_dims: [usize; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            persistence_tau: 0.5,
            kde_sigma: 0.5,
            kde_resolution: 128,
            grid_spacing: 5,
            ball_radius_xy: 40.0,
            ball_rz_fraction: 0.2,
            chunks: [1, 1, 1],
            n_clusters: 3,
            cluster_method: "kmeans".into(),
            clara_subsamples: 5,
            clara_subsample_size: 100,
            phase_sizes: [3, 4, 5],
            bootstrap: 50,
            sample_components: [2, 6],
            cov_floor: 0.01,
            em_tol: 1e-6,
            em_max_iter: 500,
            quadrant: "PH1NW".into(),
            phantoms_per_class: 10,
            phantom_dims: [64, 64, 64],
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.to_string(), message: message.into() }
}

impl PipelineConfig {
    /// Reads `path` (if any), applies `overrides` in order, and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| bad("<file>", format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| bad(o, "override must look like key=value"))?;
            let (k, v) = (k.trim(), v.trim());
            let value = format!("{k} = {v}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove(k))
                .unwrap_or_else(|| toml::Value::String(v.to_string()));
            table.insert(k.to_string(), value);
        }
        for (k, v) in &table {
            let mut single = toml::Table::new();
            single.insert(k.clone(), v.clone());
            if let Err(e) = single.try_into::<PipelineConfig>() {
                return Err(bad(k, e.message().to_string()));
            }
        }
        let cfg: PipelineConfig = table.try_into().map_err(|e: toml::de::Error| bad("<config>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let pos = |key: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(bad(key, format!("must be positive, got {v}"))) };
        let nz = |key: &str, v: usize| if v > 0 { Ok(()) } else { Err(bad(key, "must be positive")) };
        if !(self.persistence_tau >= 0.0) {
            return Err(bad("persistence_tau", "must be non-negative"));
        }
        pos("kde_sigma", self.kde_sigma)?;
        pos("ball_radius_xy", self.ball_radius_xy)?;
        pos("ball_rz_fraction", self.ball_rz_fraction)?;
        pos("cov_floor", self.cov_floor)?;
        if self.cov_floor < sdph::mixture::COVARIANCE_FLOOR {
            return Err(bad("cov_floor", format!("must be at least {}", sdph::mixture::COVARIANCE_FLOOR)));
        }
        pos("em_tol", self.em_tol)?;
        nz("kde_resolution", self.kde_resolution.saturating_sub(1))?;
        nz("grid_spacing", self.grid_spacing)?;
        nz("n_clusters", self.n_clusters)?;
        nz("clara_subsamples", self.clara_subsamples)?;
        nz("clara_subsample_size", self.clara_subsample_size)?;
        nz("bootstrap", self.bootstrap)?;
        nz("em_max_iter", self.em_max_iter)?;
        nz("phantoms_per_class", self.phantoms_per_class)?;
        for v in self.chunks {
            nz("chunks", v)?;
        }
        for v in self.phase_sizes {
            nz("phase_sizes", v)?;
        }
        for v in self.phantom_dims {
            nz("phantom_dims", v)?;
        }
        let [lo, hi] = self.sample_components;
        if lo == 0 || lo > hi {
            return Err(bad("sample_components", format!("need 1 <= lo <= hi, got [{lo}, {hi}]")));
        }
        if !["kmeans", "gmm", "clara"].contains(&self.cluster_method.as_str()) {
            return Err(bad("cluster_method", format!("unknown method {:?}", self.cluster_method)));
        }
        self.quadrant()?;
        Ok(())
    }

    pub fn quadrant(&self) -> Result<Quadrant, CliError> {
        self.quadrant.parse().map_err(|_| bad("quadrant", format!("unknown quadrant {:?}", self.quadrant)))
    }

    /// The configured quadrant, rejected if it is excluded from classification.
    pub fn classification_quadrant(&self) -> Result<Quadrant, CliError> {
        let q = self.quadrant()?;
        if q.excluded_from_classification() {
            return Err(bad("quadrant", format!("{q} is excluded from classification")));
        }
        Ok(q)
    }

    pub fn phase_size(&self, phase: Phase) -> usize {
        self.phase_sizes[phase as usize]
    }

    pub fn em(&self) -> sdph::mixture::EmOptions {
        sdph::mixture::EmOptions { tol: self.em_tol, max_iter: self.em_max_iter, floor: self.cov_floor }
    }
}
