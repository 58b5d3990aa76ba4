//! Local texture analysis: diagrams restricted to a lattice of ellipsoids, summarized
//! by fifteen critical-size statistics, then normalized and clustered.

mod cluster;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cubical::Diagram;
use crate::diagram::{aspect_ratio, quadrant_points, restrict_to_ball, AspectKind, DiagramError, Ellipsoid, Quadrant};
use crate::stats::{mean_std, variance};
use crate::volume::Dims;

pub use cluster::{cluster_clara, cluster_gmm, kmeans, pam, ClaraResult, KMeansResult, PamResult};

pub const N_FEATURES: usize = 15;

/// Column names in output order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "r0_mean", "r0_std", "r1_mean", "r1_std", "g2_mean", "g2_std", "g3_mean", "g3_std",
    "undulation_mean", "undulation_std", "loop_mean", "loop_std", "waviness_mean", "waviness_std",
    "r1g2_std",
];

#[derive(Debug, Error, PartialEq)]
pub enum TextureError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("invalid cluster count k = {k} for {n} rows")]
    InvalidK { k: usize, n: usize },
    #[error("rows have inconsistent lengths")]
    RaggedRows,
    #[error("invalid sampling parameters: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Mixture(#[from] crate::mixture::MixtureError),
}

pub type FeatureVector = [f64; N_FEATURES];

/// Ellipsoids centered on the lattice `i·spacing` inside `dims`, in (z, y, x) order.
pub fn sample_grid(dims: Dims, spacing: usize, r_xy: f64, rz_fraction: f64) -> Result<Vec<Ellipsoid>, TextureError> {
    if spacing == 0 || dims.contains(&0) {
        return Err(TextureError::InvalidGrid(format!("spacing {spacing}, dims {dims:?}")));
    }
    if !(r_xy > 0.0) || !(rz_fraction > 0.0) {
        return Err(TextureError::InvalidGrid(format!("radii {r_xy}, {rz_fraction}")));
    }
    let r_z = rz_fraction * dims[2] as f64;
    let mut out = Vec::new();
    for z in (0..dims[2]).step_by(spacing) {
        for y in (0..dims[1]).step_by(spacing) {
            for x in (0..dims[0]).step_by(spacing) {
                out.push(Ellipsoid { center: [x as f64, y as f64, z as f64], r_xy, r_z });
            }
        }
    }
    Ok(out)
}

fn push_stats(out: &mut Vec<f64>, xs: &[f64]) {
    let (m, s) = mean_std(xs).unwrap_or((0.0, 0.0));
    out.push(m);
    out.push(s);
}

/// The fifteen local texture features of a persistence-filtered diagram.
///
/// Sizes are pooled from every quadrant in which they appear: r₀ from PH0 births,
/// r₁ from PH0 SW deaths and PH1 SW/NW births, g₂ from PH1 NW/NE deaths and PH2 NE
/// births, g₃ from PH2 NE deaths. Ratios come from their own quadrants. Empty
/// categories contribute 0.
pub fn features15(local: &Diagram) -> FeatureVector {
    let qps = quadrant_points(local);
    let mut r0 = Vec::new();
    let mut r1 = Vec::new();
    let mut g2 = Vec::new();
    let mut g3 = Vec::new();
    let mut und = Vec::new();
    let mut lp = Vec::new();
    let mut wav = Vec::new();
    let mut r1_nw = Vec::new();
    let mut g2_nw = Vec::new();
    for q in &qps {
        let [s0, s1] = q.sizes;
        match q.quadrant {
            Quadrant::PH0SW => {
                r0.push(s0);
                r1.push(s1);
            }
            Quadrant::PH0NW => r0.push(s0),
            Quadrant::PH1SW => r1.push(s0),
            Quadrant::PH1NW => {
                r1.push(s0);
                g2.push(s1);
                r1_nw.push(s0);
                g2_nw.push(s1);
            }
            Quadrant::PH1NE => g2.push(s1),
            Quadrant::PH2NW => {}
            Quadrant::PH2NE => {
                g2.push(s0);
                g3.push(s1);
            }
        }
        let kind = match q.quadrant {
            Quadrant::PH0SW => Some((AspectKind::Undulation, &mut und)),
            Quadrant::PH1NW => Some((AspectKind::Loop, &mut lp)),
            Quadrant::PH1NE => Some((AspectKind::Waviness, &mut wav)),
            _ => None,
        };
        if let Some((kind, dst)) = kind {
            if let Ok(v) = aspect_ratio(q, kind) {
                dst.push(v);
            }
        }
    }
    let mut out = Vec::with_capacity(N_FEATURES);
    for xs in [&r0, &r1, &g2, &g3, &und, &lp, &wav] {
        push_stats(&mut out, xs);
    }
    out.push((variance(&r1_nw) + variance(&g2_nw)).sqrt());
    out.try_into().unwrap()
}

/// One sampled ellipsoid and its feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub center: [f64; 3],
    pub features: FeatureVector,
}

/// Restricts `diagram` to each ellipsoid and extracts its features, in parallel.
pub fn local_features(diagram: &Diagram, balls: &[Ellipsoid]) -> Result<Vec<FeatureRow>, TextureError> {
    balls
        .par_iter()
        .map(|b| {
            let local = restrict_to_ball(diagram, b)?;
            Ok(FeatureRow { center: b.center, features: features15(&local) })
        })
        .collect()
}

fn check_rows(rows: &[Vec<f64>], needed: usize) -> Result<usize, TextureError> {
    if rows.len() < needed {
        return Err(TextureError::TooFewRows { needed, got: rows.len() });
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(TextureError::RaggedRows);
    }
    Ok(d)
}

/// Per-column z-scores with population standard deviation; constant columns become 0.
pub fn normalize(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, TextureError> {
    let d = check_rows(rows, 2)?;
    let stats: Vec<(f64, f64)> = (0..d)
        .map(|j| mean_std(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()).unwrap())
        .collect();
    Ok(rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&stats)
                .map(|(&x, &(m, s))| if s > 0.0 { (x - m) / s } else { 0.0 })
                .collect()
        })
        .collect())
}

/// Share of grid points in each of `k` clusters, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureComposition {
    pub sample_id: String,
    pub percentages: Vec<f64>,
}

pub fn composition(sample_id: &str, labels: &[usize], k: usize) -> Result<TextureComposition, TextureError> {
    if labels.is_empty() {
        return Err(TextureError::TooFewRows { needed: 1, got: 0 });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(TextureError::InvalidK { k, n: bad + 1 });
    }
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    let n = labels.len() as f64;
    Ok(TextureComposition {
        sample_id: sample_id.to_string(),
        percentages: counts.iter().map(|&c| c as f64 * 100.0 / n).collect(),
    })
}

/// Two-dimensional principal component projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca2 {
    pub embedding: Vec<[f64; 2]>,
    /// Unit loading vectors of the first two components.
    pub components: [Vec<f64>; 2],
    /// Sample variance along each component.
    pub explained_variance: [f64; 2],
    pub mean: Vec<f64>,
}

/// Projects mean-centered rows onto the top two eigenvectors of their sample covariance.
/// Each loading vector is signed so that its first nonzero entry is positive.
pub fn pca2(rows: &[Vec<f64>]) -> Result<Pca2, TextureError> {
    let d = check_rows(rows, 3)?;
    if d < 2 {
        return Err(TextureError::InvalidGrid(format!("pca2 needs at least 2 columns, got {d}")));
    }
    let n = rows.len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let pick = |k: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        v
    };
    let components = [pick(0), pick(1)];
    let explained_variance = [eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]].max(0.0)];
    let embedding = (0..n)
        .map(|i| {
            let p = |c: &Vec<f64>| (0..d).map(|j| x[(i, j)] * c[j]).sum::<f64>();
            [p(&components[0]), p(&components[1])]
        })
        .collect();
    Ok(Pca2 { embedding, components, explained_variance, mean })
}
