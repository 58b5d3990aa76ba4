//! Weighted EM, BIC size selection and bootstrap averaging.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gaussian::{floor_covariance, PreparedGaussian, COVARIANCE_FLOOR};
use super::{Component, FitInfo, MixtureError, MixtureModel, WeightedPoint};
use crate::stats::{derive_seed, kmeans_plus_plus, sq_dist};

/// Posterior membership probabilities, `n × c` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities {
    n: usize,
    c: usize,
    r: Vec<f64>,
}

impl Responsibilities {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn get(&self, j: usize, m: usize) -> f64 {
        self.r[j * self.c + m]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.r[j * self.c..(j + 1) * self.c]
    }

    /// Builds from explicit rows; each row must be a probability vector.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MixtureError> {
        let c = rows.first().map_or(0, Vec::len);
        let mut r = Vec::with_capacity(rows.len() * c);
        for row in rows {
            if row.len() != c {
                return Err(MixtureError::DimensionMismatch { expected: c, got: row.len() });
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(MixtureError::InvalidModel(format!("responsibility row {row:?}")));
            }
            r.extend_from_slice(row);
        }
        Ok(Self { n: rows.len(), c, r })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmOptions {
    /// Relative log-likelihood change that ends the iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Eigenvalue floor applied to every covariance after each M-step.
    pub floor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 500, floor: COVARIANCE_FLOOR }
    }
}

/// Diagnostics of one EM run.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    /// Log-likelihood at the initial parameters and after every M-step.
    pub loglik_trace: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// `(iteration, component)` for every component reinitialized after emptying.
    pub reinitialized: Vec<(usize, usize)>,
    /// Iterations whose log-likelihood fell by more than 1e-9 relative.
    pub monotone_violations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: MixtureModel,
    pub report: FitReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SizeSelection {
    pub best: usize,
    /// `(c, BIC)` for every size tried, ascending in `c`.
    pub curve: Vec<(usize, f64)>,
    pub fits: Vec<FitResult>,
}

impl SizeSelection {
    pub fn best_fit(&self) -> &FitResult {
        let i = self.curve.iter().position(|&(c, _)| c == self.best).unwrap();
        &self.fits[i]
    }
}

fn check_points(points: &[WeightedPoint], c: usize) -> Result<usize, MixtureError> {
    if points.len() < c.max(1) {
        return Err(MixtureError::TooFewPoints { needed: c.max(1), got: points.len() });
    }
    let d = points[0].y.len();
    for p in points {
        if p.y.len() != d {
            return Err(MixtureError::DimensionMismatch { expected: d, got: p.y.len() });
        }
        p.validate()?;
    }
    Ok(d)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Responsibilities together with the observed-data log-likelihood.
fn e_step_ll(
    model: &MixtureModel,
    prep: &[PreparedGaussian],
    points: &[WeightedPoint],
) -> Result<(Responsibilities, f64), MixtureError> {
    let c = model.c();
    let log_alpha: Vec<f64> = model.components.iter().map(|k| k.alpha.ln()).collect();
    let mut r = vec![0.0; points.len() * c];
    let mut ll = 0.0;
    let mut buf = vec![0.0; c];
    for (j, p) in points.iter().enumerate() {
        for m in 0..c {
            buf[m] = log_alpha[m] + prep[m].log_pdf_scaled(&p.y, p.w);
        }
        let lse = log_sum_exp(&buf);
        if !lse.is_finite() {
            return Err(MixtureError::NumericalUnderflow(j));
        }
        ll += lse;
        for m in 0..c {
            r[j * c + m] = (buf[m] - lse).exp();
        }
    }
    Ok((Responsibilities { n: points.len(), c, r }, ll))
}

/// Posterior probabilities α Φ(y | μ, Σ/w) / Σ α' Φ(y | μ', Σ'/w), computed in log space.
pub fn e_step(model: &MixtureModel, points: &[WeightedPoint]) -> Result<Responsibilities, MixtureError> {
    check_points(points, 1)?;
    if points[0].y.len() != model.dim() {
        return Err(MixtureError::DimensionMismatch { expected: model.dim(), got: points[0].y.len() });
    }
    let prep = model.prepared()?;
    Ok(e_step_ll(model, &prep, points)?.0)
}

/// Observed-data log-likelihood Σⱼ log Σₘ αₘ Φ(yⱼ | μₘ, Σₘ / wⱼ).
pub fn log_likelihood(model: &MixtureModel, points: &[WeightedPoint]) -> Result<f64, MixtureError> {
    let prep = model.prepared()?;
    let log_alpha: Vec<f64> = model.components.iter().map(|k| k.alpha.ln()).collect();
    let mut buf = vec![0.0; model.c()];
    Ok(points
        .iter()
        .map(|p| {
            for (m, g) in prep.iter().enumerate() {
                buf[m] = log_alpha[m] + g.log_pdf_scaled(&p.y, p.w);
            }
            log_sum_exp(&buf)
        })
        .sum())
}

/// Closed-form update for each component; `None` where the component is empty.
fn m_step_partial(points: &[WeightedPoint], resp: &Responsibilities, floor: f64) -> Vec<Option<Component>> {
    let n = points.len();
    let d = points[0].y.len();
    (0..resp.c)
        .map(|m| {
            let nm: f64 = (0..n).map(|j| resp.get(j, m)).sum();
            if nm < 1e-12 {
                return None;
            }
            let mut sw = 0.0;
            let mut mu = vec![0.0; d];
            for (j, p) in points.iter().enumerate() {
                let rw = resp.get(j, m) * p.w;
                sw += rw;
                for i in 0..d {
                    mu[i] += rw * p.y[i];
                }
            }
            if !(sw > 0.0) {
                return None;
            }
            mu.iter_mut().for_each(|v| *v /= sw);
            let mut sigma = vec![vec![0.0; d]; d];
            for (j, p) in points.iter().enumerate() {
                let rw = resp.get(j, m) * p.w;
                for a in 0..d {
                    let da = p.y[a] - mu[a];
                    for b in 0..=a {
                        sigma[a][b] += rw * da * (p.y[b] - mu[b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..=a {
                    sigma[a][b] /= nm;
                    sigma[b][a] = sigma[a][b];
                }
            }
            floor_covariance(&mut sigma, floor);
            Some(Component { alpha: nm / n as f64, mu, sigma })
        })
        .collect()
}

/// α = Nₘ/n, μ = Σ r w y / Σ r w, Σ = Σ r w (y−μ)(y−μ)ᵀ / Σ r, floored to eigenvalues ≥ 1e-6.
pub fn m_step(points: &[WeightedPoint], resp: &Responsibilities) -> Result<MixtureModel, MixtureError> {
    check_points(points, 1)?;
    if resp.n != points.len() {
        return Err(MixtureError::DimensionMismatch { expected: points.len(), got: resp.n });
    }
    let parts = m_step_partial(points, resp, COVARIANCE_FLOOR);
    let mut comps = Vec::with_capacity(parts.len());
    for (m, c) in parts.into_iter().enumerate() {
        comps.push(c.ok_or(MixtureError::EmptyComponent(m))?);
    }
    Ok(MixtureModel::new(comps))
}

/// Persistence-weighted covariance of the whole sample, Σ w (y−ȳ)(y−ȳ)ᵀ / n with ȳ weighted.
fn pooled_covariance(points: &[WeightedPoint], floor: f64) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = vec![vec![1.0]; points.len()];
    let resp = Responsibilities { n: points.len(), c: 1, r: rows.concat() };
    m_step_partial(points, &resp, floor).swap_remove(0).expect("nonempty sample").sigma
}

fn bic_of(ll: f64, c: usize, d: usize, n: usize) -> f64 {
    let p = (c - 1) + c * d + c * d * (d + 1) / 2;
    p as f64 * (n as f64).ln() - 2.0 * ll
}

/// `p ln n − 2 ln L` with `p = (c − 1) + c·d + c·d(d+1)/2` free parameters (6c − 1 in 2D).
pub fn bic(model: &MixtureModel, points: &[WeightedPoint]) -> Result<f64, MixtureError> {
    let ll = log_likelihood(model, points)?;
    Ok(bic_of(ll, model.c(), model.dim(), points.len()))
}

/// Fits a `c`-component weighted mixture by EM.
///
/// Means start at k-means++ seeds drawn with `seed`, weights uniform, and every
/// covariance at the weighted covariance of the whole sample. Stops when the relative
/// log-likelihood change drops below `opts.tol` or after `opts.max_iter` M-steps.
pub fn em_fit(points: &[WeightedPoint], c: usize, seed: u64, opts: EmOptions) -> Result<FitResult, MixtureError> {
    if c == 0 {
        return Err(MixtureError::InvalidModel("zero components".into()));
    }
    let d = check_points(points, c)?;
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = points.iter().map(|p| p.y.clone()).collect();
    let init = kmeans_plus_plus(&rows, c, &mut rng);
    let pooled = pooled_covariance(points, opts.floor);
    let mut model = MixtureModel::new(
        init.iter()
            .map(|&j| Component { alpha: 1.0 / c as f64, mu: rows[j].clone(), sigma: pooled.clone() })
            .collect(),
    );
    let mut prep = model.prepared()?;
    let (mut resp, mut ll) = e_step_ll(&model, &prep, points)?;
    let mut report = FitReport {
        loglik_trace: vec![ll],
        iters: 0,
        converged: false,
        reinitialized: Vec::new(),
        monotone_violations: 0,
    };
    for iter in 1..=opts.max_iter {
        let parts = m_step_partial(points, &resp, opts.floor);
        let mut reinit = false;
        let mut comps = Vec::with_capacity(c);
        for (m, part) in parts.into_iter().enumerate() {
            match part {
                Some(k) => comps.push(k),
                None => {
                    // restart the empty component at the worst-explained point
                    let worst = (0..n)
                        .min_by(|&a, &b| {
                            let ma = resp.row(a).iter().copied().fold(0.0, f64::max);
                            let mb = resp.row(b).iter().copied().fold(0.0, f64::max);
                            ma.total_cmp(&mb)
                        })
                        .unwrap();
                    comps.push(Component { alpha: 1.0 / n as f64, mu: rows[worst].clone(), sigma: pooled.clone() });
                    report.reinitialized.push((iter, m));
                    reinit = true;
                }
            }
        }
        let total: f64 = comps.iter().map(|k| k.alpha).sum();
        comps.iter_mut().for_each(|k| k.alpha /= total);
        model.components = comps;
        prep = model.prepared()?;
        let (r, ll_new) = e_step_ll(&model, &prep, points)?;
        resp = r;
        report.iters = iter;
        report.loglik_trace.push(ll_new);
        if !reinit && ll_new < ll - 1e-9 * ll.abs().max(1.0) {
            report.monotone_violations += 1;
        }
        let change = (ll_new - ll).abs();
        ll = ll_new;
        if !reinit && change <= opts.tol * ll.abs().max(f64::MIN_POSITIVE) {
            report.converged = true;
            break;
        }
    }
    model.fit = Some(FitInfo { loglik: ll, bic: bic_of(ll, c, d, n), iters: report.iters, seed });
    Ok(FitResult { model, report })
}

/// Fits every size in `c_range` (capped at the sample size) and returns the BIC minimizer,
/// ties resolved toward fewer components. Size `c` is fitted with seed `derive_seed(seed, c)`.
pub fn select_size(
    points: &[WeightedPoint],
    c_range: RangeInclusive<usize>,
    seed: u64,
    opts: EmOptions,
) -> Result<SizeSelection, MixtureError> {
    let lo = (*c_range.start()).max(1);
    let hi = (*c_range.end()).min(points.len());
    if lo > hi {
        return Err(MixtureError::TooFewPoints { needed: lo, got: points.len() });
    }
    let fits: Vec<FitResult> = (lo..=hi)
        .into_par_iter()
        .map(|c| em_fit(points, c, derive_seed(seed, c as u64), opts))
        .collect::<Result<_, _>>()?;
    let curve: Vec<(usize, f64)> =
        fits.iter().map(|f| (f.model.c(), f.model.fit.as_ref().unwrap().bic)).collect();
    let best = curve.iter().fold(curve[0], |acc, &x| if x.1 < acc.1 { x } else { acc }).0;
    Ok(SizeSelection { best, curve, fits })
}

/// A size-`n` resample with replacement.
pub fn bootstrap_resample<R: Rng>(points: &[WeightedPoint], rng: &mut R) -> Vec<WeightedPoint> {
    let n = points.len();
    (0..n).map(|_| points[rng.random_range(0..n)].clone()).collect()
}

/// Balanced random split: `⌈n/2⌉` points (in input order) go to the first half, the
/// rest to the second.
pub fn split_half(points: &[WeightedPoint], seed: u64) -> (Vec<WeightedPoint>, Vec<WeightedPoint>) {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, n.div_ceil(2)) {
        first[i] = true;
    }
    let (mut a, mut b) = (Vec::with_capacity(n.div_ceil(2)), Vec::with_capacity(n / 2));
    for (p, f) in points.iter().zip(first) {
        if f { a.push(p.clone()) } else { b.push(p.clone()) }
    }
    (a, b)
}

/// Greedy nearest-mean matching: `perm[m]` is the component of `fit` paired with
/// reference component `m`.
fn align(reference: &MixtureModel, fit: &MixtureModel) -> Vec<usize> {
    let c = reference.c();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(c * c);
    for (a, ra) in reference.components.iter().enumerate() {
        for (b, fb) in fit.components.iter().enumerate() {
            pairs.push((sq_dist(&ra.mu, &fb.mu), a, b));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut perm = vec![usize::MAX; c];
    let mut used = vec![false; c];
    for (_, a, b) in pairs {
        if perm[a] == usize::MAX && !used[b] {
            perm[a] = b;
            used[b] = true;
        }
    }
    perm
}

/// Averages `b` EM fits on bootstrap resamples.
///
/// Replicate `k` draws its resample from a generator seeded with `derive_seed(seed, k)`
/// and fits it with that same seed. Components are aligned to replicate 0 by greedy
/// nearest-mean matching before the element-wise mean of (α, μ, Σ) is taken.
pub fn bootstrap_fit(
    points: &[WeightedPoint],
    c: usize,
    b: usize,
    seed: u64,
    opts: EmOptions,
) -> Result<MixtureModel, MixtureError> {
    let d = check_points(points, c)?;
    if b == 0 {
        return Err(MixtureError::InvalidModel("zero bootstrap replicates".into()));
    }
    let fits: Vec<MixtureModel> = (0..b)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, k as u64);
            let sample = bootstrap_resample(points, &mut ChaCha8Rng::seed_from_u64(s));
            em_fit(&sample, c, s, opts).map(|f| f.model)
        })
        .collect::<Result<_, _>>()?;
    let reference = &fits[0];
    let mut acc: Vec<Component> = (0..c)
        .map(|_| Component { alpha: 0.0, mu: vec![0.0; d], sigma: vec![vec![0.0; d]; d] })
        .collect();
    for fit in &fits {
        let perm = align(reference, fit);
        for (m, &src) in perm.iter().enumerate() {
            let s = &fit.components[src];
            acc[m].alpha += s.alpha;
            for i in 0..d {
                acc[m].mu[i] += s.mu[i];
                for j in 0..d {
                    acc[m].sigma[i][j] += s.sigma[i][j];
                }
            }
        }
    }
    let bf = b as f64;
    let total: f64 = acc.iter().map(|k| k.alpha).sum();
    for k in &mut acc {
        k.alpha /= total;
        k.mu.iter_mut().for_each(|v| *v /= bf);
        k.sigma.iter_mut().flatten().for_each(|v| *v /= bf);
        floor_covariance(&mut k.sigma, opts.floor);
    }
    let mut model = MixtureModel::new(acc);
    let ll = log_likelihood(&model, points)?;
    let iters = fits.iter().map(|f| f.fit.as_ref().map_or(0, |i| i.iters)).sum();
    model.fit = Some(FitInfo { loglik: ll, bic: bic_of(ll, c, d, points.len()), iters, seed });
    Ok(model)
}
