//! Multivariate normal densities with per-point covariance scaling.

use nalgebra::{DMatrix, SymmetricEigen};

use super::MixtureError;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Smallest eigenvalue a fitted covariance may have.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

/// Lower Cholesky factor of a symmetric matrix, row-major; `None` unless positive definite.
pub fn cholesky(sigma: &[Vec<f64>]) -> Option<Vec<f64>> {
    let d = sigma.len();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        if sigma[i].len() != d {
            return None;
        }
        for j in 0..=i {
            let mut s = sigma[i][j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn eigenvalues(sigma: &[Vec<f64>]) -> Vec<f64> {
    let d = sigma.len();
    let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (sigma[i][j] + sigma[j][i]));
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Symmetrizes `sigma` and raises every eigenvalue to at least `floor`.
/// Returns whether any eigenvalue had to be raised.
pub fn floor_covariance(sigma: &mut [Vec<f64>], floor: f64) -> bool {
    let d = sigma.len();
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (sigma[i][j] + sigma[j][i]);
            sigma[i][j] = v;
            sigma[j][i] = v;
        }
    }
    let m = DMatrix::from_fn(d, d, |i, j| sigma[i][j]);
    if !m.iter().all(|v| v.is_finite()) {
        for (i, row) in sigma.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { floor } else { 0.0 };
            }
        }
        return true;
    }
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&e| e >= floor) {
        return false;
    }
    // slight overshoot so the rebuilt matrix still clears the floor after rounding
    let lam = eig.eigenvalues.map(|e| e.max(floor * (1.0 + 1e-6)));
    let q = &eig.eigenvectors;
    let fixed = q * DMatrix::from_diagonal(&lam) * q.transpose();
    for i in 0..d {
        for j in 0..d {
            sigma[i][j] = 0.5 * (fixed[(i, j)] + fixed[(j, i)]);
        }
    }
    true
}

/// A Gaussian with its Cholesky factor cached for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PreparedGaussian {
    pub mu: Vec<f64>,
    chol: Vec<f64>,
    log_det: f64,
}

impl PreparedGaussian {
    pub fn new(mu: &[f64], sigma: &[Vec<f64>]) -> Result<Self, MixtureError> {
        if sigma.len() != mu.len() {
            return Err(MixtureError::DimensionMismatch { expected: mu.len(), got: sigma.len() });
        }
        let chol = cholesky(sigma).ok_or(MixtureError::NotSpd)?;
        let d = mu.len();
        let log_det = 2.0 * (0..d).map(|i| chol[i * d + i].ln()).sum::<f64>();
        Ok(Self { mu: mu.to_vec(), chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Squared Mahalanobis distance (y − μ)ᵀ Σ⁻¹ (y − μ).
    pub fn mahalanobis_sq(&self, y: &[f64]) -> f64 {
        let d = self.dim();
        // forward substitution L z = y − μ, small fixed buffer for the common cases
        let mut buf = [0.0f64; 16];
        let mut heap;
        let z: &mut [f64] = if d <= 16 {
            &mut buf[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let mut s = y[i] - self.mu[i];
            for k in 0..i {
                s -= self.chol[i * d + k] * z[k];
            }
            z[i] = s / self.chol[i * d + i];
            q += z[i] * z[i];
        }
        q
    }

    /// log Φ(y | μ, Σ / w).
    pub fn log_pdf_scaled(&self, y: &[f64], w: f64) -> f64 {
        let d = self.dim() as f64;
        -0.5 * d * LN_2PI - 0.5 * (self.log_det - d * w.ln()) - 0.5 * w * self.mahalanobis_sq(y)
    }

    pub fn log_pdf(&self, y: &[f64]) -> f64 {
        self.log_pdf_scaled(y, 1.0)
    }
}

/// Multivariate normal density Φ(y | μ, Σ).
pub fn gaussian_pdf(y: &[f64], mu: &[f64], sigma: &[Vec<f64>]) -> Result<f64, MixtureError> {
    if y.len() != mu.len() {
        return Err(MixtureError::DimensionMismatch { expected: mu.len(), got: y.len() });
    }
    Ok(PreparedGaussian::new(mu, sigma)?.log_pdf(y).exp())
}
