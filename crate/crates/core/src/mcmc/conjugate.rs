//! Closed-form conditional updates for the MGH-t covariance hierarchy.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Wishart draw with `df` degrees of freedom and scale matrix `scale` via the
/// Bartlett decomposition; the mean is `df·scale`.
pub fn sample_wishart<R: Rng + ?Sized>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if !(df > d as f64 - 1.0) {
        return Err(Error::InvalidParams(format!("Wishart df {df} too small for dimension {d}")));
    }
    let l = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidState("Wishart scale is not positive definite".into()))?
        .l();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::InvalidParams(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = l * a;
    let w = &la * la.transpose();
    Ok((&w + w.transpose()) * 0.5)
}

/// `Ω | b, Ψ ~ Wishart(ν + d − 1 + N, (2νΨ + Σ b bᵀ)⁻¹)`.
pub fn sample_omega<R: Rng + ?Sized>(
    nu: f64,
    psi_diag: &[f64],
    b: &[Vec<f64>],
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let d = psi_diag.len();
    let mut m = DMatrix::zeros(d, d);
    for k in 0..d {
        m[(k, k)] = 2.0 * nu * psi_diag[k];
    }
    for bi in b {
        for r in 0..d {
            for c in 0..d {
                m[(r, c)] += bi[r] * bi[c];
            }
        }
    }
    let scale = m
        .cholesky()
        .ok_or_else(|| Error::InvalidState("posterior Wishart matrix is not positive definite".into()))?
        .inverse();
    sample_wishart(nu + d as f64 - 1.0 + b.len() as f64, &scale, rng)
}

/// `ψ_kk | Ω ~ Gamma((ν + d)/2, rate 1/A² + ν Ω_kk)`.
pub fn sample_psi<R: Rng + ?Sized>(nu: f64, a_psi: f64, omega: &DMatrix<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let d = omega.nrows();
    (0..d)
        .map(|k| {
            let rate = a_psi.powi(-2) + nu * omega[(k, k)];
            Gamma::new(0.5 * (nu + d as f64), 1.0 / rate)
                .map(|g| g.sample(rng))
                .map_err(|e| Error::InvalidParams(e.to_string()))
        })
        .collect()
}
