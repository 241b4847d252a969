use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_beta, ln_gamma};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Prior hyperparameters.
///
/// `β ~ MVN(0, s_beta_sq·I)`, `σ ~ t₊(0, s_sigma, nu_sigma)`,
/// `B ~ Beta(a_gamma, b_gamma)` with `γ = L + (U − L)·B`,
/// `ψ_kk ~ Gamma(½, rate 1/a_psi²)`,
/// `Ω | Ψ ~ Wishart(nu_cov + d − 1, inverse scale 2·nu_cov·Ψ)`,
/// `α ~ Beta(a_alpha, b_alpha)`. `tau0` is the fixed scale inflation of the
/// contaminated component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub s_beta_sq: f64,
    pub s_sigma: f64,
    pub nu_sigma: f64,
    pub a_gamma: f64,
    pub b_gamma: f64,
    pub a_psi: f64,
    pub nu_cov: f64,
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub tau0: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self::baseline()
    }
}

impl PriorConfig {
    pub fn baseline() -> Self {
        Self {
            s_beta_sq: 1000.0,
            s_sigma: 10f64.sqrt(),
            nu_sigma: 3.0,
            a_gamma: 1.0,
            b_gamma: 1.0,
            a_psi: 50.0,
            nu_cov: 2.0,
            a_alpha: 1.0,
            b_alpha: 9.0,
            tau0: 10.0,
        }
    }

    /// Flatter alternative: half-Cauchy σ with scale 100 and Jeffreys Beta(½, ½)
    /// on both B and α.
    pub fn sensitivity() -> Self {
        Self {
            s_sigma: 100.0,
            nu_sigma: 1.0,
            a_gamma: 0.5,
            b_gamma: 0.5,
            a_alpha: 0.5,
            b_alpha: 0.5,
            ..Self::baseline()
        }
    }

    /// Baseline with a Uniform(0, 1) prior on α, as used for simulation fits.
    pub fn uniform_alpha() -> Self {
        Self {
            a_alpha: 1.0,
            b_alpha: 1.0,
            ..Self::baseline()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "baseline" => Ok(Self::baseline()),
            "sensitivity" => Ok(Self::sensitivity()),
            "uniform_alpha" => Ok(Self::uniform_alpha()),
            other => Err(Error::InvalidConfig(format!("unknown prior preset '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("s_beta_sq", self.s_beta_sq),
            ("s_sigma", self.s_sigma),
            ("nu_sigma", self.nu_sigma),
            ("a_gamma", self.a_gamma),
            ("b_gamma", self.b_gamma),
            ("a_psi", self.a_psi),
            ("nu_cov", self.nu_cov),
            ("a_alpha", self.a_alpha),
            ("b_alpha", self.b_alpha),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("prior {name} must be positive, got {v}")));
            }
        }
        if !(self.tau0 > 1.0) || !self.tau0.is_finite() {
            return Err(Error::InvalidConfig(format!("tau0 must exceed 1, got {}", self.tau0)));
        }
        Ok(())
    }

    pub fn log_beta(&self, beta: &[f64]) -> f64 {
        let s2 = self.s_beta_sq;
        let ss: f64 = beta.iter().map(|b| b * b).sum();
        -0.5 * beta.len() as f64 * (LN_2PI + s2.ln()) - 0.5 * ss / s2
    }

    pub fn log_sigma(&self, sigma: f64) -> f64 {
        if !(sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        let nu = self.nu_sigma;
        let x = sigma / self.s_sigma;
        std::f64::consts::LN_2 + ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (nu * std::f64::consts::PI).ln()
            - self.s_sigma.ln()
            - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
    }

    /// Density of γ implied by the Beta prior on `B = (γ − L)/(U − L)`.
    pub fn log_gamma(&self, gamma: f64, (lower, upper): (f64, f64)) -> f64 {
        if !(gamma > lower && gamma < upper) {
            return f64::NEG_INFINITY;
        }
        let width = upper - lower;
        log_beta_density((gamma - lower) / width, self.a_gamma, self.b_gamma) - width.ln()
    }

    pub fn log_alpha(&self, alpha: f64) -> f64 {
        log_beta_density(alpha, self.a_alpha, self.b_alpha)
    }

    pub fn log_psi(&self, psi: f64) -> f64 {
        if !(psi > 0.0) {
            return f64::NEG_INFINITY;
        }
        let rate = self.a_psi.powi(-2);
        0.5 * rate.ln() - ln_gamma(0.5) - 0.5 * psi.ln() - rate * psi
    }

    /// Wishart log-density of Ω given the diagonal of Ψ.
    pub fn log_omega(&self, omega: &DMatrix<f64>, psi_diag: &[f64]) -> Result<f64> {
        let d = omega.nrows();
        let df = self.nu_cov + d as f64 - 1.0;
        let log_det = log_det_spd(omega)?;
        let mut trace = 0.0;
        let mut log_det_m = 0.0;
        for k in 0..d {
            let m = 2.0 * self.nu_cov * psi_diag[k];
            trace += m * omega[(k, k)];
            log_det_m += m.ln();
        }
        Ok(0.5 * (df - d as f64 - 1.0) * log_det - 0.5 * trace + 0.5 * df * log_det_m
            - 0.5 * df * d as f64 * std::f64::consts::LN_2
            - ln_multigamma(0.5 * df, d))
    }
}

pub(crate) fn log_beta_density(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

/// ln Γ_d(x).
pub fn ln_multigamma(x: f64, d: usize) -> f64 {
    let df = d as f64;
    0.25 * df * (df - 1.0) * std::f64::consts::PI.ln()
        + (0..d).map(|j| ln_gamma(x - 0.5 * j as f64)).sum::<f64>()
}

/// ln|A| for symmetric positive-definite `A`.
pub fn log_det_spd(a: &DMatrix<f64>) -> Result<f64> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidState("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Zero-mean multivariate normal log-density with precision `omega` whose
/// log-determinant is `log_det_omega`.
pub fn log_mvn_precision(b: &[f64], omega: &DMatrix<f64>, log_det_omega: f64) -> f64 {
    let d = b.len();
    let mut quad = 0.0;
    for r in 0..d {
        for c in 0..d {
            quad += b[r] * omega[(r, c)] * b[c];
        }
    }
    -0.5 * d as f64 * LN_2PI + 0.5 * log_det_omega - 0.5 * quad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_mode_value() {
        let p = PriorConfig::baseline();
        let want = -2.5 * (2.0 * std::f64::consts::PI * 1000.0).ln();
        assert!((p.log_beta(&[0.0; 5]) - want).abs() < 1e-12);
    }

    #[test]
    fn uniform_b_is_jacobian_only() {
        let p = PriorConfig::baseline();
        for g in [-0.5, 0.0, 0.7] {
            assert!((p.log_gamma(g, (-1.0, 1.5)) + 2.5f64.ln()).abs() < 1e-12);
        }
        assert_eq!(p.log_gamma(1.5, (-1.0, 1.5)), f64::NEG_INFINITY);
    }

    #[test]
    fn sensitivity_differs_only_in_sigma_b_alpha() {
        let a = PriorConfig::baseline();
        let b = PriorConfig::sensitivity();
        assert_eq!(a.log_beta(&[1.0, -2.0]), b.log_beta(&[1.0, -2.0]));
        assert_eq!(a.log_psi(0.3), b.log_psi(0.3));
        assert_ne!(a.log_sigma(0.3), b.log_sigma(0.3));
        assert_ne!(a.log_alpha(0.3), b.log_alpha(0.3));
        assert_ne!(a.log_gamma(0.3, (-1.0, 1.0)), b.log_gamma(0.3, (-1.0, 1.0)));
    }

    #[test]
    fn half_t_normalizes() {
        let p = PriorConfig::baseline();
        let r = crate::quad::integrate(
            |s: f64| p.log_sigma(s).exp(),
            0.0,
            1e4,
            crate::quad::QuadOptions::default(),
        )
        .unwrap();
        // Tail mass beyond 1e4 for t₃ with scale √10 is about 1e-10.
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn validation() {
        assert!(PriorConfig::baseline().validate().is_ok());
        let bad = PriorConfig {
            tau0: 1.0,
            ..PriorConfig::baseline()
        };
        assert!(bad.validate().is_err());
        assert!(PriorConfig::preset("nope").is_err());
    }
}
