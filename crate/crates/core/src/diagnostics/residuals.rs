use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of each observation within its simulated replicates:
/// `(#{sim < y} + U·(#{sim = y} + 1))/(S + 1)`, `U ~ Uniform(0, 1)`.
///
/// `sims[s][j]` is replicate `s` of observation `j`.
pub fn scaled_residuals<R: Rng + ?Sized>(observed: &[f64], sims: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
    check_sims(observed, sims)?;
    let s = sims.len() as f64;
    Ok(observed
        .iter()
        .enumerate()
        .map(|(j, &y)| {
            let (mut below, mut ties) = (0usize, 0usize);
            for rep in sims {
                let v = rep[j];
                if v < y {
                    below += 1;
                } else if v == y {
                    ties += 1;
                }
            }
            let u: f64 = rng.random();
            (below as f64 + u * (ties as f64 + 1.0)) / (s + 1.0)
        })
        .collect())
}

fn check_sims(observed: &[f64], sims: &[Vec<f64>]) -> Result<()> {
    if sims.is_empty() {
        return Err(Error::InsufficientDraws { needed: 1, got: 0 });
    }
    if let Some(bad) = sims.iter().find(|r| r.len() != observed.len()) {
        return Err(Error::DimensionMismatch {
            expected: observed.len(),
            got: bad.len(),
        });
    }
    Ok(())
}

/// Kolmogorov survival function `P(K > λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}`,
/// truncated at 100 terms.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against Uniform(0, 1) with the
/// asymptotic p-value at `√n·D`.
pub fn ks_uniform_test(residuals: &[f64]) -> Result<KsResult> {
    let n = residuals.len();
    if n < 5 {
        return Err(Error::InsufficientSample { needed: 5, got: n });
    }
    let mut x = residuals.to_vec();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let v = v.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / nf - v).max(v - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(nf.sqrt() * d),
    })
}

fn residual_variance(values: &[f64], centre: &[f64]) -> f64 {
    let r: Vec<f64> = values.iter().zip(centre).map(|(v, c)| v - c).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
}

/// Variance-ratio dispersion test. Residuals are taken against the
/// per-observation simulation mean; the ratio compares the observed
/// residual variance with the mean replicate variance, and the p-value is
/// the two-sided empirical tail position among replicates. Returns
/// `(ratio, p)`.
pub fn dispersion_test(observed: &[f64], sims: &[Vec<f64>]) -> Result<(f64, f64)> {
    check_sims(observed, sims)?;
    let s = sims.len() as f64;
    let centre: Vec<f64> = (0..observed.len())
        .map(|j| sims.iter().map(|r| r[j]).sum::<f64>() / s)
        .collect();
    let obs = residual_variance(observed, &centre);
    let reps: Vec<f64> = sims.iter().map(|r| residual_variance(r, &centre)).collect();
    let mean_rep = reps.iter().sum::<f64>() / s;
    if mean_rep == 0.0 && obs == 0.0 {
        return Ok((1.0, 1.0));
    }
    let above = reps.iter().filter(|&&v| v >= obs).count() as f64;
    let below = reps.iter().filter(|&&v| v <= obs).count() as f64;
    let p = (2.0 * above.min(below) / s).min(1.0);
    Ok((obs / mean_rep, p))
}

fn ln_binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    use crate::special::ln_gamma;
    let (kf, nf) = (k as f64, n as f64);
    ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + kf * p.ln() + (nf - kf) * (-p).ln_1p()
}

/// Exact two-sided binomial test of the number of residuals at the
/// simulation boundary (≤ 1/(S+1) or ≥ S/(S+1)) against success
/// probability 2/(S+1). The two-sided p-value sums every outcome no more
/// likely than the observed one (relative tolerance 1e−7).
pub fn outlier_binomial_test(residuals: &[f64], n_sims: usize) -> Result<f64> {
    if n_sims == 0 {
        return Err(Error::InvalidParams("number of simulations must be positive".into()));
    }
    let n = residuals.len() as u64;
    if n == 0 {
        return Ok(1.0);
    }
    let sp1 = n_sims as f64 + 1.0;
    let (lo, hi) = (1.0 / sp1, n_sims as f64 / sp1);
    let k = residuals.iter().filter(|&&r| r <= lo || r >= hi).count() as u64;
    let p = 2.0 / sp1;
    let d = ln_binom_pmf(k, n, p) + (1e-7f64).ln_1p();
    let total: f64 = (0..=n)
        .map(|j| ln_binom_pmf(j, n, p))
        .filter(|&l| l <= d)
        .map(f64::exp)
        .sum();
    Ok(total.min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residuals: Vec<f64>,
    pub ks: KsResult,
    pub dispersion_ratio: f64,
    pub p_dispersion: f64,
    pub p_outlier: f64,
    pub n_sims: usize,
}

impl ResidualReport {
    pub fn from_sims<R: Rng + ?Sized>(observed: &[f64], sims: &[Vec<f64>], rng: &mut R) -> Result<Self> {
        let residuals = scaled_residuals(observed, sims, rng)?;
        let ks = ks_uniform_test(&residuals)?;
        let (dispersion_ratio, p_dispersion) = dispersion_test(observed, sims)?;
        let p_outlier = outlier_binomial_test(&residuals, sims.len())?;
        Ok(Self {
            residuals,
            ks,
            dispersion_ratio,
            p_dispersion,
            p_outlier,
            n_sims: sims.len(),
        })
    }
}
