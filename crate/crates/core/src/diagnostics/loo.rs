use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::log_sum_exp;

/// Pareto k̂ above this marks an unreliable importance-sampling estimate.
pub const K_HAT_WARN: f64 = 0.7;

/// Generalized Pareto fit `(ξ, σ)` to non-negative exceedances by
/// probability-weighted moments (plotting position `(j − 0.35)/n`).
/// Returns `None` when the moments do not determine a fit.
pub fn gpd_fit_pwm(exceedances: &[f64]) -> Option<(f64, f64)> {
    let n = exceedances.len();
    if n < 2 {
        return None;
    }
    let mut x = exceedances.to_vec();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let a0 = x.iter().sum::<f64>() / nf;
    let a1 = x
        .iter()
        .enumerate()
        .map(|(j, v)| (1.0 - (j as f64 + 0.65) / nf) * v)
        .sum::<f64>()
        / nf;
    let den = a0 - 2.0 * a1;
    if !(a0 > 0.0) || !(den > 0.0) {
        return None;
    }
    Some((2.0 - a0 / den, 2.0 * a0 * a1 / den))
}

fn gpd_quantile(p: f64, xi: f64, sigma: f64) -> f64 {
    if xi.abs() < 1e-12 {
        -sigma * (-p).ln_1p()
    } else {
        sigma / xi * ((-xi * (-p).ln_1p()).exp() - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub elpd: f64,
    pub looic: f64,
    pub se_elpd: f64,
    /// `lppd − elpd`.
    pub p_loo: f64,
    pub elpd_i: Vec<f64>,
    /// NaN where there were too few draws for a tail fit.
    pub pareto_k: Vec<f64>,
    pub n_high_k: usize,
}

/// `ln Σ e^{num} − ln Σ e^{den}`, arranged so equal inputs cancel exactly.
fn log_weighted_mean(num: &[f64], den: &[f64]) -> f64 {
    let mn = num.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let md = den.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sn: f64 = num.iter().map(|v| (v - mn).exp()).sum();
    let sd: f64 = den.iter().map(|v| (v - md).exp()).sum();
    (mn - md) + (sn / sd).ln()
}

/// Smoothed log-weights and k̂ for one observation's raw log-ratios.
fn psis_smooth(log_ratio: &[f64]) -> (Vec<f64>, f64) {
    let k = log_ratio.len();
    let max = log_ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lw: Vec<f64> = log_ratio.iter().map(|v| v - max).collect();
    let m = ((0.2 * k as f64).min(3.0 * (k as f64).sqrt())).ceil() as usize;
    if m < 5 || m >= k {
        return (lw, f64::NAN);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
    let tail = &order[k - m..];
    let u = lw[order[k - m - 1]].exp();
    let exceed: Vec<f64> = tail.iter().map(|&i| lw[i].exp() - u).collect();
    if exceed.iter().all(|&e| e <= 0.0) {
        return (lw, 0.0);
    }
    let Some((xi, sigma)) = gpd_fit_pwm(&exceed) else {
        return (lw, f64::INFINITY);
    };
    // Shrink toward 0.5 as is customary for small tails.
    let mf = m as f64;
    let xi = (mf * xi + 5.0) / (mf + 10.0);
    for (j, &i) in tail.iter().enumerate() {
        let q = u + gpd_quantile((j as f64 + 0.5) / mf, xi, sigma);
        // Raw maximum is 1 after the shift above.
        lw[i] = q.min(1.0).ln();
    }
    (lw, xi)
}

/// Pareto-smoothed importance-sampling leave-one-out from a
/// draws × observations matrix of pointwise log-likelihoods.
pub fn psis_loo(loglik: &[Vec<f64>]) -> Result<LooReport> {
    let k = loglik.len();
    if k == 0 {
        return Err(Error::InsufficientDraws { needed: 1, got: 0 });
    }
    let n = loglik[0].len();
    if loglik.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: loglik.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
        });
    }
    let mut elpd_i = Vec::with_capacity(n);
    let mut pareto_k = Vec::with_capacity(n);
    let mut lppd = 0.0;
    for i in 0..n {
        let ll: Vec<f64> = loglik.iter().map(|r| r[i]).collect();
        if ll.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateDraws(format!("non-finite log-likelihood for observation {i}")));
        }
        let neg: Vec<f64> = ll.iter().map(|v| -v).collect();
        let (lw, khat) = psis_smooth(&neg);
        let num: Vec<f64> = lw.iter().zip(&ll).map(|(w, l)| w + l).collect();
        let e = log_weighted_mean(&num, &lw);
        if !e.is_finite() {
            return Err(Error::DegenerateDraws(format!("all importance weights vanished for observation {i}")));
        }
        lppd += log_sum_exp(&ll) - (k as f64).ln();
        elpd_i.push(e);
        pareto_k.push(khat);
    }
    let elpd: f64 = elpd_i.iter().sum();
    let mean = elpd / n.max(1) as f64;
    let var = elpd_i.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    Ok(LooReport {
        elpd,
        looic: -2.0 * elpd,
        se_elpd: (n as f64 * var).sqrt(),
        p_loo: lppd - elpd,
        n_high_k: pareto_k.iter().filter(|&&k| k > K_HAT_WARN).count(),
        elpd_i,
        pareto_k,
    })
}
