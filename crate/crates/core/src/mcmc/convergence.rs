use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// R̂ threshold below which a parameter counts as converged.
pub const RHAT_THRESHOLD: f64 = 1.05;

fn split_halves<'a>(chains: &[&'a [f64]]) -> Vec<&'a [f64]> {
    chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Between/within variance pieces of equally long chains:
/// `(W, var⁺)`.
fn variance_parts(chains: &[&[f64]]) -> (f64, f64) {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains.iter().map(|c| var(c)).sum::<f64>() / m;
    (w, (n - 1.0) / n * w + b / n)
}

/// Split-chain potential scale reduction factor.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InsufficientDraws {
            needed: 2,
            got: chains.len(),
        });
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 4 {
        return Err(Error::InsufficientDraws { needed: 4, got: n });
    }
    let trimmed: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let halves = split_halves(&trimmed);
    let (w, var_plus) = variance_parts(&halves);
    if w == 0.0 {
        let first = halves[0][0];
        let constant = halves.iter().all(|h| h.iter().all(|&v| v == first));
        return Ok(if constant { 1.0 } else { f64::INFINITY });
    }
    Ok((var_plus / w).sqrt())
}

fn autocov(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum::<f64>()
        / n as f64
}

/// Multi-chain effective sample size on split chains with Geyer's initial
/// monotone positive-sequence truncation.
pub fn ess(chains: &[&[f64]]) -> Result<f64> {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if chains.is_empty() || n < 4 {
        return Err(Error::InsufficientDraws { needed: 4, got: n });
    }
    let trimmed: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let halves = split_halves(&trimmed);
    let m = halves.len();
    let len = halves[0].len();
    let total = (m * len) as f64;
    let (w, var_plus) = variance_parts(&halves);
    if w == 0.0 || !var_plus.is_finite() {
        return Ok(total);
    }
    let rho = |t: usize| -> f64 {
        let ac = halves.iter().map(|h| autocov(h, t)).sum::<f64>() / m as f64;
        1.0 - (w - ac) / var_plus
    };
    let mut sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < len {
        let pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum += pair;
        prev_pair = pair;
        t += 2;
    }
    // Σ_{t≥0} pairs counts ρ0 = 1 once; τ = −1 + 2Σ pairs.
    let tau = (-1.0 + 2.0 * sum).max(1.0 / total.log10().max(1.0));
    Ok(total / tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamConvergence {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub params: Vec<ParamConvergence>,
}

impl ConvergenceReport {
    pub fn all_converged(&self) -> bool {
        self.params.iter().all(|p| p.converged)
    }

    pub fn max_rhat(&self) -> f64 {
        self.params.iter().map(|p| p.rhat).fold(1.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<&ParamConvergence> {
        self.params.iter().find(|p| p.name == name)
    }
}
