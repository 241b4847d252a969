use std::io::Write;

use serde::{Deserialize, Serialize};

use super::convergence::{ess, split_rhat, ConvergenceReport, ParamConvergence, RHAT_THRESHOLD};
use super::draws::{format_f64, PosteriorDraws};
use crate::error::{Error, Result};
use crate::model::{biphasic_mu, BiphasicParams, Link, ModelSpec};

/// Prediction days: 0, 2, 7, 10, 14, 21, 28 and weeks 8, 12, 24, 48.
pub const DEFAULT_SCHEDULE: [f64; 11] = [0.0, 2.0, 7.0, 10.0, 14.0, 21.0, 28.0, 56.0, 84.0, 168.0, 336.0];

/// CD4 trajectory `intercept + slope·t` used for prediction.
pub const DEFAULT_CD4_MODEL: (f64, f64) = (2.25, 0.001);

/// Shortest window holding `⌈mass·n⌉` of the sorted draws; ties go to the
/// lowest start.
pub fn hpd_interval(sorted: &[f64], mass: f64) -> Result<(f64, f64)> {
    let n = sorted.len();
    if n < 20 {
        return Err(Error::InsufficientDraws { needed: 20, got: n });
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::InvalidParams(format!("HPD mass must lie in (0, 1], got {mass}")));
    }
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let mut best = 0;
    let mut width = f64::INFINITY;
    for i in 0..=n - k {
        let w = sorted[i + k - 1] - sorted[i];
        if w < width {
            width = w;
            best = i;
        }
    }
    Ok((sorted[best], sorted[best + k - 1]))
}

/// Sample median (mean of the two middle values for even length).
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub median: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
    pub rhat: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub rows: Vec<SummaryRow>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn convergence(&self) -> ConvergenceReport {
        ConvergenceReport {
            params: self
                .rows
                .iter()
                .map(|r| ParamConvergence {
                    name: r.name.clone(),
                    rhat: r.rhat,
                    ess: r.ess,
                    converged: r.rhat < RHAT_THRESHOLD,
                })
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::InvalidData(e.to_string());
        wr.write_record(["parameter", "median", "hpd_lo", "hpd_hi", "rhat", "ess"])
            .map_err(err)?;
        for r in &self.rows {
            wr.write_record([
                r.name.clone(),
                format_f64(r.median),
                format_f64(r.hpd_lo),
                format_f64(r.hpd_hi),
                format_f64(r.rhat),
                format_f64(r.ess),
            ])
            .map_err(err)?;
        }
        wr.flush().map_err(|e| Error::InvalidData(e.to_string()))
    }
}

/// Median, 95% HPD, split-R̂ and ESS for every tracked scalar. R̂ is NaN
/// for single-chain runs.
pub fn posterior_summary(draws: &PosteriorDraws) -> Result<PosteriorSummary> {
    if draws.n_total() == 0 {
        return Err(Error::InsufficientDraws { needed: 1, got: 0 });
    }
    let rows = (0..draws.names.len())
        .map(|k| {
            let per_chain = draws.column(k);
            let refs: Vec<&[f64]> = per_chain.iter().map(|c| c.as_slice()).collect();
            let pooled = sorted(draws.pooled(k));
            let (lo, hi) = hpd_interval(&pooled, 0.95)?;
            let rhat = if refs.len() >= 2 { split_rhat(&refs)? } else { f64::NAN };
            Ok(SummaryRow {
                name: draws.names[k].clone(),
                median: median(&pooled),
                hpd_lo: lo,
                hpd_hi: hi,
                rhat,
                ess: ess(&refs)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSummary { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub cd4: f64,
    pub median: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
}

/// Population-level quantile curve: random effects at zero and
/// `cd4(t) = intercept + slope·t`, summarized over all draws.
pub fn predict_quantile_trajectory(
    draws: &PosteriorDraws,
    spec: &ModelSpec,
    schedule: &[f64],
    cd4_model: (f64, f64),
) -> Result<Vec<TrajectoryPoint>> {
    if !spec.link.is_biphasic() {
        return Err(Error::WrongLink { expected: "biphasic" });
    }
    let fixed = |row: &[f64]| -> Result<[f64; 5]> {
        match &spec.link {
            Link::Biphasic { .. } => Ok([row[0], row[1], row[2], row[3], row[4]]),
            Link::BiphasicShort { beta3, beta4 } => Ok([row[0], row[1], *beta3, *beta4, 0.0]),
            Link::Linear { .. } => Err(Error::WrongLink { expected: "biphasic" }),
        }
    };
    let rows: Vec<&Vec<f64>> = draws.chains.iter().flat_map(|c| c.values.iter()).collect();
    let betas = rows.iter().map(|r| fixed(r)).collect::<Result<Vec<_>>>()?;
    schedule
        .iter()
        .map(|&t| {
            let cd4 = cd4_model.0 + cd4_model.1 * t;
            let mu = sorted(
                betas
                    .iter()
                    .map(|&beta| biphasic_mu(&BiphasicParams { beta, b: [0.0; 4] }, t, cd4))
                    .collect(),
            );
            let (lo, hi) = hpd_interval(&mu, 0.95)?;
            Ok(TrajectoryPoint {
                t,
                cd4,
                median: median(&mu),
                hpd_lo: lo,
                hpd_hi: hi,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn hpd_uniform_grid_tie_break() {
        let d: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(hpd_interval(&d, 0.95).unwrap(), (1.0, 95.0));
    }

    #[test]
    fn hpd_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = sorted((0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect());
        let (lo, hi) = hpd_interval(&d, 0.95).unwrap();
        assert!((lo + 1.96).abs() < 0.02 && (hi - 1.96).abs() < 0.02, "{lo} {hi}");
    }

    #[test]
    fn hpd_point_mass_and_errors() {
        assert_eq!(hpd_interval(&[3.0; 50], 0.95).unwrap(), (3.0, 3.0));
        assert!(hpd_interval(&[1.0; 10], 0.95).is_err());
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }
}
