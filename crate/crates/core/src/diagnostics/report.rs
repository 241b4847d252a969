use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::influence::{kl_influence, InfluenceRecord, KL_EXPORT_CAP};
use super::loo::{psis_loo, LooReport};
use super::residuals::ResidualReport;
use crate::error::{Error, Result};
use crate::mcmc::PosteriorDraws;
use crate::model::Model;
use crate::rng::RngStream;

fn format_f64(v: f64) -> String {
    crate::mcmc::format_f64(v)
}

/// Observations in storage order as `(subject id, index within subject, time)`.
fn positions(model: &Model) -> Vec<(String, usize, f64)> {
    (0..model.n_subjects())
        .flat_map(|i| {
            model
                .times(i)
                .iter()
                .enumerate()
                .map(move |(j, &t)| (model.subject_id(i).to_string(), j, t))
        })
        .collect()
}

/// Draws × observations matrix of marginal log-likelihoods, each draw
/// evaluated with its own random effects.
pub fn pointwise_loglik_matrix(model: &Model, draws: &PosteriorDraws) -> Result<Vec<Vec<f64>>> {
    draws
        .states()?
        .par_iter()
        .map(|s| model.loglik_pointwise(s))
        .collect()
}

/// KL influence of every observation from a pointwise log-likelihood matrix.
pub fn influence_records(model: &Model, loglik: &[Vec<f64>]) -> Result<Vec<InfluenceRecord>> {
    let pos = positions(model);
    if loglik.iter().any(|r| r.len() != pos.len()) {
        return Err(Error::DimensionMismatch {
            expected: pos.len(),
            got: loglik.first().map_or(0, Vec::len),
        });
    }
    pos.into_par_iter()
        .enumerate()
        .map(|(k, (id, j, t))| {
            let col: Vec<f64> = loglik.iter().map(|r| r[k]).collect();
            Ok(InfluenceRecord::new(id, j, t, kl_influence(&col)?))
        })
        .collect()
}

/// `n_sims` posterior predictive replicates of the whole dataset, each from
/// one draw (evenly spaced over the pooled chains) with that draw's random
/// effects.
pub fn simulate_replicates(
    model: &Model,
    draws: &PosteriorDraws,
    n_sims: usize,
    stream: RngStream,
) -> Result<Vec<Vec<f64>>> {
    let states = draws.states()?;
    if states.is_empty() || n_sims == 0 {
        return Err(Error::InsufficientDraws { needed: 1, got: 0 });
    }
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity(n_sims);
    for s in 0..n_sims {
        let st = &states[s * states.len() / n_sims];
        let em = model.error_model(st)?;
        let mut rep = Vec::with_capacity(model.n_obs());
        for i in 0..model.n_subjects() {
            for m in model.mu(&st.beta, &st.b[i], i) {
                rep.push(m + em.sample(&mut rng));
            }
        }
        out.push(rep);
    }
    Ok(out)
}

/// Simulated residuals and their uniformity, dispersion and outlier tests.
/// Replicates and tie-smoothing use children 0 and 1 of `stream`.
pub fn residual_report(model: &Model, draws: &PosteriorDraws, n_sims: usize, stream: RngStream) -> Result<ResidualReport> {
    let sims = simulate_replicates(model, draws, n_sims, stream.child(0))?;
    let observed: Vec<f64> = (0..model.n_subjects()).flat_map(|i| model.responses(i).to_vec()).collect();
    ResidualReport::from_sims(&observed, &sims, &mut stream.child(1).rng())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub influence: Vec<InfluenceRecord>,
    pub loo: LooReport,
    pub residuals: ResidualReport,
}

impl DiagnosticsReport {
    pub fn compute(model: &Model, draws: &PosteriorDraws, n_sims: usize, stream: RngStream) -> Result<Self> {
        let ll = pointwise_loglik_matrix(model, draws)?;
        Ok(Self {
            influence: influence_records(model, &ll)?,
            loo: psis_loo(&ll)?,
            residuals: residual_report(model, draws, n_sims, stream)?,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidData(e.to_string())
}

/// `subject,index,time,kl,calibration,influential` with KL capped at 10.
pub fn write_influence_csv<W: Write>(records: &[InfluenceRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["subject", "index", "time", "kl", "calibration", "influential"])
        .map_err(csv_err)?;
    for r in records {
        wr.write_record([
            r.subject.clone(),
            r.index.to_string(),
            format_f64(r.time),
            format_f64(r.kl.min(KL_EXPORT_CAP)),
            format_f64(r.calibration),
            r.influential.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(|e| Error::InvalidData(e.to_string()))
}

/// `subject,index,time,elpd,pareto_k`.
pub fn write_loo_csv<W: Write>(model: &Model, loo: &LooReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["subject", "index", "time", "elpd", "pareto_k"]).map_err(csv_err)?;
    for ((id, j, t), (e, k)) in positions(model).into_iter().zip(loo.elpd_i.iter().zip(&loo.pareto_k)) {
        wr.write_record([id, j.to_string(), format_f64(t), format_f64(*e), format_f64(*k)])
            .map_err(csv_err)?;
    }
    wr.flush().map_err(|e| Error::InvalidData(e.to_string()))
}

/// `subject,index,time,y,residual`.
pub fn write_residual_csv<W: Write>(model: &Model, res: &ResidualReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["subject", "index", "time", "y", "residual"]).map_err(csv_err)?;
    let ys = (0..model.n_subjects()).flat_map(|i| model.responses(i).to_vec());
    for (((id, j, t), y), r) in positions(model).into_iter().zip(ys).zip(&res.residuals) {
        wr.write_record([id, j.to_string(), format_f64(t), format_f64(y), format_f64(*r)])
            .map_err(csv_err)?;
    }
    wr.flush().map_err(|e| Error::InvalidData(e.to_string()))
}
