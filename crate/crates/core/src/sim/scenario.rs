use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::{FitCount, PerformanceRow, PerformanceTable};
use crate::dist::{gamma_bounds, Family};
use crate::error::{Error, Result};
use crate::mcmc::{posterior_summary, run_sampler, SamplerConfig};
use crate::model::{biphasic_mu, BiphasicParams, ErrorModel, Link, LongitudinalDataset, Model, ModelSpec, Observation, PriorConfig, Subject};
use crate::rng::RngStream;
use crate::QuantileLevel;

/// Replicates whose worst split-R̂ reaches this value are refit once.
const REFIT_RHAT: f64 = 1.1;

/// Data-generating values. `beta` holds (β1, β2, β3, β4); β3 and β4 are held
/// fixed when fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truth {
    pub beta: [f64; 4],
    pub sigma: f64,
    pub gamma: f64,
    pub tau0: f64,
    pub sigma_b: [[f64; 2]; 2],
}

impl Default for Truth {
    fn default() -> Self {
        let v = 0.95 * 0.95;
        Self {
            beta: [11.5, 5.5, 3.5, 0.05],
            sigma: 0.2,
            gamma: -0.3,
            tau0: 10.0,
            sigma_b: [[v, 0.05 * v], [0.05 * v, v]],
        }
    }
}

impl Truth {
    /// Ω = Σ⁻¹ entries (ω11, ω12, ω22).
    pub fn omega(&self) -> Result<[f64; 3]> {
        let s = Matrix2::from_fn(|r, c| self.sigma_b[r][c]);
        let inv = s
            .try_inverse()
            .ok_or_else(|| Error::InvalidConfig("random-effect covariance is singular".into()))?;
        Ok([inv[(0, 0)], inv[(0, 1)], inv[(1, 1)]])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub p0: f64,
    pub alpha_true: f64,
    pub n_subjects: usize,
    pub n_times: usize,
    pub replicates: usize,
    pub truth: Truth,
    pub families: Vec<Family>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            p0: 0.5,
            alpha_true: 0.05,
            n_subjects: 15,
            n_times: 9,
            replicates: 50,
            truth: Truth::default(),
            families: vec![Family::Gal, Family::Cgal],
        }
    }
}

impl ScenarioSpec {
    pub fn new(p0: f64, alpha_true: f64) -> Self {
        Self {
            p0,
            alpha_true,
            ..Self::default()
        }
    }

    /// The four scenarios: p0 ∈ {0.5, 0.85} × α ∈ {0.001, 0.05}.
    pub fn grid() -> Vec<Self> {
        let mut out = vec![];
        for p0 in [0.5, 0.85] {
            for alpha in [0.001, 0.05] {
                out.push(Self::new(p0, alpha));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.n_subjects == 0 || self.n_times < 2 {
            return bad("need at least one subject and two times".into());
        }
        if !(self.alpha_true >= 0.0 && self.alpha_true < 1.0) {
            return bad(format!("alpha_true must lie in [0, 1), got {}", self.alpha_true));
        }
        if self.families.is_empty() {
            return bad("no families to fit".into());
        }
        let t = &self.truth;
        let all = t.beta.iter().chain([&t.sigma, &t.gamma, &t.tau0]).chain(t.sigma_b.iter().flatten());
        if !all.clone().all(|v| v.is_finite()) {
            return bad("truth values must be finite".into());
        }
        if !(t.sigma > 0.0) || !(t.tau0 > 1.0) {
            return bad("truth needs sigma > 0 and tau0 > 1".into());
        }
        let p0 = QuantileLevel::new(self.p0)?;
        let (lo, hi) = gamma_bounds(p0);
        if !(t.gamma > lo && t.gamma < hi) {
            return Err(Error::GammaOutOfBounds { gamma: t.gamma, lower: lo, upper: hi });
        }
        t.omega()?;
        Ok(())
    }

    /// Location-0 error distribution of the generated responses (GAL when
    /// `alpha_true` is zero).
    pub fn noise_model(&self) -> Result<ErrorModel> {
        let t = &self.truth;
        let p0 = QuantileLevel::new(self.p0)?;
        let bounds = gamma_bounds(p0);
        if self.alpha_true > 0.0 {
            ErrorModel::new(Family::Cgal, p0, t.sigma, Some(t.gamma), Some(self.alpha_true), t.tau0, bounds)
        } else {
            ErrorModel::new(Family::Gal, p0, t.sigma, Some(t.gamma), None, t.tau0, bounds)
        }
    }

    /// The fitted model for one family: β3 and β4 enter as constants and α
    /// gets a uniform prior.
    pub fn model_spec(&self, family: Family) -> Result<ModelSpec> {
        let priors = PriorConfig {
            tau0: self.truth.tau0,
            ..PriorConfig::uniform_alpha()
        };
        let link = Link::BiphasicShort {
            beta3: self.truth.beta[2],
            beta4: self.truth.beta[3],
        };
        ModelSpec::new(family, self.p0, link, priors)
    }

    /// (name, true value) for every reported parameter of `family`.
    pub fn reported(&self, family: Family) -> Result<Vec<(String, f64)>> {
        let t = &self.truth;
        let mut out = vec![("beta1".to_string(), t.beta[0]), ("beta2".into(), t.beta[1]), ("sigma".into(), t.sigma)];
        if family.has_gamma() {
            out.push(("gamma".into(), t.gamma));
        }
        if family.has_alpha() {
            out.push(("alpha".into(), self.alpha_true));
        }
        let [w11, w12, w22] = t.omega()?;
        out.extend([("omega11".into(), w11), ("omega12".into(), w12), ("omega22".into(), w22)]);
        Ok(out)
    }
}

/// Replicate `r`'s dataset stream; fits use children of it.
pub fn replicate_seed(master: u64, replicate: usize) -> RngStream {
    RngStream::new(master, 0).child(replicate as u64)
}

/// One synthetic study: times 0..n_times−1, b_i ~ MVN(0, Σ), and location-0
/// cGAL noise whose p0-quantile is zero.
pub fn generate_dataset<R: Rng + ?Sized>(s: &ScenarioSpec, rng: &mut R) -> Result<LongitudinalDataset> {
    s.validate()?;
    let t = &s.truth;
    let noise = s.noise_model()?;
    let chol = Matrix2::from_fn(|r, c| t.sigma_b[r][c])
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig("random-effect covariance is not positive definite".into()))?
        .l();
    let width = s.n_subjects.to_string().len();
    let subjects = (0..s.n_subjects)
        .map(|i| {
            let z = nalgebra::Vector2::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
            let b = chol * z;
            let params = BiphasicParams {
                beta: [t.beta[0], t.beta[1], t.beta[2], t.beta[3], 0.0],
                b: [b[0], b[1], 0.0, 0.0],
            };
            let observations = (0..s.n_times)
                .map(|j| {
                    let tj = j as f64;
                    Observation {
                        t: tj,
                        y: biphasic_mu(&params, tj, 0.0) + noise.sample(rng),
                        covariates: vec![],
                    }
                })
                .collect();
            Subject {
                id: format!("s{:0width$}", i + 1),
                observations,
            }
        })
        .collect();
    LongitudinalDataset::new(vec![], subjects)
}

/// Posterior summary of one reported parameter in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFit {
    pub name: String,
    pub truth: f64,
    pub median: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub replicate: usize,
    pub family: Family,
    /// Worst split-R̂ over the tracked parameters of the accepted fit.
    pub max_rhat: f64,
    pub refit: bool,
    /// Still above the refit threshold after refitting.
    pub flagged: bool,
    /// Empty when the fit failed; see `error`.
    pub params: Vec<ReplicateFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub fits: Vec<FitOutcome>,
    pub table: PerformanceTable,
}

fn fit_once(model: &Model, s: &ScenarioSpec, family: Family, cfg: &SamplerConfig) -> Result<(f64, Vec<ReplicateFit>)> {
    let draws = run_sampler(model, cfg)?;
    let summary = posterior_summary(&draws)?;
    let max_rhat = summary.rows.iter().map(|r| r.rhat).fold(1.0, f64::max);
    let params = s
        .reported(family)?
        .into_iter()
        .map(|(name, truth)| {
            let row = summary
                .get(&name)
                .ok_or_else(|| Error::InvalidState(format!("parameter {name} missing from draws")))?;
            Ok(ReplicateFit {
                name,
                truth,
                median: row.median,
                hpd_lo: row.hpd_lo,
                hpd_hi: row.hpd_hi,
            })
        })
        .collect::<Result<_>>()?;
    Ok((max_rhat, params))
}

fn fit_replicate(s: &ScenarioSpec, cfg: &SamplerConfig, master: u64, r: usize, family: Family) -> FitOutcome {
    let stream = replicate_seed(master, r);
    let run = || -> Result<(f64, bool, Vec<ReplicateFit>)> {
        let data = generate_dataset(s, &mut stream.rng())?;
        let model = Model::new(s.model_spec(family)?, &data)?;
        let mut cfg = cfg.clone();
        cfg.seed = stream.child(family as u64 + 1).stream;
        let (rhat, params) = fit_once(&model, s, family, &cfg)?;
        if rhat < REFIT_RHAT {
            return Ok((rhat, false, params));
        }
        cfg.n_burnin *= 2;
        cfg.n_iter *= 2;
        cfg.thin *= 2;
        let (rhat, params) = fit_once(&model, s, family, &cfg)?;
        Ok((rhat, true, params))
    };
    match run() {
        Ok((max_rhat, refit, params)) => FitOutcome {
            replicate: r,
            family,
            max_rhat,
            refit,
            flagged: max_rhat >= REFIT_RHAT,
            params,
            error: None,
        },
        Err(e) => FitOutcome {
            replicate: r,
            family,
            max_rhat: f64::NAN,
            refit: false,
            flagged: false,
            params: vec![],
            error: Some(e.to_string()),
        },
    }
}

/// Fits every replicate under every listed family. Fits run concurrently and
/// come back ordered by (replicate, family), so the output does not depend on
/// scheduling.
pub fn run_scenario(s: &ScenarioSpec, cfg: &SamplerConfig, master_seed: u64) -> Result<ScenarioResult> {
    run_scenario_with(s, cfg, master_seed, |_| {})
}

/// As [`run_scenario`], calling `progress` after each finished fit.
pub fn run_scenario_with(
    s: &ScenarioSpec,
    cfg: &SamplerConfig,
    master_seed: u64,
    progress: impl Fn(&FitOutcome) + Sync,
) -> Result<ScenarioResult> {
    s.validate()?;
    cfg.validate()?;
    let jobs: Vec<(usize, Family)> = (0..s.replicates)
        .flat_map(|r| s.families.iter().map(move |&f| (r, f)))
        .collect();
    let fits: Vec<FitOutcome> = jobs
        .par_iter()
        .map(|&(r, f)| {
            let out = fit_replicate(s, cfg, master_seed, r, f);
            progress(&out);
            out
        })
        .collect();
    let table = aggregate(s, &fits)?;
    Ok(ScenarioResult {
        spec: s.clone(),
        fits,
        table,
    })
}

fn aggregate(s: &ScenarioSpec, fits: &[FitOutcome]) -> Result<PerformanceTable> {
    let mut table = PerformanceTable::default();
    for &family in &s.families {
        let mine: Vec<&FitOutcome> = fits.iter().filter(|f| f.family == family).collect();
        let ok: Vec<&FitOutcome> = mine.iter().copied().filter(|f| f.error.is_none()).collect();
        table.counts.push(FitCount {
            p0: s.p0,
            alpha: s.alpha_true,
            model: family.name().to_string(),
            replicates: mine.len(),
            failed: mine.len() - ok.len(),
            refit: ok.iter().filter(|f| f.refit).count(),
            flagged: ok.iter().filter(|f| f.flagged).count(),
        });
        for (k, (name, truth)) in s.reported(family)?.into_iter().enumerate() {
            let n = ok.len() as f64;
            let (mut bias, mut sq, mut cover, mut len) = (0.0, 0.0, 0.0, 0.0);
            for f in &ok {
                let p = &f.params[k];
                let e = p.median - truth;
                bias += e;
                sq += e * e;
                cover += (p.hpd_lo <= truth && truth <= p.hpd_hi) as u8 as f64;
                len += p.hpd_hi - p.hpd_lo;
            }
            let nan_if_empty = |v: f64| if ok.is_empty() { f64::NAN } else { v };
            table.rows.push(PerformanceRow {
                p0: s.p0,
                alpha: s.alpha_true,
                model: family.name().to_string(),
                parameter: name,
                truth,
                bias: nan_if_empty(bias / n),
                rmse: nan_if_empty((sq / n).sqrt()),
                cp: nan_if_empty(cover / n),
                hpd_len: nan_if_empty(len / n),
            });
        }
    }
    Ok(table)
}
