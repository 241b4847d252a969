use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::LongitudinalDataset;
use super::link::{biphasic_mu, BiphasicParams, Link};
use super::prior::{log_det_spd, log_mvn_precision, PriorConfig};
use super::state::{tracked_names, ParamState};
use crate::dist::{al_log_kernel, al_sample, gal_sample, gamma_bounds, AlParams, Family};
use crate::dist::{GalParams, GalShape, QuantileLevel};
use crate::error::{Error, Result};
use crate::special::log_add_exp;

/// Likelihood family, quantile level, mean structure and priors of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub p0: QuantileLevel,
    pub link: Link,
    #[serde(default)]
    pub priors: PriorConfig,
}

impl ModelSpec {
    pub fn new(family: Family, p0: f64, link: Link, priors: PriorConfig) -> Result<Self> {
        let spec = Self {
            family,
            p0: QuantileLevel::new(p0)?,
            link,
            priors,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        if self.link.n_fixed() == 0 {
            return Err(Error::InvalidConfig("model needs at least one fixed effect".into()));
        }
        if self.link.n_random() == 0 {
            return Err(Error::InvalidConfig("model needs at least one random effect".into()));
        }
        Ok(())
    }

    /// Number of fixed effects.
    pub fn p(&self) -> usize {
        self.link.n_fixed()
    }

    /// Random-effect dimension.
    pub fn d(&self) -> usize {
        self.link.n_random()
    }

    pub fn tracked_names(&self) -> Vec<String> {
        tracked_names(self.family, self.p(), self.d())
    }
}

/// Error distribution of a residual `y − μ` under one parameter state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorModel {
    Al {
        p0: QuantileLevel,
        sigma: f64,
        ln_sigma: f64,
    },
    Gal {
        shape: GalShape,
        sigma: f64,
        ln_sigma: f64,
    },
    Cgal {
        shape: GalShape,
        sigma: f64,
        ln_sigma: f64,
        tau0: f64,
        ln_tau0: f64,
        ln_alpha: f64,
        ln_1m_alpha: f64,
    },
}

impl ErrorModel {
    pub fn new(
        family: Family,
        p0: QuantileLevel,
        sigma: f64,
        gamma: Option<f64>,
        alpha: Option<f64>,
        tau0: f64,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidState(format!("sigma must be positive, got {sigma}")));
        }
        let ln_sigma = sigma.ln();
        let shape = |g: Option<f64>| -> Result<GalShape> {
            let g = g.ok_or_else(|| Error::InvalidState("missing gamma".into()))?;
            GalShape::with_bounds(g, p0, bounds)
        };
        Ok(match family {
            Family::Al => ErrorModel::Al { p0, sigma, ln_sigma },
            Family::Gal => ErrorModel::Gal {
                shape: shape(gamma)?,
                sigma,
                ln_sigma,
            },
            Family::Cgal => {
                let a = alpha.ok_or_else(|| Error::InvalidState("missing alpha".into()))?;
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::InvalidState(format!("alpha must lie in (0, 1), got {a}")));
                }
                ErrorModel::Cgal {
                    shape: shape(gamma)?,
                    sigma,
                    ln_sigma,
                    tau0,
                    ln_tau0: tau0.ln(),
                    ln_alpha: a.ln(),
                    ln_1m_alpha: (-a).ln_1p(),
                }
            }
        })
    }

    /// Marginal log-density of a residual.
    #[inline]
    pub fn logpdf(&self, r: f64) -> f64 {
        match *self {
            ErrorModel::Al { p0, sigma, ln_sigma } => al_log_kernel(r / sigma, p0) - ln_sigma,
            ErrorModel::Gal {
                ref shape,
                sigma,
                ln_sigma,
            } => shape.log_kernel(r / sigma) - ln_sigma,
            ErrorModel::Cgal {
                ref shape,
                sigma,
                ln_sigma,
                tau0,
                ln_tau0,
                ln_alpha,
                ln_1m_alpha,
            } => {
                let main = shape.log_kernel(r / sigma) - ln_sigma + ln_1m_alpha;
                let wide = shape.log_kernel(r / (sigma * tau0)) - ln_sigma - ln_tau0 + ln_alpha;
                log_add_exp(main, wide)
            }
        }
    }

    /// Log-density conditional on the contamination indicator. Families
    /// without contamination ignore the flag.
    #[inline]
    pub fn logpdf_given(&self, r: f64, contaminated: bool) -> f64 {
        match *self {
            ErrorModel::Cgal {
                ref shape,
                sigma,
                ln_sigma,
                tau0,
                ln_tau0,
                ..
            } => {
                if contaminated {
                    shape.log_kernel(r / (sigma * tau0)) - ln_sigma - ln_tau0
                } else {
                    shape.log_kernel(r / sigma) - ln_sigma
                }
            }
            _ => self.logpdf(r),
        }
    }

    /// Posterior probability that a residual came from the inflated component.
    pub fn contamination_prob(&self, r: f64) -> f64 {
        match *self {
            ErrorModel::Cgal {
                ln_alpha,
                ln_1m_alpha,
                ..
            } => {
                let wide = self.logpdf_given(r, true) + ln_alpha;
                let main = self.logpdf_given(r, false) + ln_1m_alpha;
                1.0 / (1.0 + (main - wide).exp())
            }
            _ => 0.0,
        }
    }

    /// Residual draw (location 0).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorModel::Al { p0, sigma, .. } => al_sample(&AlParams { mu: 0.0, sigma, p0 }, rng),
            ErrorModel::Gal { shape, sigma, .. } => gal_sample(&GalParams { mu: 0.0, sigma, shape }, rng),
            ErrorModel::Cgal {
                shape,
                sigma,
                tau0,
                ln_alpha,
                ..
            } => {
                let u: f64 = rng.random();
                let s = if u < ln_alpha.exp() { sigma * tau0 } else { sigma };
                gal_sample(&GalParams { mu: 0.0, sigma: s, shape }, rng)
            }
        }
    }
}

#[derive(Debug, Clone)]
struct SubjectDesign {
    t: Vec<f64>,
    y: Vec<f64>,
    cd4: Vec<f64>,
    x: Vec<f64>,
    z: Vec<f64>,
}

/// A model specification bound to a dataset, with the design precomputed.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    bounds: (f64, f64),
    ids: Vec<String>,
    subjects: Vec<SubjectDesign>,
    n_obs: usize,
    pairs: Vec<(usize, usize)>,
}

fn resolve_column(name: &str, data: &LongitudinalDataset) -> Result<Option<usize>> {
    match name {
        "intercept" | "time" => Ok(None),
        other => data
            .covariate_index(other)
            .map(Some)
            .ok_or_else(|| Error::InvalidData(format!("unknown design column '{other}'"))),
    }
}

fn column_value(name: &str, idx: Option<usize>, t: f64, cov: &[f64]) -> f64 {
    match (name, idx) {
        ("intercept", _) => 1.0,
        ("time", _) => t,
        (_, Some(k)) => cov[k],
        _ => unreachable!("design column resolved at construction"),
    }
}

impl Model {
    pub fn new(spec: ModelSpec, data: &LongitudinalDataset) -> Result<Self> {
        spec.validate()?;
        data.validate()?;
        let bounds = gamma_bounds(spec.p0);
        let pairs = match &spec.link {
            Link::Linear { fixed, random } => random
                .iter()
                .enumerate()
                .filter_map(|(k, r)| fixed.iter().position(|f| f == r).map(|j| (k, j)))
                .collect(),
            Link::Biphasic { .. } => (0..4).map(|k| (k, k)).collect(),
            Link::BiphasicShort { .. } => vec![(0, 0), (1, 1)],
        };
        let (fixed_cols, random_cols, cd4_idx) = match &spec.link {
            Link::Linear { fixed, random } => {
                let f = fixed
                    .iter()
                    .map(|n| resolve_column(n, data).map(|i| (n.clone(), i)))
                    .collect::<Result<Vec<_>>>()?;
                let r = random
                    .iter()
                    .map(|n| resolve_column(n, data).map(|i| (n.clone(), i)))
                    .collect::<Result<Vec<_>>>()?;
                (f, r, None)
            }
            Link::Biphasic { covariate } => {
                let k = data.covariate_index(covariate).ok_or_else(|| {
                    Error::InvalidData(format!("biphasic link needs covariate '{covariate}'"))
                })?;
                (vec![], vec![], Some(k))
            }
            Link::BiphasicShort { .. } => (vec![], vec![], None),
        };
        let subjects = data
            .subjects
            .iter()
            .map(|s| {
                let obs = &s.observations;
                let mut x = Vec::with_capacity(obs.len() * fixed_cols.len());
                let mut z = Vec::with_capacity(obs.len() * random_cols.len());
                for o in obs {
                    x.extend(fixed_cols.iter().map(|(n, i)| column_value(n, *i, o.t, &o.covariates)));
                    z.extend(random_cols.iter().map(|(n, i)| column_value(n, *i, o.t, &o.covariates)));
                }
                SubjectDesign {
                    t: obs.iter().map(|o| o.t).collect(),
                    y: obs.iter().map(|o| o.y).collect(),
                    cd4: obs
                        .iter()
                        .map(|o| cd4_idx.map_or(0.0, |k| o.covariates[k]))
                        .collect(),
                    x,
                    z,
                }
            })
            .collect();
        Ok(Self {
            spec,
            bounds,
            ids: data.subjects.iter().map(|s| s.id.clone()).collect(),
            subjects,
            n_obs: data.n_obs(),
            pairs,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Admissible γ interval for the model's `p0`.
    /// `(k, j)` pairs where random effect `k` enters the mean only through
    /// `β_j + b_k`, so shifting both in opposite directions leaves μ unchanged.
    pub fn paired_effects(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn gamma_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn subject_id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn times(&self, i: usize) -> &[f64] {
        &self.subjects[i].t
    }

    pub fn responses(&self, i: usize) -> &[f64] {
        &self.subjects[i].y
    }

    pub fn covariate(&self, i: usize) -> &[f64] {
        &self.subjects[i].cd4
    }

    /// Conditional quantiles `μ_ij` of subject `i` written into `out`.
    pub fn mu_into(&self, beta: &[f64], b: &[f64], i: usize, out: &mut [f64]) {
        let s = &self.subjects[i];
        match &self.spec.link {
            Link::Linear { .. } => {
                let (p, d) = (beta.len(), b.len());
                for (j, o) in out.iter_mut().enumerate() {
                    let x = &s.x[j * p..(j + 1) * p];
                    let z = &s.z[j * d..(j + 1) * d];
                    *o = beta.iter().zip(x).map(|(u, v)| u * v).sum::<f64>()
                        + b.iter().zip(z).map(|(u, v)| u * v).sum::<f64>();
                }
            }
            Link::Biphasic { .. } => {
                let params = BiphasicParams {
                    beta: [beta[0], beta[1], beta[2], beta[3], beta[4]],
                    b: [b[0], b[1], b[2], b[3]],
                };
                for (j, o) in out.iter_mut().enumerate() {
                    *o = biphasic_mu(&params, s.t[j], s.cd4[j]);
                }
            }
            Link::BiphasicShort { beta3, beta4 } => {
                let params = BiphasicParams {
                    beta: [beta[0], beta[1], *beta3, *beta4, 0.0],
                    b: [b[0], b[1], 0.0, 0.0],
                };
                for (j, o) in out.iter_mut().enumerate() {
                    *o = biphasic_mu(&params, s.t[j], 0.0);
                }
            }
        }
    }

    pub fn mu(&self, beta: &[f64], b: &[f64], i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.subjects[i].t.len()];
        self.mu_into(beta, b, i, &mut out);
        out
    }

    pub fn error_model(&self, state: &ParamState) -> Result<ErrorModel> {
        ErrorModel::new(
            self.spec.family,
            self.spec.p0,
            state.sigma,
            state.gamma,
            state.alpha,
            self.spec.priors.tau0,
            self.bounds,
        )
    }

    pub fn validate_state(&self, state: &ParamState) -> Result<()> {
        let (p, d) = (self.spec.p(), self.spec.d());
        if state.beta.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: state.beta.len(),
            });
        }
        if state.b.len() != self.subjects.len() {
            return Err(Error::DimensionMismatch {
                expected: self.subjects.len(),
                got: state.b.len(),
            });
        }
        if let Some(bad) = state.b.iter().find(|b| b.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        if state.omega.nrows() != d || state.omega.ncols() != d || state.psi_diag.len() != d {
            return Err(Error::InvalidState("precision or psi has wrong dimension".into()));
        }
        if state.psi_diag.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidState("psi entries must be positive".into()));
        }
        if state.family_mismatch(self.spec.family) {
            return Err(Error::InvalidState(format!(
                "state parameters do not match family {}",
                self.spec.family
            )));
        }
        if let Some(ind) = &state.indicators {
            if ind.len() != self.subjects.len()
                || ind.iter().zip(&self.subjects).any(|(c, s)| c.len() != s.t.len())
            {
                return Err(Error::InvalidState("indicator layout does not match data".into()));
            }
        }
        self.error_model(state)?;
        log_det_spd(&state.omega)?;
        Ok(())
    }

    /// Log-likelihood of subject `i`. With indicators present the cGAL term
    /// is the single-component density at scale `σ·τ0^c`.
    pub fn loglik_subject(&self, state: &ParamState, em: &ErrorModel, i: usize) -> f64 {
        let s = &self.subjects[i];
        let mu = self.mu(&state.beta, &state.b[i], i);
        match &state.indicators {
            Some(ind) => s
                .y
                .iter()
                .zip(&mu)
                .zip(&ind[i])
                .map(|((y, m), &c)| em.logpdf_given(y - m, c))
                .sum(),
            None => s.y.iter().zip(&mu).map(|(y, m)| em.logpdf(y - m)).sum(),
        }
    }

    pub fn loglik(&self, state: &ParamState) -> Result<f64> {
        self.validate_state(state)?;
        let em = self.error_model(state)?;
        Ok((0..self.subjects.len()).map(|i| self.loglik_subject(state, &em, i)).sum())
    }

    /// Marginal per-observation log-likelihood in storage order; indicators
    /// are ignored.
    pub fn loglik_pointwise(&self, state: &ParamState) -> Result<Vec<f64>> {
        let em = self.error_model(state)?;
        let mut out = Vec::with_capacity(self.n_obs);
        for (i, s) in self.subjects.iter().enumerate() {
            let mu = self.mu(&state.beta, &state.b[i], i);
            out.extend(s.y.iter().zip(&mu).map(|(y, m)| em.logpdf(y - m)));
        }
        Ok(out)
    }

    pub fn logprior(&self, state: &ParamState) -> Result<f64> {
        self.validate_state(state)?;
        logprior_with_bounds(state, &self.spec.priors, self.bounds)
    }
}

impl ParamState {
    fn family_mismatch(&self, family: Family) -> bool {
        self.gamma.is_some() != family.has_gamma() || self.alpha.is_some() != family.has_alpha()
    }
}

/// Log-likelihood of `state` under `spec` for `data`.
pub fn loglik(state: &ParamState, spec: &ModelSpec, data: &LongitudinalDataset) -> Result<f64> {
    Model::new(spec.clone(), data)?.loglik(state)
}

/// Log-prior density of `state`; the random-effects density is included.
pub fn logprior(state: &ParamState, spec: &ModelSpec) -> Result<f64> {
    logprior_with_bounds(state, &spec.priors, gamma_bounds(spec.p0))
}

fn logprior_with_bounds(state: &ParamState, pr: &PriorConfig, bounds: (f64, f64)) -> Result<f64> {
    if state.psi_diag.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidState("psi entries must be positive".into()));
    }
    let mut lp = pr.log_beta(&state.beta) + pr.log_sigma(state.sigma);
    if let Some(g) = state.gamma {
        lp += pr.log_gamma(g, bounds);
    }
    if let Some(a) = state.alpha {
        lp += pr.log_alpha(a);
    }
    lp += state.psi_diag.iter().map(|&v| pr.log_psi(v)).sum::<f64>();
    lp += pr.log_omega(&state.omega, &state.psi_diag)?;
    let log_det = log_det_spd(&state.omega)?;
    lp += state
        .b
        .iter()
        .map(|b| log_mvn_precision(b, &state.omega, log_det))
        .sum::<f64>();
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{Beta, Continuous, Gamma, Normal, StudentsT};
    use statrs::function::gamma::ln_gamma as sr_ln_gamma;

    use super::*;
    use crate::dist::{cgal_logpdf, CgalParams};
    use crate::model::{Observation, Subject};

    fn linear_data(subjects: &[Vec<(f64, f64)>]) -> LongitudinalDataset {
        LongitudinalDataset::new(
            vec![],
            subjects
                .iter()
                .enumerate()
                .map(|(i, obs)| Subject {
                    id: format!("s{i}"),
                    observations: obs
                        .iter()
                        .map(|&(t, y)| Observation {
                            t,
                            y,
                            covariates: vec![],
                        })
                        .collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn intercept_link() -> Link {
        Link::Linear {
            fixed: vec!["intercept".into(), "time".into()],
            random: vec!["intercept".into()],
        }
    }

    fn state(family: Family, beta: Vec<f64>, b: Vec<Vec<f64>>) -> ParamState {
        ParamState {
            beta,
            sigma: 0.7,
            gamma: family.has_gamma().then_some(0.2),
            alpha: family.has_alpha().then_some(0.1),
            omega: DMatrix::identity(b[0].len(), b[0].len()),
            psi_diag: vec![1.0; b[0].len()],
            b,
            indicators: None,
        }
    }

    #[test]
    fn al_at_location() {
        let data = linear_data(&[vec![(0.0, 1.5)]]);
        let spec = ModelSpec::new(Family::Al, 0.3, intercept_link(), PriorConfig::baseline()).unwrap();
        let s = state(Family::Al, vec![1.0, 0.0], vec![vec![0.5]]);
        let ll = loglik(&s, &spec, &data).unwrap();
        assert!((ll - (0.3f64 * 0.7 / 0.7).ln()).abs() < 1e-12);
    }

    #[test]
    fn loglik_is_additive_over_subjects() {
        let a = vec![(0.0, 1.0), (1.0, 2.5), (2.0, 2.0)];
        let b = vec![(0.5, -1.0), (3.0, 4.0)];
        for family in [Family::Al, Family::Gal, Family::Cgal] {
            let spec = ModelSpec::new(family, 0.25, intercept_link(), PriorConfig::baseline()).unwrap();
            let both = linear_data(&[a.clone(), b.clone()]);
            let s = state(family, vec![0.3, 0.8], vec![vec![0.2], vec![-0.4]]);
            let total = loglik(&s, &spec, &both).unwrap();
            let mut s1 = s.clone();
            s1.b = vec![vec![0.2]];
            let mut s2 = s.clone();
            s2.b = vec![vec![-0.4]];
            let parts = loglik(&s1, &spec, &linear_data(&[a.clone()])).unwrap()
                + loglik(&s2, &spec, &linear_data(&[b.clone()])).unwrap();
            assert!((total - parts).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_cgal_equals_summed_indicators() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obs: Vec<(f64, f64)> = (0..12).map(|k| (k as f64, rng.random_range(-5.0..5.0))).collect();
        let data = linear_data(&[obs.clone()]);
        let spec = ModelSpec::new(Family::Cgal, 0.4, intercept_link(), PriorConfig::baseline()).unwrap();
        let model = Model::new(spec.clone(), &data).unwrap();
        let (lo, hi) = model.gamma_bounds();
        for _ in 0..20 {
            let mut s = state(Family::Cgal, vec![rng.random_range(-1.0..1.0), 0.1], vec![vec![0.0]]);
            s.sigma = rng.random_range(0.1..2.0);
            s.gamma = Some(rng.random_range(lo * 0.9..hi * 0.9));
            s.alpha = Some(rng.random_range(0.01..0.99));
            let em = model.error_model(&s).unwrap();
            let mu = model.mu(&s.beta, &s.b[0], 0);
            let a = s.alpha.unwrap();
            let mut augmented = 0.0;
            for (j, &(_, y)) in obs.iter().enumerate() {
                let r = y - mu[j];
                augmented += log_add_exp(
                    (1.0 - a).ln() + em.logpdf_given(r, false),
                    a.ln() + em.logpdf_given(r, true),
                );
            }
            let direct: f64 = obs
                .iter()
                .enumerate()
                .map(|(j, &(_, y))| {
                    let base = GalParams::new(mu[j], s.sigma, s.gamma.unwrap(), spec.p0).unwrap();
                    cgal_logpdf(y, &CgalParams::new(base, a, 10.0).unwrap())
                })
                .sum();
            let marginal = model.loglik(&s).unwrap();
            assert!((augmented - direct).abs() < 1e-10);
            assert!((marginal - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn indicators_switch_component_scale() {
        let data = linear_data(&[vec![(0.0, 3.0)]]);
        let spec = ModelSpec::new(Family::Cgal, 0.5, intercept_link(), PriorConfig::baseline()).unwrap();
        let model = Model::new(spec.clone(), &data).unwrap();
        let mut s = state(Family::Cgal, vec![0.0, 0.0], vec![vec![0.0]]);
        s.indicators = Some(vec![vec![true]]);
        let wide = GalParams::new(0.0, 7.0, 0.2, spec.p0).unwrap();
        let want = crate::dist::gal_logpdf(3.0, &wide);
        assert!((model.loglik(&s).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn invalid_states_rejected() {
        let data = linear_data(&[vec![(0.0, 1.0)]]);
        let spec = ModelSpec::new(Family::Gal, 0.5, intercept_link(), PriorConfig::baseline()).unwrap();
        let model = Model::new(spec, &data).unwrap();
        let good = state(Family::Gal, vec![0.0, 0.0], vec![vec![0.0]]);
        assert!(model.loglik(&good).is_ok());
        let mut s = good.clone();
        s.sigma = -1.0;
        assert!(model.loglik(&s).is_err());
        let mut s = good.clone();
        s.gamma = Some(5.0);
        assert!(model.loglik(&s).is_err());
        let mut s = good.clone();
        s.omega[(0, 0)] = -1.0;
        assert!(model.logprior(&s).is_err());
        let mut s = good.clone();
        s.beta.push(1.0);
        assert!(model.loglik(&s).is_err());
        let mut s = good;
        s.alpha = Some(0.5);
        assert!(model.loglik(&s).is_err());
    }

    fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    }

    // Textbook densities: statrs for the univariate terms, explicit Σ and
    // scale-matrix forms for the multivariate ones.
    fn oracle_logprior(s: &ParamState, pr: &PriorConfig, bounds: (f64, f64)) -> f64 {
        let d = s.omega.nrows();
        let mut lp = 0.0;
        let nb = Normal::new(0.0, pr.s_beta_sq.sqrt()).unwrap();
        lp += s.beta.iter().map(|&b| nb.ln_pdf(b)).sum::<f64>();
        let t = StudentsT::new(0.0, pr.s_sigma, pr.nu_sigma).unwrap();
        lp += 2f64.ln() + t.ln_pdf(s.sigma);
        if let Some(g) = s.gamma {
            let w = bounds.1 - bounds.0;
            lp += Beta::new(pr.a_gamma, pr.b_gamma).unwrap().ln_pdf((g - bounds.0) / w) - w.ln();
        }
        if let Some(a) = s.alpha {
            lp += Beta::new(pr.a_alpha, pr.b_alpha).unwrap().ln_pdf(a);
        }
        let gpsi = Gamma::new(0.5, pr.a_psi.powi(-2)).unwrap();
        lp += s.psi_diag.iter().map(|&v| gpsi.ln_pdf(v)).sum::<f64>();
        let n = pr.nu_cov + d as f64 - 1.0;
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            s.psi_diag.iter().map(|v| 2.0 * pr.nu_cov * v),
        ));
        let v = m.clone().try_inverse().unwrap();
        let df = d as f64;
        let lmg = 0.25 * df * (df - 1.0) * std::f64::consts::PI.ln()
            + (0..d).map(|j| sr_ln_gamma(0.5 * n - 0.5 * j as f64)).sum::<f64>();
        lp += 0.5 * (n - df - 1.0) * s.omega.determinant().ln() - 0.5 * (&m * &s.omega).trace()
            - 0.5 * n * df * 2f64.ln()
            - 0.5 * n * v.determinant().ln()
            - lmg;
        let sigma = s.omega.clone().try_inverse().unwrap();
        let sigma_inv = sigma.clone().try_inverse().unwrap();
        let two_pi_sigma = &sigma * (2.0 * std::f64::consts::PI);
        for b in &s.b {
            let bv = nalgebra::DVector::from_column_slice(b);
            lp += -0.5 * two_pi_sigma.determinant().ln() - 0.5 * (bv.transpose() * &sigma_inv * &bv)[(0, 0)];
        }
        lp
    }

    #[test]
    fn logprior_matches_textbook_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let presets = [PriorConfig::baseline(), PriorConfig::sensitivity(), PriorConfig::uniform_alpha()];
        for k in 0..100 {
            let family = [Family::Al, Family::Gal, Family::Cgal][k % 3];
            let pr = presets[k % presets.len()];
            let p0 = rng.random_range(0.05..0.95);
            let d = 1 + k % 4;
            let link = Link::Linear {
                fixed: vec!["intercept".into(); 1 + k % 5],
                random: vec!["intercept".into(); d],
            };
            let spec = ModelSpec::new(family, p0, link, pr).unwrap();
            let bounds = gamma_bounds(spec.p0);
            let s = ParamState {
                beta: (0..spec.p()).map(|_| rng.random_range(-30.0..30.0)).collect(),
                sigma: rng.random_range(0.01..20.0),
                gamma: family
                    .has_gamma()
                    .then(|| bounds.0 + (bounds.1 - bounds.0) * rng.random_range(0.01..0.99)),
                alpha: family.has_alpha().then(|| rng.random_range(0.001..0.999)),
                omega: random_spd(d, &mut rng),
                psi_diag: (0..d).map(|_| rng.random_range(1e-4..2.0)).collect(),
                b: (0..1 + k % 6)
                    .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
                    .collect(),
                indicators: None,
            };
            let got = logprior(&s, &spec).unwrap();
            let want = oracle_logprior(&s, &pr, bounds);
            assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "case {k}: {got} vs {want}");
        }
    }
}
