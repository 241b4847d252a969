use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::SamplerConfig;
use super::conjugate::{sample_omega, sample_psi};
use super::draws::{ChainDraws, PosteriorDraws};
use super::init::initialize_state;
use super::kernel::{accept, BlockProposal, ScaleAdapter};
use crate::error::{Error, Result};
use crate::model::{log_det_spd, ErrorModel, LongitudinalDataset, Model, ModelSpec, ParamState};
use crate::rng::RngStream;

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Chain<'a> {
    model: &'a Model,
    cfg: &'a SamplerConfig,
    rng: ChaCha8Rng,
    state: ParamState,
    em: ErrorModel,
    mu: Vec<Vec<f64>>,
    ll: Vec<f64>,
    mu_scratch: Vec<Vec<f64>>,
    ll_scratch: Vec<f64>,
    beta_prop: BlockProposal,
    b_props: Vec<BlockProposal>,
    error_prop: BlockProposal,
    re_scale_ad: Vec<ScaleAdapter>,
}

impl<'a> Chain<'a> {
    fn new(model: &'a Model, cfg: &'a SamplerConfig, stream: RngStream) -> Result<Self> {
        let mut rng = stream.rng();
        let mut state = initialize_state(model, cfg.ordering_constraint, &mut rng)?;
        let augmented = cfg.augmented && model.spec().family.has_alpha();
        if augmented {
            state.indicators = Some((0..model.n_subjects()).map(|i| vec![false; model.times(i).len()]).collect());
        }
        model.validate_state(&state)?;
        let em = model.error_model(&state)?;
        let mu: Vec<Vec<f64>> = (0..model.n_subjects())
            .map(|i| model.mu(&state.beta, &state.b[i], i))
            .collect();
        let beta_sd: Vec<f64> = state.beta.iter().map(|b| 0.02 * b.abs().max(1.0)).collect();
        let d = model.spec().d();
        let fam = model.spec().family;
        let n_error = 1 + fam.has_gamma() as usize + (fam.has_alpha() && !augmented) as usize;
        let error_target = if n_error == 1 { cfg.target_accept } else { cfg.target_accept_block };
        let mut chain = Self {
            model,
            cfg,
            rng,
            em,
            mu_scratch: mu.clone(),
            ll_scratch: vec![0.0; mu.len()],
            ll: vec![0.0; mu.len()],
            mu,
            beta_prop: BlockProposal::new(&beta_sd, cfg.target_accept_block),
            b_props: (0..model.n_subjects())
                .map(|_| BlockProposal::new(&vec![0.1; d], cfg.target_accept_block))
                .collect(),
            error_prop: BlockProposal::new(&[0.1, 0.5, 0.5][..n_error], error_target),
            re_scale_ad: (0..d).map(|_| ScaleAdapter::new(0.3, cfg.target_accept)).collect(),
            state,
        };
        for i in 0..chain.mu.len() {
            chain.ll[i] = chain.subject_ll(&chain.em, &chain.mu[i], i);
        }
        if !chain.ll.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidState("initial log-likelihood is not finite".into()));
        }
        Ok(chain)
    }

    fn subject_ll(&self, em: &ErrorModel, mu: &[f64], i: usize) -> f64 {
        let y = self.model.responses(i);
        match &self.state.indicators {
            Some(ind) => y
                .iter()
                .zip(mu)
                .zip(&ind[i])
                .map(|((y, m), &c)| em.logpdf_given(y - m, c))
                .sum(),
            None => y.iter().zip(mu).map(|(y, m)| em.logpdf(y - m)).sum(),
        }
    }

    fn total_ll_with(&mut self, em: &ErrorModel) -> f64 {
        let mut total = 0.0;
        for i in 0..self.mu.len() {
            let v = self.subject_ll(em, &self.mu[i], i);
            self.ll_scratch[i] = v;
            total += v;
        }
        total
    }

    fn error_model_for(&self, sigma: f64, gamma: Option<f64>, alpha: Option<f64>) -> Option<ErrorModel> {
        let spec = self.model.spec();
        ErrorModel::new(
            spec.family,
            spec.p0,
            sigma,
            gamma,
            alpha,
            spec.priors.tau0,
            self.model.gamma_bounds(),
        )
        .ok()
    }

    fn update_beta(&mut self, adapt: bool) {
        let pr = &self.model.spec().priors;
        let prop = self.beta_prop.propose(&self.state.beta, &mut self.rng);
        let mut log_ratio = pr.log_beta(&prop) - pr.log_beta(&self.state.beta);
        let mut new_total = 0.0;
        for i in 0..self.mu.len() {
            let mut buf = std::mem::take(&mut self.mu_scratch[i]);
            self.model.mu_into(&prop, &self.state.b[i], i, &mut buf);
            self.ll_scratch[i] = self.subject_ll(&self.em, &buf, i);
            new_total += self.ll_scratch[i];
            self.mu_scratch[i] = buf;
        }
        log_ratio += new_total - self.ll.iter().sum::<f64>();
        let ok = accept(log_ratio, &mut self.rng);
        if ok {
            self.state.beta = prop;
            std::mem::swap(&mut self.mu, &mut self.mu_scratch);
            std::mem::swap(&mut self.ll, &mut self.ll_scratch);
        }
        if self.beta_prop.adapter.record(ok, adapt) {
            self.beta_prop.refresh_shape();
        }
    }

    fn b_quad(&self, b: &[f64]) -> f64 {
        let om = &self.state.omega;
        let d = b.len();
        let mut q = 0.0;
        for r in 0..d {
            for c in 0..d {
                q += b[r] * om[(r, c)] * b[c];
            }
        }
        q
    }

    fn update_b(&mut self, i: usize, adapt: bool) {
        let prop = self.b_props[i].propose(&self.state.b[i], &mut self.rng);
        let mut buf = std::mem::take(&mut self.mu_scratch[i]);
        self.model.mu_into(&self.state.beta, &prop, i, &mut buf);
        let new_ll = self.subject_ll(&self.em, &buf, i);
        let log_ratio = new_ll - self.ll[i] - 0.5 * (self.b_quad(&prop) - self.b_quad(&self.state.b[i]));
        let ok = accept(log_ratio, &mut self.rng);
        if ok {
            self.state.b[i] = prop;
            std::mem::swap(&mut self.mu[i], &mut buf);
            self.ll[i] = new_ll;
        }
        self.mu_scratch[i] = buf;
        if self.b_props[i].adapter.record(ok, adapt) {
            self.b_props[i].refresh_shape();
        }
    }

    /// Exact Gibbs draw along `β_P + δ`, `b_iP − δ`. The mean function is
    /// invariant under this shift, so only the priors on β and b matter and
    /// δ is Gaussian.
    fn update_shift(&mut self) -> Result<()> {
        let pairs = self.model.paired_effects();
        if pairs.is_empty() {
            return Ok(());
        }
        let m = pairs.len();
        let s2 = self.model.spec().priors.s_beta_sq;
        let n = self.state.b.len() as f64;
        let om = &self.state.omega;
        let d = om.nrows();
        let mut sum_b = vec![0.0; d];
        for b in &self.state.b {
            for (acc, v) in sum_b.iter_mut().zip(b) {
                *acc += v;
            }
        }
        let mut prec = DMatrix::zeros(m, m);
        let mut lin = DVector::zeros(m);
        for (a, &(ka, ja)) in pairs.iter().enumerate() {
            for (c, &(kc, _)) in pairs.iter().enumerate() {
                prec[(a, c)] = n * om[(ka, kc)];
            }
            prec[(a, a)] += 1.0 / s2;
            lin[a] = -self.state.beta[ja] / s2 + (0..d).map(|r| om[(ka, r)] * sum_b[r]).sum::<f64>();
        }
        let chol = prec
            .cholesky()
            .ok_or_else(|| Error::InvalidState("shift precision is not positive definite".into()))?;
        let mean = chol.solve(&lin);
        let z = DVector::from_iterator(m, (0..m).map(|_| self.normal()));
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::InvalidState("singular shift factor".into()))?;
        let delta = mean + noise;
        for (a, &(k, j)) in pairs.iter().enumerate() {
            self.state.beta[j] += delta[a];
            for b in &mut self.state.b {
                b[k] -= delta[a];
            }
        }
        Ok(())
    }

    /// Rescales random-effect coordinate `k` by `c` in every subject together
    /// with `Ω → D⁻¹ΩD⁻¹`, `D = diag(1, .., c, .., 1)`. The quadratic forms
    /// are unchanged, which lets the chain move along the b/Ω funnel.
    fn update_re_scale(&mut self, k: usize, adapt: bool) {
        let pr = self.model.spec().priors;
        let log_c = self.re_scale_ad[k].scale() * self.normal();
        let c = log_c.exp();
        let d = self.state.omega.nrows() as f64;
        let df = pr.nu_cov + d - 1.0;
        let w_kk = self.state.omega[(k, k)];
        let mut log_ratio = -(df - d - 1.0) * log_c - pr.nu_cov * self.state.psi_diag[k] * w_kk * (c.powi(-2) - 1.0)
            - (d + 1.0) * log_c;
        let mut new_b = self.state.b.clone();
        let mut new_total = 0.0;
        for (i, b) in new_b.iter_mut().enumerate() {
            b[k] *= c;
            let mut buf = std::mem::take(&mut self.mu_scratch[i]);
            self.model.mu_into(&self.state.beta, b, i, &mut buf);
            self.ll_scratch[i] = self.subject_ll(&self.em, &buf, i);
            new_total += self.ll_scratch[i];
            self.mu_scratch[i] = buf;
        }
        log_ratio += new_total - self.ll.iter().sum::<f64>();
        let ok = accept(log_ratio, &mut self.rng);
        if ok {
            self.state.b = new_b;
            let n = self.state.omega.nrows();
            for j in 0..n {
                let f = if j == k { c * c } else { c };
                self.state.omega[(k, j)] /= f;
                if j != k {
                    self.state.omega[(j, k)] /= f;
                }
            }
            std::mem::swap(&mut self.mu, &mut self.mu_scratch);
            std::mem::swap(&mut self.ll, &mut self.ll_scratch);
        }
        self.re_scale_ad[k].record(ok, adapt);
    }

    /// Shared accept step for the scalar error-model parameters; `log_extra`
    /// holds the prior and Jacobian difference.
    fn try_error_model(&mut self, em: Option<ErrorModel>, log_extra: f64) -> bool {
        let Some(em) = em else { return false };
        let new_total = self.total_ll_with(&em);
        let log_ratio = new_total - self.ll.iter().sum::<f64>() + log_extra;
        let ok = accept(log_ratio, &mut self.rng);
        if ok {
            self.em = em;
            std::mem::swap(&mut self.ll, &mut self.ll_scratch);
        }
        ok
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Unconstrained coordinates of the error block: ln σ, then logit B for
    /// γ, then logit α when α is not drawn conjugately.
    fn error_coords(&self) -> Vec<f64> {
        let mut x = vec![self.state.sigma.ln()];
        if let Some(g) = self.state.gamma {
            let (lo, hi) = self.model.gamma_bounds();
            x.push(logit((g - lo) / (hi - lo)));
        }
        if self.state.indicators.is_none() {
            if let Some(a) = self.state.alpha {
                x.push(logit(a));
            }
        }
        x
    }

    /// Maps coordinates back to (σ, γ, α) with the log prior plus log
    /// Jacobian of the transform.
    fn error_params(&self, x: &[f64]) -> (f64, Option<f64>, Option<f64>, f64) {
        let pr = self.model.spec().priors;
        let sigma = x[0].exp();
        let mut lp = pr.log_sigma(sigma) + x[0];
        let mut k = 1;
        let gamma = self.state.gamma.map(|_| {
            let (lo, hi) = self.model.gamma_bounds();
            let u = sigmoid(x[k]);
            k += 1;
            let g = lo + (hi - lo) * u;
            lp += pr.log_gamma(g, (lo, hi)) + (u * (1.0 - u)).ln();
            g
        });
        let alpha = match (self.state.alpha, self.state.indicators.is_none()) {
            (Some(_), true) => {
                let a = sigmoid(x[k]);
                lp += pr.log_alpha(a) + (a * (1.0 - a)).ln();
                Some(a)
            }
            (a, _) => a,
        };
        (sigma, gamma, alpha, lp)
    }

    fn update_error_block(&mut self, adapt: bool) {
        let x = self.error_coords();
        let prop = self.error_prop.propose(&x, &mut self.rng);
        let (_, _, _, lp_old) = self.error_params(&x);
        let (sigma, gamma, alpha, lp_new) = self.error_params(&prop);
        let extra = lp_new - lp_old;
        let ok = extra.is_finite() && {
            let em = self.error_model_for(sigma, gamma, alpha);
            self.try_error_model(em, extra)
        };
        if ok {
            self.state.sigma = sigma;
            self.state.gamma = gamma;
            self.state.alpha = alpha;
        }
        if self.error_prop.adapter.record(ok, adapt) {
            self.error_prop.refresh_shape();
        }
    }

    /// Indicator draws followed by the conjugate Beta step for α.
    fn update_indicators_and_alpha(&mut self) -> Result<()> {
        let pr = self.model.spec().priors;
        let mut count = 0usize;
        let mut n = 0usize;
        let mut ind = self.state.indicators.take().expect("augmented path keeps indicators");
        for (i, ci) in ind.iter_mut().enumerate() {
            let y = self.model.responses(i);
            for (j, c) in ci.iter_mut().enumerate() {
                let prob = self.em.contamination_prob(y[j] - self.mu[i][j]);
                let u: f64 = self.rng.random();
                *c = u < prob;
                count += *c as usize;
                n += 1;
            }
        }
        self.state.indicators = Some(ind);
        let beta = Beta::new(pr.a_alpha + count as f64, pr.b_alpha + (n - count) as f64)
            .map_err(|e| Error::InvalidParams(e.to_string()))?;
        let a: f64 = beta.sample(&mut self.rng);
        let a = a.clamp(1e-300, 1.0 - 1e-16);
        self.state.alpha = Some(a);
        self.em = self
            .error_model_for(self.state.sigma, self.state.gamma, Some(a))
            .ok_or_else(|| Error::InvalidState("alpha update left the support".into()))?;
        for i in 0..self.mu.len() {
            self.ll[i] = self.subject_ll(&self.em, &self.mu[i], i);
        }
        Ok(())
    }

    fn update_covariance(&mut self) -> Result<()> {
        let pr = self.model.spec().priors;
        self.state.omega = sample_omega(pr.nu_cov, &self.state.psi_diag, &self.state.b, &mut self.rng)?;
        self.state.psi_diag = sample_psi(pr.nu_cov, pr.a_psi, &self.state.omega, &mut self.rng)?;
        Ok(())
    }

    fn sweep(&mut self, adapt: bool, observe: bool) -> Result<()> {
        self.update_beta(adapt);
        for i in 0..self.mu.len() {
            self.update_b(i, adapt);
        }
        self.update_shift()?;
        for k in 0..self.re_scale_ad.len() {
            self.update_re_scale(k, adapt);
        }
        self.update_error_block(adapt);
        if self.state.indicators.is_some() {
            self.update_indicators_and_alpha()?;
        }
        self.update_covariance()?;
        if observe {
            self.beta_prop.observe(&self.state.beta);
            let x = self.error_coords();
            self.error_prop.observe(&x);
            for i in 0..self.b_props.len() {
                let b = self.state.b[i].clone();
                self.b_props[i].observe(&b);
            }
        }
        Ok(())
    }

    fn reset_counts(&mut self) {
        self.beta_prop.adapter.reset_counts();
        for p in &mut self.b_props {
            p.adapter.reset_counts();
        }
        self.error_prop.adapter.reset_counts();
        for a in &mut self.re_scale_ad {
            a.reset_counts();
        }
    }

    fn acceptance(&self) -> Vec<(String, f64)> {
        let mut out = vec![("beta".to_string(), self.beta_prop.adapter.acceptance_rate())];
        let b = self.b_props.iter().map(|p| p.adapter.acceptance_rate()).sum::<f64>() / self.b_props.len() as f64;
        out.push(("b".into(), b));
        out.push(("error".into(), self.error_prop.adapter.acceptance_rate()));
        out.push((
            "re_scale".into(),
            self.re_scale_ad.iter().map(|a| a.acceptance_rate()).sum::<f64>() / self.re_scale_ad.len().max(1) as f64,
        ));
        out
    }

    fn run(mut self, stream: RngStream) -> Result<ChainDraws> {
        let cfg = self.cfg;
        let observe_from = cfg.n_adapt / 5;
        for it in 0..cfg.n_adapt {
            self.sweep(true, it >= observe_from)?;
        }
        self.reset_counts();
        for _ in 0..cfg.n_burnin {
            self.sweep(false, false)?;
        }
        let n_kept = cfg.n_kept();
        let mut out = ChainDraws {
            stream,
            iterations: Vec::with_capacity(n_kept),
            values: Vec::with_capacity(n_kept),
            random_effects: Vec::with_capacity(if cfg.keep_random_effects { n_kept } else { 0 }),
            acceptance: vec![],
            contamination_prob: vec![],
        };
        let track_contamination = self.model.spec().family.has_alpha();
        let mut contamination = vec![0.0; if track_contamination { self.model.n_obs() } else { 0 }];
        for it in 0..cfg.n_iter {
            self.sweep(false, false)?;
            if (it + 1) % cfg.thin != 0 || out.values.len() >= n_kept {
                continue;
            }
            out.iterations.push(it);
            out.values.push(self.state.tracked());
            if cfg.keep_random_effects {
                out.random_effects.push(self.state.b.iter().flatten().copied().collect());
            }
            if track_contamination {
                let mut k = 0;
                for i in 0..self.mu.len() {
                    for (y, m) in self.model.responses(i).iter().zip(&self.mu[i]) {
                        contamination[k] += self.em.contamination_prob(y - m);
                        k += 1;
                    }
                }
            }
        }
        let kept = out.values.len().max(1) as f64;
        out.contamination_prob = contamination.into_iter().map(|c| c / kept).collect();
        out.acceptance = self.acceptance();
        Ok(out)
    }
}

/// Runs all chains (concurrently, merged by chain index). Chain `c` uses the
/// stream `(cfg.seed, c)`, so results do not depend on thread scheduling.
pub fn run_sampler(model: &Model, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let chains = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let stream = RngStream::new(cfg.seed, c as u64);
            Chain::new(model, cfg, stream)?.run(stream)
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = model.spec();
    Ok(PosteriorDraws {
        family: spec.family,
        p: spec.p(),
        d: spec.d(),
        names: spec.tracked_names(),
        subject_ids: (0..model.n_subjects()).map(|i| model.subject_id(i).to_string()).collect(),
        chains,
    })
}

/// Convenience wrapper binding `spec` to `data` first.
pub fn fit(spec: &ModelSpec, data: &LongitudinalDataset, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    run_sampler(&Model::new(spec.clone(), data)?, cfg)
}

/// Checks that `state` has a positive-definite precision; used by tests.
#[allow(dead_code)]
pub(crate) fn precision_ok(state: &ParamState) -> bool {
    log_det_spd(&state.omega).is_ok()
}
