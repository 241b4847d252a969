use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Link, Model, ParamState};

/// Least-squares line `y ≈ a + s·t`; `None` with fewer than two distinct times.
fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt <= 0.0 {
        return None;
    }
    let sty: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let s = sty / stt;
    Some((my - s * mt, s))
}

/// Early phase `(log P1, λ1)` from points on the natural-log scale after the
/// late phase has been subtracted.
fn peel_early(pts: &[(f64, f64)], late: impl Fn(f64) -> f64, lambda2: f64) -> (f64, f64) {
    let early: Vec<(f64, f64)> = pts
        .iter()
        .filter(|&&(t, ly)| ly - late(t) > std::f64::consts::LN_2)
        .map(|&(t, ly)| (t, ly + (-(late(t) - ly).exp()).ln_1p()))
        .collect();
    let t0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let y0 = pts
        .iter()
        .filter(|p| p.0 == t0)
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    match fit_line(&early) {
        Some((a, s)) if -s > lambda2 => (a, -s),
        _ => (y0.max(late(t0) + 1.0), lambda2 + 1.0),
    }
}

fn mad(mut r: Vec<f64>) -> f64 {
    r.sort_by(f64::total_cmp);
    let med = crate::mcmc::median(&r);
    let mut dev: Vec<f64> = r.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    crate::mcmc::median(&dev)
}

/// Deterministic starting point: ordinary least squares for linear links,
/// curve peeling on the natural-log scale for biphasic links. Random effects
/// start at zero and σ comes from the residual MAD.
pub fn initial_estimate(model: &Model) -> Result<ParamState> {
    let spec = model.spec();
    let (p, d, n) = (spec.p(), spec.d(), model.n_subjects());
    let ln10 = std::f64::consts::LN_10;
    let pts: Vec<(f64, f64)> = (0..n)
        .flat_map(|i| {
            model
                .times(i)
                .iter()
                .zip(model.responses(i))
                .map(|(&t, &y)| (t, y * ln10))
                .collect::<Vec<_>>()
        })
        .collect();
    let zero_b = vec![0.0; d];
    let beta = match &spec.link {
        Link::Linear { .. } => {
            let rows = model.n_obs();
            let mut x = DMatrix::zeros(rows, p);
            for k in 0..p {
                let mut e = vec![0.0; p];
                e[k] = 1.0;
                let col: Vec<f64> = (0..n).flat_map(|i| model.mu(&e, &zero_b, i)).collect();
                x.set_column(k, &DVector::from_vec(col));
            }
            let y = DVector::from_iterator(rows, (0..n).flat_map(|i| model.responses(i).to_vec()));
            let svd = x.svd(true, true);
            svd.solve(&y, 1e-12)
                .map_err(|e| Error::InvalidData(format!("least squares failed: {e}")))?
                .iter()
                .copied()
                .collect()
        }
        Link::Biphasic { .. } => {
            let mut times: Vec<f64> = pts.iter().map(|p| p.0).collect();
            times.sort_by(f64::total_cmp);
            let split = crate::mcmc::median(&times);
            let late_pts: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 >= split).collect();
            let (a2, s2) = fit_line(&late_pts).unwrap_or((pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64, 0.0));
            let lambda2 = (-s2).max(1e-3);
            let (a1, lambda1) = peel_early(&pts, |t| a2 - lambda2 * t, lambda2);
            vec![a1, lambda1, a2, lambda2, 0.0]
        }
        Link::BiphasicShort { beta3, beta4 } => {
            let (a1, lambda1) = peel_early(&pts, |t| beta3 - beta4 * t, *beta4);
            vec![a1, lambda1]
        }
    };
    let mut resid = Vec::with_capacity(model.n_obs());
    for i in 0..n {
        let mu = model.mu(&beta, &zero_b, i);
        resid.extend(model.responses(i).iter().zip(&mu).map(|(y, m)| y - m));
    }
    let p0 = spec.p0.get();
    let sigma = (mad(resid) * 2.0 * p0 * (1.0 - p0) / std::f64::consts::LN_2).max(1e-3);
    let pr = &spec.priors;
    Ok(ParamState {
        beta,
        sigma,
        gamma: spec.family.has_gamma().then_some(0.0),
        alpha: spec
            .family
            .has_alpha()
            .then_some(pr.a_alpha / (pr.a_alpha + pr.b_alpha)),
        omega: DMatrix::identity(d, d),
        psi_diag: vec![1.0; d],
        b: vec![zero_b; n],
        indicators: None,
    })
}

/// True when every subject's first-phase rate exceeds its second-phase rate
/// at every observation. Always true for linear links.
pub fn ordering_holds(model: &Model, state: &ParamState) -> bool {
    let (beta, b) = (&state.beta, &state.b);
    match &model.spec().link {
        Link::Linear { .. } => true,
        Link::Biphasic { .. } => (0..model.n_subjects()).all(|i| {
            model
                .covariate(i)
                .iter()
                .all(|cd4| beta[1] + b[i][1] > beta[3] + beta[4] * cd4 + b[i][3])
        }),
        Link::BiphasicShort { beta4, .. } => (0..model.n_subjects()).all(|i| beta[1] + b[i][1] > *beta4),
    }
}

/// Jittered start around [`initial_estimate`]. γ starts in the tenth of
/// the admissible interval around zero and α at its prior mean.
pub fn initialize_state<R: Rng + ?Sized>(model: &Model, ordering: bool, rng: &mut R) -> Result<ParamState> {
    let mut s = initial_estimate(model)?;
    let base = s.clone();
    let mut normal = |sd: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    };
    for _ in 0..50 {
        for (k, b) in s.beta.iter_mut().enumerate() {
            *b = base.beta[k] + normal(0.05 * base.beta[k].abs().max(1.0));
        }
        for bi in &mut s.b {
            for v in bi.iter_mut() {
                *v = normal(0.1);
            }
        }
        if !ordering || ordering_holds(model, &s) {
            break;
        }
        s.beta.clone_from(&base.beta);
        s.b.clone_from(&base.b);
    }
    s.sigma = base.sigma * normal(0.1).exp();
    if s.gamma.is_some() {
        let (lo, hi) = model.gamma_bounds();
        let u: f64 = rng.random();
        s.gamma = Some(0.1 * (lo + (hi - lo) * u));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Family;
    use crate::model::{LongitudinalDataset, ModelSpec, Observation, PriorConfig, Subject};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn biphasic_data() -> LongitudinalDataset {
        let subjects = (0..6)
            .map(|i| Subject {
                id: format!("{i}"),
                observations: (0..9)
                    .map(|t| {
                        let t = t as f64;
                        let y = ((11.5 - 5.5 * t).exp() + (3.5 - 0.05 * t).exp()).log10() + 0.01 * (i as f64 - 2.5);
                        Observation {
                            t,
                            y,
                            covariates: vec![2.0 + 0.1 * i as f64],
                        }
                    })
                    .collect(),
            })
            .collect();
        LongitudinalDataset::new(vec!["cd4".into()], subjects).unwrap()
    }

    #[test]
    fn linear_is_ols() {
        let subjects = vec![Subject {
            id: "a".into(),
            observations: [(0.0, 1.0), (1.0, 2.9), (2.0, 5.2), (3.0, 6.8)]
                .iter()
                .map(|&(t, y)| Observation {
                    t,
                    y,
                    covariates: vec![],
                })
                .collect(),
        }];
        let data = LongitudinalDataset::new(vec![], subjects).unwrap();
        let link = Link::Linear {
            fixed: vec!["intercept".into(), "time".into()],
            random: vec!["intercept".into()],
        };
        let spec = ModelSpec::new(Family::Al, 0.5, link, PriorConfig::baseline()).unwrap();
        let s = initial_estimate(&Model::new(spec, &data).unwrap()).unwrap();
        // Simple regression by hand: Stt = 5, Sty = 9.85.
        assert!((s.beta[1] - 1.97).abs() < 1e-10);
        assert!((s.beta[0] - 1.02).abs() < 1e-10);
    }

    #[test]
    fn biphasic_peeling_and_ordering() {
        let data = biphasic_data();
        for link in [
            Link::Biphasic { covariate: "cd4".into() },
            Link::BiphasicShort { beta3: 3.5, beta4: 0.05 },
        ] {
            let spec = ModelSpec::new(Family::Cgal, 0.5, link, PriorConfig::baseline()).unwrap();
            let model = Model::new(spec, &data).unwrap();
            let s = initial_estimate(&model).unwrap();
            assert!((s.beta[0] - 11.5).abs() < 0.5, "{:?}", s.beta);
            assert!((s.beta[1] - 5.5).abs() < 0.5, "{:?}", s.beta);
            for seed in 0..20 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let st = initialize_state(&model, true, &mut rng).unwrap();
                assert!(ordering_holds(&model, &st));
                assert!(model.loglik(&st).unwrap().is_finite());
                assert!(model.logprior(&st).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn starts_are_overdispersed() {
        let data = biphasic_data();
        let spec = ModelSpec::new(Family::Gal, 0.5, Link::BiphasicShort { beta3: 3.5, beta4: 0.05 }, PriorConfig::baseline()).unwrap();
        let model = Model::new(spec, &data).unwrap();
        let a = initialize_state(&model, true, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = initialize_state(&model, true, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let dist: f64 = a.tracked().iter().zip(b.tracked()).map(|(x, y)| (x - y).powi(2)).sum();
        assert!(dist > 0.0);
    }
}
