use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dist::Family;
use crate::error::{Error, Result};

/// Full parameter state of one fit.
///
/// `omega` is the random-effects precision Σ⁻¹ and `psi_diag` the diagonal of
/// the MGH-t mixing matrix. `indicators[i][j]` marks observations assigned to
/// the inflated-scale component on the augmented cGAL path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub omega: DMatrix<f64>,
    pub psi_diag: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub indicators: Option<Vec<Vec<bool>>>,
}

/// Names of the scalars recorded per draw, in storage order.
pub fn tracked_names(family: Family, p: usize, d: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=p).map(|k| format!("beta{k}")).collect();
    names.push("sigma".into());
    if family.has_gamma() {
        names.push("gamma".into());
    }
    if family.has_alpha() {
        names.push("alpha".into());
    }
    for r in 0..d {
        for c in r..d {
            names.push(format!("omega{}{}", r + 1, c + 1));
        }
    }
    names
}

impl ParamState {
    /// Values matching [`tracked_names`].
    pub fn tracked(&self) -> Vec<f64> {
        let d = self.omega.nrows();
        let mut out = self.beta.clone();
        out.push(self.sigma);
        out.extend(self.gamma);
        out.extend(self.alpha);
        for r in 0..d {
            for c in r..d {
                out.push(self.omega[(r, c)]);
            }
        }
        out
    }

    /// Rebuilds a state from tracked scalars and flattened random effects.
    /// `psi_diag` is not tracked and is set to ones.
    pub fn from_tracked(
        family: Family,
        p: usize,
        d: usize,
        values: &[f64],
        random_effects: &[f64],
    ) -> Result<Self> {
        let expected = tracked_names(family, p, d).len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if d == 0 || random_effects.len() % d != 0 {
            return Err(Error::InvalidState("random effects length not a multiple of d".into()));
        }
        let mut it = values.iter().copied();
        let beta: Vec<f64> = it.by_ref().take(p).collect();
        let sigma = it.next().unwrap();
        let gamma = family.has_gamma().then(|| it.next().unwrap());
        let alpha = family.has_alpha().then(|| it.next().unwrap());
        let mut omega = DMatrix::zeros(d, d);
        for r in 0..d {
            for c in r..d {
                let v = it.next().unwrap();
                omega[(r, c)] = v;
                omega[(c, r)] = v;
            }
        }
        Ok(Self {
            beta,
            sigma,
            gamma,
            alpha,
            omega,
            psi_diag: vec![1.0; d],
            b: random_effects.chunks(d).map(|c| c.to_vec()).collect(),
            indicators: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roster() {
        let n = tracked_names(Family::Cgal, 5, 4);
        assert_eq!(&n[..8], &["beta1", "beta2", "beta3", "beta4", "beta5", "sigma", "gamma", "alpha"]);
        assert_eq!(n.len(), 8 + 10);
        assert_eq!(n[8], "omega11");
        assert_eq!(n[9], "omega12");
        assert_eq!(tracked_names(Family::Al, 2, 2).len(), 2 + 1 + 3);
    }

    #[test]
    fn tracked_round_trip() {
        let mut omega = DMatrix::identity(2, 2);
        omega[(0, 1)] = 0.2;
        omega[(1, 0)] = 0.2;
        let s = ParamState {
            beta: vec![1.0, 2.0],
            sigma: 0.3,
            gamma: Some(-0.1),
            alpha: Some(0.05),
            omega,
            psi_diag: vec![1.0, 1.0],
            b: vec![vec![0.1, 0.2], vec![0.3, 0.4]],
            indicators: None,
        };
        let flat: Vec<f64> = s.b.iter().flatten().copied().collect();
        let back = ParamState::from_tracked(Family::Cgal, 2, 2, &s.tracked(), &flat).unwrap();
        assert_eq!(back, s);
    }
}
