use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::special::log_add_exp;

/// Mean-structure of the conditional quantile.
///
/// Linear design columns name either `intercept`, `time` or a dataset
/// covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Link {
    Linear {
        fixed: Vec<String>,
        #[serde(default)]
        random: Vec<String>,
    },
    /// Two-phase decay with a covariate on the second rate; `p = 5`, `d = 4`.
    Biphasic {
        #[serde(default = "default_covariate")]
        covariate: String,
    },
    /// Two-phase decay with the second phase held fixed; `p = 2`, `d = 2`.
    BiphasicShort { beta3: f64, beta4: f64 },
}

fn default_covariate() -> String {
    "cd4".into()
}

impl Link {
    pub fn n_fixed(&self) -> usize {
        match self {
            Link::Linear { fixed, .. } => fixed.len(),
            Link::Biphasic { .. } => 5,
            Link::BiphasicShort { .. } => 2,
        }
    }

    pub fn n_random(&self) -> usize {
        match self {
            Link::Linear { random, .. } => random.len(),
            Link::Biphasic { .. } => 4,
            Link::BiphasicShort { .. } => 2,
        }
    }

    pub fn is_biphasic(&self) -> bool {
        !matches!(self, Link::Linear { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Link::Linear { .. } => "linear",
            Link::Biphasic { .. } => "biphasic",
            Link::BiphasicShort { .. } => "biphasic_short",
        }
    }
}

/// Fixed and random effects of the two-phase decay curve.
///
/// `log P1 = β1 + b1`, `λ1 = β2 + b2`, `log P2 = β3 + b3`,
/// `λ2 = β4 + β5·cd4 + b4`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiphasicParams<T: Real = f64> {
    pub beta: [T; 5],
    pub b: [T; 4],
}

/// `log10(P1 e^{−λ1 t} + P2 e^{−λ2 t})`, evaluated on the log scale.
pub fn biphasic_mu<T: Real>(params: &BiphasicParams<T>, t: T, cd4: T) -> T {
    let [b1, b2, b3, b4, b5] = params.beta;
    let [r1, r2, r3, r4] = params.b;
    let a1 = b1 + r1 - (b2 + r2) * t;
    let a2 = b3 + r3 - (b4 + b5 * cd4 + r4) * t;
    log_add_exp(a1, a2) * T::LOG10_E()
}

/// `βᵀx + bᵀz` for a fixed row `x` and random row `z`.
pub fn linear_mu<T: Real>(beta: &[T], b: &[T], x: &[T], z: &[T]) -> Result<T> {
    if beta.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            got: x.len(),
        });
    }
    if b.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: z.len(),
        });
    }
    let fixed = beta.iter().zip(x).fold(T::zero(), |acc, (&u, &v)| acc + u * v);
    Ok(b.iter().zip(z).fold(fixed, |acc, (&u, &v)| acc + u * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn biphasic_at_zero() {
        let p: BiphasicParams<f64> = BiphasicParams {
            beta: [11.5, 5.5, 3.5, 0.05, 0.0],
            b: [0.0; 4],
        };
        let want = (11.5f64.exp() + 3.5f64.exp()).log10();
        assert!((biphasic_mu(&p, 0.0, 0.0) - want).abs() < 1e-12);
        assert!((want - 4.9945).abs() < 1e-4);
    }

    #[test]
    fn biphasic_no_overflow_and_decreasing() {
        let p: BiphasicParams<f64> = BiphasicParams {
            beta: [800.0, 5.5, 700.0, 0.05, 0.0],
            b: [0.0; 4],
        };
        assert!(biphasic_mu(&p, 0.0, 0.0).is_finite());
        let p: BiphasicParams<f64> = BiphasicParams {
            beta: [11.5, 5.5, 3.5, 0.05, 0.0],
            b: [0.0; 4],
        };
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let m = biphasic_mu(&p, k as f64 * 5.0, 0.0);
            assert!(m < prev);
            prev = m;
        }
        assert!(prev < -20.0);
    }

    #[test]
    fn biphasic_label_swap() {
        let cd4: f64 = 3.1;
        let p: BiphasicParams<f64> = BiphasicParams {
            beta: [10.0, 1.2, 4.0, 0.1, 0.02],
            b: [0.3, -0.2, 0.1, 0.05],
        };
        let lam2 = p.beta[3] + p.beta[4] * cd4;
        let q = BiphasicParams {
            beta: [p.beta[2], lam2, p.beta[0], p.beta[1], 0.0],
            b: [p.b[2], p.b[3], p.b[0], p.b[1]],
        };
        for t in [0.0, 1.0, 7.5, 30.0] {
            assert!((biphasic_mu(&p, t, cd4) - biphasic_mu(&q, t, cd4)).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_examples() {
        assert_eq!(linear_mu(&[0.0, 0.0], &[], &[1.0, 3.0], &[]).unwrap(), 0.0);
        assert_eq!(linear_mu(&[1.0, 2.0], &[], &[1.0, 3.0], &[]).unwrap(), 7.0);
        assert_eq!(linear_mu(&[1.0, 2.0], &[0.5], &[1.0, 3.0], &[1.0]).unwrap(), 7.5);
        assert!(linear_mu(&[1.0], &[], &[1.0, 3.0], &[]).is_err());
    }
}
