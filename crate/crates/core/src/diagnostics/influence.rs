use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::log_sum_exp;

/// Calibration at or above which an observation counts as influential.
pub const CALIBRATION_LEVEL: f64 = 0.999;

/// Exported KL values are capped here; internal values are not.
pub const KL_EXPORT_CAP: f64 = 10.0;

/// Monte Carlo KL divergence between the full posterior and the posterior
/// with one observation removed, from that observation's per-draw
/// log predictive densities: `log mean(1/P) + mean(log P)`.
pub fn kl_influence(log_p: &[f64]) -> Result<f64> {
    if log_p.is_empty() {
        return Err(Error::InsufficientDraws { needed: 1, got: 0 });
    }
    if let Some(bad) = log_p.iter().find(|v| !v.is_finite()) {
        return Err(Error::DegenerateDraws(format!("non-finite log density {bad}")));
    }
    let k = log_p.len() as f64;
    let neg: Vec<f64> = log_p.iter().map(|v| -v).collect();
    let mean_log = log_p.iter().sum::<f64>() / k;
    Ok(log_sum_exp(&neg) - k.ln() + mean_log)
}

/// `0.5·(1 + √(1 − e^{−2·kl}))` and whether it reaches [`CALIBRATION_LEVEL`].
/// Negative Monte Carlo noise is treated as zero.
pub fn influence_flag(kl: f64) -> (f64, bool) {
    let kl = kl.max(0.0);
    let cal = 0.5 * (1.0 + (-(-2.0 * kl).exp_m1()).sqrt());
    (cal, cal >= CALIBRATION_LEVEL)
}

/// KL value at which the calibration equals [`CALIBRATION_LEVEL`].
pub fn kl_threshold() -> f64 {
    let s = 2.0 * CALIBRATION_LEVEL - 1.0;
    -(1.0 - s * s).ln() / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRecord {
    pub subject: String,
    pub index: usize,
    pub time: f64,
    pub kl: f64,
    pub calibration: f64,
    pub influential: bool,
}

impl InfluenceRecord {
    pub fn new(subject: String, index: usize, time: f64, kl: f64) -> Self {
        let (calibration, influential) = influence_flag(kl);
        Self {
            subject,
            index,
            time,
            kl,
            calibration,
            influential,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_density_has_zero_kl() {
        assert!(kl_influence(&[-1.7; 200]).unwrap().abs() < 1e-14);
    }

    #[test]
    fn two_point_hand_value() {
        // log(½(e¹ + e³)) − 2
        let want = (0.5 * (1f64.exp() + 3f64.exp())).ln() - 2.0;
        let got = kl_influence(&[-1.0, -3.0]).unwrap();
        assert!((got - want).abs() < 1e-14);
        assert!((got - 0.43379).abs() < 1e-5);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(kl_influence(&[-1.0, f64::NEG_INFINITY]), Err(Error::DegenerateDraws(_))));
        assert!(kl_influence(&[]).is_err());
    }

    #[test]
    fn flag_boundary() {
        assert_eq!(influence_flag(0.0), (0.5, false));
        let t = kl_threshold();
        assert!((t - 2.7612).abs() < 1e-4);
        assert!((influence_flag(t).0 - 0.999).abs() < 1e-12);
        assert!(!influence_flag(t - 1e-6).1);
        assert!(influence_flag(t + 1e-6).1);
        assert!(influence_flag(10.0).1);
    }

    #[test]
    fn calibration_increasing_to_one() {
        let mut last = 0.0;
        for k in 0..200 {
            let c = influence_flag(k as f64 * 0.05).0;
            assert!(c > last || (c == 1.0 && last == 1.0));
            last = c;
        }
        assert!((influence_flag(50.0).0 - 1.0).abs() < 1e-15);
    }
}
