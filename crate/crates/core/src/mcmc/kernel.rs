//! Adaptive random-walk Metropolis proposals.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Robbins–Monro batch length.
pub const BATCH: usize = 50;
const DECAY: f64 = 0.7;
const GAIN: f64 = 5.0;

/// Log proposal scale tuned toward a target acceptance rate, adjusted every
/// [`BATCH`] proposals by `5·k^{-0.7}·(rate − target)` on the log scale.
#[derive(Debug, Clone)]
pub struct ScaleAdapter {
    pub log_scale: f64,
    target: f64,
    batch_accepts: usize,
    batch_total: usize,
    batches: usize,
    accepts: usize,
    total: usize,
}

impl ScaleAdapter {
    pub fn new(scale: f64, target: f64) -> Self {
        Self {
            log_scale: scale.ln(),
            target,
            batch_accepts: 0,
            batch_total: 0,
            batches: 0,
            accepts: 0,
            total: 0,
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Records an outcome; returns true when a batch boundary was crossed
    /// and `adapt` is set, after updating the scale.
    pub fn record(&mut self, accepted: bool, adapt: bool) -> bool {
        self.total += 1;
        self.batch_total += 1;
        if accepted {
            self.accepts += 1;
            self.batch_accepts += 1;
        }
        if self.batch_total < BATCH {
            return false;
        }
        let rate = self.batch_accepts as f64 / self.batch_total as f64;
        self.batch_accepts = 0;
        self.batch_total = 0;
        if !adapt {
            return false;
        }
        self.batches += 1;
        self.log_scale += GAIN * (self.batches as f64).powf(-DECAY) * (rate - self.target);
        true
    }

    /// Clears the acceptance counters, e.g. when adaptation is frozen.
    pub fn reset_counts(&mut self) {
        self.accepts = 0;
        self.total = 0;
        self.batch_accepts = 0;
        self.batch_total = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.accepts as f64 / self.total as f64
        }
    }
}

/// Symmetric Gaussian random-walk on a vector with a learned covariance
/// (empirical covariance of the chain so far, Haario-style) and an adapted
/// global scale.
#[derive(Debug, Clone)]
pub struct BlockProposal {
    pub adapter: ScaleAdapter,
    chol: DMatrix<f64>,
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl BlockProposal {
    /// `sd` gives the initial per-coordinate proposal spread.
    pub fn new(sd: &[f64], target: f64) -> Self {
        let dim = sd.len();
        let chol = DMatrix::from_diagonal(&DVector::from_column_slice(sd));
        Self {
            adapter: ScaleAdapter::new(2.38 / (dim as f64).sqrt(), target),
            chol,
            n: 0,
            mean: DVector::zeros(dim),
            m2: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn propose<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let dim = x.len();
        let z = DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(rng)));
        let step = &self.chol * z * self.adapter.scale();
        x.iter().zip(step.iter()).map(|(a, b)| a + b).collect()
    }

    /// Adds the current position to the running covariance estimate.
    pub fn observe(&mut self, x: &[f64]) {
        self.n += 1;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    /// Replaces the proposal shape with the empirical covariance when enough
    /// history exists; the covariance is regularized to stay positive definite.
    pub fn refresh_shape(&mut self) {
        let dim = self.dim();
        if self.n < 10 * dim.max(2) {
            return;
        }
        let mut cov = &self.m2 / (self.n - 1) as f64;
        let ridge = 1e-6 * (cov.trace() / dim as f64).max(1e-12);
        for k in 0..dim {
            cov[(k, k)] += ridge;
        }
        if let Some(c) = cov.cholesky() {
            self.chol = c.l();
        }
    }
}

/// Metropolis accept/reject on log densities.
#[inline]
pub fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if !log_ratio.is_finite() {
        return false;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}
