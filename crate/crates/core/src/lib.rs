//! Bayesian mixed-effects quantile regression with asymmetric Laplace (AL),
//! generalized asymmetric Laplace (GAL) and contaminated GAL (cGAL) errors.
//!
//! The density, quadrature and summary-statistic kernels are generic over
//! [`num::Real`]; the aliases below fix the scalar to `f64`, which is what the
//! model, sampler and simulation layers use.

pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod mcmc;
pub mod model;
pub mod num;
pub mod quad;
pub mod rng;
pub mod root;
pub mod sim;
pub mod special;

pub use dist::Family;
pub use error::{Error, Result};
pub use num::Real;
pub use rng::RngStream;

pub type QuantileLevel = dist::QuantileLevel<f64>;
pub type AlParams = dist::AlParams<f64>;
pub type GalParams = dist::GalParams<f64>;
pub type GalShape = dist::GalShape<f64>;
pub type CgalParams = dist::CgalParams<f64>;
pub type QuantileLikelihood = dist::QuantileLikelihood<f64>;

pub type QuantileLevel32 = dist::QuantileLevel<f32>;
pub type GalParams32 = dist::GalParams<f32>;
pub type CgalParams32 = dist::CgalParams<f32>;
