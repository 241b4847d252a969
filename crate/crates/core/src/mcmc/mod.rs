//! Adaptive Metropolis-within-Gibbs sampler, convergence diagnostics and
//! posterior summaries.

mod config;
mod conjugate;
mod convergence;
mod draws;
pub(crate) use draws::format_f64;
mod init;
pub mod kernel;
mod sampler;
mod summary;

pub use config::SamplerConfig;
pub use conjugate::{sample_omega, sample_psi, sample_wishart};
pub use convergence::{ess, split_rhat, ConvergenceReport, ParamConvergence, RHAT_THRESHOLD};
pub use draws::{ChainDraws, PosteriorDraws};
pub use init::{initial_estimate, initialize_state, ordering_holds};
pub use sampler::{fit, run_sampler};
pub use summary::{
    hpd_interval, median, posterior_summary, predict_quantile_trajectory, PosteriorSummary, SummaryRow,
    TrajectoryPoint, DEFAULT_CD4_MODEL, DEFAULT_SCHEDULE,
};
