//! Model checking: observation influence, PSIS leave-one-out, simulated
//! residual tests and order-statistic tail measures.

mod influence;
mod lstat;
mod loo;
mod report;
mod residuals;

pub use influence::{influence_flag, kl_influence, kl_threshold, InfluenceRecord, CALIBRATION_LEVEL, KL_EXPORT_CAP};
pub use lstat::{lstat_kurtosis, sample_skewness_kurtosis};
pub use loo::{gpd_fit_pwm, psis_loo, LooReport, K_HAT_WARN};
pub use report::{
    influence_records, pointwise_loglik_matrix, residual_report, simulate_replicates, write_influence_csv,
    write_loo_csv, write_residual_csv, DiagnosticsReport,
};
pub use residuals::{
    dispersion_test, kolmogorov_sf, ks_uniform_test, outlier_binomial_test, scaled_residuals, KsResult,
    ResidualReport,
};
