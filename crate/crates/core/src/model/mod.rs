//! Hierarchical model: data, mean structure, priors, likelihood.

mod data;
mod link;
mod prior;
mod spec;
mod state;

pub use data::{LongitudinalDataset, Observation, Subject};
pub use link::{biphasic_mu, linear_mu, BiphasicParams, Link};
pub use prior::{ln_multigamma, log_det_spd, log_mvn_precision, PriorConfig};
pub use spec::{loglik, logprior, ErrorModel, Model, ModelSpec};
pub use state::{tracked_names, ParamState};
