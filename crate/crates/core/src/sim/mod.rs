//! Synthetic two-phase viral-decay studies and frequentist performance
//! summaries of repeated fits.

mod scenario;
mod table;

pub use scenario::{
    generate_dataset, replicate_seed, run_scenario, run_scenario_with, FitOutcome, ReplicateFit, ScenarioResult,
    ScenarioSpec, Truth,
};
pub use table::{summarize_tables, FitCount, PerformanceRow, PerformanceTable, TABLE_HEADER};
