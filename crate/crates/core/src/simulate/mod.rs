//! Monte Carlo simulation of the dynamics on aggregate states, with
//! replicate averaging and time-varying populations.

mod churn;
mod engine;
pub mod experiments;
mod replicate;

pub use churn::{
    load_churn_schedule, parse_churn_schedule, simulate_time_varying, ChurnEvent, ChurnKind,
    ChurnOptions, ChurnTrace, RegimeTime, CHURN_SCHEMA_VERSION,
};
pub use engine::{simulate, Hit, SimOptions, Trace, DEFAULT_SAMPLE_DT};
pub use replicate::{
    first_crossing, replicate_rng, run_replicates, simulate_lll, simulate_mlll, simulate_prior,
    Summary, TraceReport, Z95,
};
