//! Monte Carlo study engine: multinomial sampling under a known truth,
//! refitting, and aggregation into bias and variance summaries.

mod settings;
mod study;

pub use settings::{builtin_settings, SimulationSetting};
pub use study::{builtin_setting, replicate_rng, run_setting, sample_table, SimError, SimulationSummary, Target};
