//! Estimation toolkit for the *delta* model of agreement between two raters.
//!
//! Under the delta model the probability that rater 1 answers `i` and rater 2
//! answers `j` is
//!
//! ```text
//! p_ij = [i == j] * alpha_i + (1 - Delta) * pi_i1 * pi_j2,   Delta = sum(alpha_i)
//! ```
//!
//! where `alpha_i` is the non-random agreement in category `i` and `pi_ir` is
//! the distribution rater `r` follows when answering at random. The crate
//! provides:
//!
//! * [`table`] and [`model`]: count tables, population parameters and the
//!   forward map above.
//! * [`mle`]: the maximum-likelihood solver.
//! * [`estimators`]: classic, bias-corrected (`U`) and alternative (`AC`)
//!   estimators of `Delta`, `alpha_i` and the consistency `S_i`, with their
//!   asymptotic and estimated variances.
//! * [`special`]: the two-category pathway and gold-standard conformity and
//!   predictivity.
//! * [`kappa`]: Cohen's kappa, for side-by-side reporting.
//! * [`sim`]: the Monte Carlo study engine and its built-in settings.
//! * [`io`] and [`report`]: table parsing and the analysis report.

pub mod estimators;
pub mod io;
pub mod kappa;
pub mod mle;
pub mod model;
pub mod quantity;
pub mod report;
pub mod sim;
pub mod special;
pub mod table;

pub use estimators::{
    ac_estimates, asymptotic_variances, bias_terms, chance_quantities, classic_estimates, estimated_variances, estimates,
    expected_bias, unbiased_estimates, AsymptoticVariances,
    BiasTerms, ChanceQuantities, ChanceTerm, EstimateFamily, EstimatorError, Family, FamilyVariances,
};
pub use kappa::{cohen_kappa, KappaError, KappaResult};
pub use mle::{fit_delta_mle, fit_with_correction, CorrectedFit, Disagreements, FitError, MleFit};
pub use model::{consistency, population_truths, CategoryMargins, ModelError, PopulationParams, Truths};
pub use quantity::Quantity;
pub use report::{build_report, AnalysisError, AnalysisReport, GoldStandard, ReportOptions};
pub use io::{load_setting, load_table, parse_table, InputError};
pub use sim::{builtin_settings, run_setting, sample_table, SimError, SimulationSetting, SimulationSummary, Target};
pub use special::{augment_2x2, fit_2x2, gold_standard_stats, GoldStandardStats, SpecialError, StarredEstimates, TwoByTwoReport};
pub use table::{ContingencyTable, TableError};
