use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::settings::SimulationSetting;
use crate::estimators::{
    asymptotic_variances, classic_estimates, estimated_variances, unbiased_estimates, EstimateFamily,
    EstimatorError, FamilyVariances,
};
use crate::mle::fit_with_correction;
use crate::model::{population_truths, PopulationParams};
use crate::quantity::Quantity;
use crate::table::ContingencyTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("at least 2 replicates are needed, got {0}")]
    TooFewReplicates(usize),
    #[error("unknown setting id {0}; valid ids are 1..=48")]
    UnknownSetting(usize),
    #[error("unknown target `{0}` (expected delta, alphaI or sI)")]
    UnknownTarget(String),
    #[error("target {target} needs category {index} but the setting has {k} categories")]
    TargetOutOfRange { target: Target, index: usize, k: usize },
    #[error("sample size must be positive")]
    EmptySample,
    #[error("asymptotic variance: {0}")]
    Asymptotic(#[from] EstimatorError),
}

/// Parameter summarised by a simulation run. Category indices are 0-based
/// internally and 1-based in text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Target {
    Delta,
    Alpha(usize),
    Consistency(usize),
}

impl Target {
    /// Global agreement and category 3, the standard study columns.
    pub const DEFAULTS: [Target; 3] = [Target::Delta, Target::Alpha(2), Target::Consistency(2)];

    fn category(self) -> Option<usize> {
        match self {
            Target::Delta => None,
            Target::Alpha(i) | Target::Consistency(i) => Some(i),
        }
    }

    fn estimate(self, family: &EstimateFamily) -> Quantity {
        match self {
            Target::Delta => Quantity::Value(family.delta),
            Target::Alpha(i) => Quantity::Value(family.alpha[i]),
            Target::Consistency(i) => family.consistency[i],
        }
    }

    fn variance(self, v: &FamilyVariances) -> Quantity {
        match self {
            Target::Delta => v.delta,
            Target::Alpha(i) => v.alpha[i],
            Target::Consistency(i) => v.consistency[i],
        }
    }

    /// Column headers in the reference order: the global-agreement table
    /// pairs each empirical variance with its mean estimate, the per-category
    /// tables list both empirical variances first.
    pub fn headers(self) -> Vec<String> {
        let t = self.to_string();
        let mut h = vec!["id".into(), "K".into(), "n".into(), t.clone(), format!("mean_{t}"), format!("mean_{t}_u")];
        h.push(format!("va_{t}"));
        match self {
            Target::Delta => h.extend([
                format!("ve_{t}"),
                format!("mean_vhat_{t}"),
                format!("ve_{t}_u"),
                format!("mean_vhat_{t}_u"),
            ]),
            _ => h.extend([
                format!("ve_{t}"),
                format!("ve_{t}_u"),
                format!("mean_vhat_{t}"),
                format!("mean_vhat_{t}_u"),
            ]),
        }
        h.extend(
            ["replicates", "used", "corrected", "boundary", "failed", "undefined", "singular_vhat", "singular_vhat_u", "seed"]
                .map(String::from),
        );
        h
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Delta => write!(f, "delta"),
            Target::Alpha(i) => write!(f, "alpha{}", i + 1),
            Target::Consistency(i) => write!(f, "s{}", i + 1),
        }
    }
}

impl FromStr for Target {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "delta" {
            return Ok(Target::Delta);
        }
        let parse = |rest: &str| rest.parse::<usize>().ok().filter(|&i| i >= 1).map(|i| i - 1);
        let parsed = if let Some(rest) = lower.strip_prefix("alpha") {
            parse(rest).map(Target::Alpha)
        } else if let Some(rest) = lower.strip_prefix('s') {
            parse(rest).map(Target::Consistency)
        } else {
            None
        };
        parsed.ok_or_else(|| SimError::UnknownTarget(s.to_string()))
    }
}

impl From<Target> for String {
    fn from(t: Target) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for Target {
    type Error = SimError;

    fn try_from(s: String) -> Result<Self, SimError> {
        s.parse()
    }
}

/// Draws a multinomial table of `n` observations from the model's cell
/// probabilities.
pub fn sample_table<R: Rng + ?Sized>(params: &PopulationParams, n: u32, rng: &mut R) -> ContingencyTable {
    assert!(n > 0, "sample size must be positive");
    let k = params.k();
    let weights: Vec<f64> = params.joint_probabilities().into_iter().flatten().map(|p| p.max(0.0)).collect();
    let dist = WeightedIndex::new(&weights).expect("cell probabilities sum to 1");
    let mut counts = vec![0u32; k * k];
    for _ in 0..n {
        counts[dist.sample(rng)] += 1;
    }
    ContingencyTable::from_counts(k, &counts).expect("n > 0 observations")
}

/// Generator for replicate `index` of a run: the same seed always yields the
/// same stream for a given replicate, whatever the scheduling.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Aggregated results for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub setting: usize,
    pub label: String,
    pub k: usize,
    pub n: u32,
    pub target: Target,
    pub truth: Quantity,
    pub mean_classic: Quantity,
    pub mean_unbiased: Quantity,
    pub va: Quantity,
    /// Sample variance (divisor N - 1) of the classic estimates.
    pub ve_classic: Quantity,
    pub ve_unbiased: Quantity,
    pub mean_vhat_classic: Quantity,
    pub mean_vhat_unbiased: Quantity,
    pub replicates: usize,
    /// Replicates contributing to the estimate columns.
    pub used: usize,
    /// Fits that needed 0.5 added to every cell.
    pub corrected: usize,
    pub boundary: usize,
    pub failed: usize,
    /// Replicates where this target's estimate is undefined.
    pub undefined: usize,
    pub singular_vhat_classic: usize,
    pub singular_vhat_unbiased: usize,
    pub seed: u64,
}

impl SimulationSummary {
    /// Row values in [`Target::headers`] order, numbers at `decimals` places.
    pub fn row(&self, decimals: usize) -> Vec<String> {
        let q = |x: Quantity| x.display(decimals);
        let mut r = vec![self.label.clone(), self.k.to_string(), self.n.to_string(), q(self.truth)];
        r.extend([q(self.mean_classic), q(self.mean_unbiased), q(self.va)]);
        match self.target {
            Target::Delta => {
                r.extend([q(self.ve_classic), q(self.mean_vhat_classic), q(self.ve_unbiased), q(self.mean_vhat_unbiased)])
            }
            _ => r.extend([q(self.ve_classic), q(self.ve_unbiased), q(self.mean_vhat_classic), q(self.mean_vhat_unbiased)]),
        }
        r.extend(
            [
                self.replicates,
                self.used,
                self.corrected,
                self.boundary,
                self.failed,
                self.undefined,
                self.singular_vhat_classic,
                self.singular_vhat_unbiased,
            ]
            .map(|c| c.to_string()),
        );
        r.push(self.seed.to_string());
        r
    }
}

struct Estimates {
    classic: EstimateFamily,
    unbiased: EstimateFamily,
    var_classic: FamilyVariances,
    var_unbiased: FamilyVariances,
}

enum Outcome {
    Fitted { corrected: bool, estimates: Box<Estimates> },
    Boundary,
    Failed,
}

fn replicate(setting: &SimulationSetting, seed: u64, index: u64) -> Outcome {
    let mut rng = replicate_rng(seed, index);
    let table = sample_table(&setting.params, setting.n, &mut rng);
    let Ok(cf) = fit_with_correction(&table) else { return Outcome::Failed };
    if cf.fit.boundary {
        return Outcome::Boundary;
    }
    let run = || -> Result<Estimates, EstimatorError> {
        let classic = classic_estimates(&cf.fit, &cf.table)?;
        let unbiased = unbiased_estimates(&cf.fit, &cf.table)?;
        let var_classic = estimated_variances(&cf.fit, &cf.table, &classic)?;
        let var_unbiased = estimated_variances(&cf.fit, &cf.table, &unbiased)?;
        Ok(Estimates { classic, unbiased, var_classic, var_unbiased })
    };
    match run() {
        Ok(e) => Outcome::Fitted { corrected: cf.corrected, estimates: Box::new(e) },
        Err(_) => Outcome::Failed,
    }
}

fn mean_and_variance(xs: &[f64]) -> (Quantity, Quantity) {
    let n = xs.len();
    if n == 0 {
        return (Quantity::Undefined, Quantity::Undefined);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        Quantity::Value(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64)
    } else {
        Quantity::Undefined
    };
    (Quantity::Value(mean), var)
}

fn mean(xs: &[f64]) -> Quantity {
    mean_and_variance(xs).0
}

/// Runs `replicates` samples of one setting and summarises each target.
///
/// Samples whose likelihood equations have no admissible root are refitted
/// with 0.5 added to every cell (counted in `corrected`). Boundary fits and
/// failures are excluded from every column and counted. A replicate whose
/// estimate is undefined for a target is excluded from that target only; a
/// singular variance is excluded from the mean-variance column only.
///
/// Replicates run in parallel; results are reduced in replicate order, so
/// output is bit-identical for a given seed whatever the thread count.
pub fn run_setting(
    setting: &SimulationSetting,
    replicates: usize,
    seed: u64,
    targets: &[Target],
) -> Result<Vec<SimulationSummary>, SimError> {
    if replicates < 2 {
        return Err(SimError::TooFewReplicates(replicates));
    }
    if setting.n == 0 {
        return Err(SimError::EmptySample);
    }
    let k = setting.k();
    for &target in targets {
        if let Some(index) = target.category().filter(|&i| i >= k) {
            return Err(SimError::TargetOutOfRange { target, index: index + 1, k });
        }
    }
    let truths = population_truths(&setting.params);
    let va = asymptotic_variances(&setting.params, f64::from(setting.n))?;

    let outcomes: Vec<Outcome> =
        (0..replicates as u64).into_par_iter().map(|h| replicate(setting, seed, h)).collect();

    let (mut boundary, mut failed, mut corrected) = (0, 0, 0);
    for o in &outcomes {
        match o {
            Outcome::Boundary => boundary += 1,
            Outcome::Failed => failed += 1,
            Outcome::Fitted { corrected: true, .. } => corrected += 1,
            Outcome::Fitted { .. } => {}
        }
    }

    let summaries = targets
        .iter()
        .map(|&target| {
            let (mut c, mut u, mut vc, mut vu) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            let (mut undefined, mut singular_c, mut singular_u) = (0, 0, 0);
            for o in &outcomes {
                let Outcome::Fitted { estimates: e, .. } = o else { continue };
                match (target.estimate(&e.classic), target.estimate(&e.unbiased)) {
                    (Quantity::Value(a), Quantity::Value(b)) => {
                        c.push(a);
                        u.push(b);
                    }
                    _ => {
                        undefined += 1;
                        continue;
                    }
                }
                match target.variance(&e.var_classic) {
                    Quantity::Value(v) => vc.push(v),
                    _ => singular_c += 1,
                }
                match target.variance(&e.var_unbiased) {
                    Quantity::Value(v) => vu.push(v),
                    _ => singular_u += 1,
                }
            }
            let (mean_classic, ve_classic) = mean_and_variance(&c);
            let (mean_unbiased, ve_unbiased) = mean_and_variance(&u);
            let truth = match target {
                Target::Delta => Quantity::Value(truths.delta),
                Target::Alpha(i) => Quantity::Value(setting.params.alpha()[i]),
                Target::Consistency(i) => truths.consistency[i],
            };
            SimulationSummary {
                setting: setting.id,
                label: setting.label.clone(),
                k,
                n: setting.n,
                target,
                truth,
                mean_classic,
                mean_unbiased,
                va: target.variance(&va),
                ve_classic,
                ve_unbiased,
                mean_vhat_classic: mean(&vc),
                mean_vhat_unbiased: mean(&vu),
                replicates,
                used: c.len(),
                corrected,
                boundary,
                failed,
                undefined,
                singular_vhat_classic: singular_c,
                singular_vhat_unbiased: singular_u,
                seed,
            }
        })
        .collect();
    Ok(summaries)
}

/// Looks up a built-in setting by id.
pub fn builtin_setting(id: usize) -> Result<SimulationSetting, SimError> {
    super::settings::builtin_settings().into_iter().find(|s| s.id == id).ok_or(SimError::UnknownSetting(id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setting1() -> SimulationSetting {
        builtin_setting(1).unwrap()
    }

    #[test]
    fn target_parsing() {
        assert_eq!("delta".parse::<Target>().unwrap(), Target::Delta);
        assert_eq!("alpha3".parse::<Target>().unwrap(), Target::Alpha(2));
        assert_eq!("S3".parse::<Target>().unwrap(), Target::Consistency(2));
        assert!("alpha0".parse::<Target>().is_err());
        assert!("kappa".parse::<Target>().is_err());
        assert_eq!(Target::Consistency(2).to_string(), "s3");
    }

    #[test]
    fn headers_and_rows_align() {
        let s = run_setting(&setting1(), 20, 7, &Target::DEFAULTS).unwrap();
        for summary in &s {
            assert_eq!(summary.row(4).len(), summary.target.headers().len());
        }
        assert_eq!(Target::Delta.headers()[8], "mean_vhat_delta");
        assert_eq!(Target::Alpha(2).headers()[8], "ve_alpha3_u");
    }

    #[test]
    fn single_observation_sample() {
        let mut rng = replicate_rng(1, 0);
        let t = sample_table(&setting1().params, 1, &mut rng);
        let nonzero = t.to_rows().into_iter().flatten().filter(|&x| x > 0.0).count();
        assert_eq!(nonzero, 1);
        assert_eq!(t.n(), 1.0);
    }

    #[test]
    fn sampling_replays() {
        let p = setting1().params;
        let a = sample_table(&p, 30, &mut replicate_rng(42, 3));
        let b = sample_table(&p, 30, &mut replicate_rng(42, 3));
        let c = sample_table(&p, 30, &mut replicate_rng(42, 4));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn cell_frequencies_match_probabilities() {
        let p = setting1().params;
        let joint = p.joint_probabilities();
        let reps = 100_000u64;
        let mut totals = vec![0.0; 9];
        let mut rng = replicate_rng(11, 0);
        for _ in 0..reps {
            let t = sample_table(&p, 30, &mut rng);
            for (i, x) in t.to_rows().into_iter().flatten().enumerate() {
                totals[i] += x;
            }
        }
        let draws = reps as f64 * 30.0;
        for (i, total) in totals.iter().enumerate() {
            let pij = joint[i / 3][i % 3];
            let se = (pij * (1.0 - pij) / draws).sqrt();
            assert!((total / draws - pij).abs() < 3.0 * se, "cell {i}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(run_setting(&setting1(), 1, 0, &[Target::Delta]), Err(SimError::TooFewReplicates(1)));
        assert!(matches!(
            run_setting(&setting1(), 10, 0, &[Target::Alpha(4)]),
            Err(SimError::TargetOutOfRange { index: 5, k: 3, .. })
        ));
        assert_eq!(builtin_setting(99), Err(SimError::UnknownSetting(99)));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let s = setting1();
        let a = run_setting(&s, 200, 5, &Target::DEFAULTS).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_setting(&s, 200, 5, &Target::DEFAULTS)).unwrap();
        assert_eq!(a, b);
    }
}
