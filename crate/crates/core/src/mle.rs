//! Maximum-likelihood fitting of the delta model.
//!
//! The fit reduces to `K + 1` equations in the unknowns `(lambda_s, B)`:
//!
//! ```text
//! B = (lambda_s + d_s1)(lambda_s + d_s2) / lambda_s        (one per category)
//! sum_s lambda_s - B + sum_s d_s1 = 0
//! ```
//!
//! with `d_sr` the observed disagreements of rater `r` in category `s`, and
//! `lambda_s = 0` whenever `d_s1 = 0` or `d_s2 = 0`. For fixed `B` each
//! category equation is a quadratic in `lambda_s`; at most one category can
//! take the larger root, because a larger root forces `pi_s1 + pi_s2 >= 1`.
//! The solver therefore scans `K + 1` branches (all smaller roots, or
//! category `k` on the larger root) for sign changes of
//! `g(B) = sum_s lambda_s(B) - B + sum_s d_s1`, refines every bracket by
//! bisection and keeps the root with the highest likelihood.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::ContingencyTable;

/// Grid points per branch in the bracket scan.
pub const SCAN_POINTS: usize = 1024;
/// Upper end of the scan, relative to its lower end.
const SCAN_SPAN: f64 = 1e4;
/// Smallest relative offset above the lower end of the scan.
const SCAN_FIRST_OFFSET: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
/// Accepted `|g(B)|` at a root.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Observed disagreements `d_s1 = p_s. - p_ss` and `d_s2 = p_.s - p_ss`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreements {
    pub rater1: Vec<f64>,
    pub rater2: Vec<f64>,
}

impl Disagreements {
    /// Total observed disagreement, `sum_s d_s1`.
    pub fn total(&self) -> f64 {
        self.rater1.iter().sum()
    }

    /// Whether category `s` has disagreements from both raters, so that its
    /// `lambda_s` is a free unknown.
    pub fn is_active(&self, s: usize) -> bool {
        self.rater1[s] > 0.0 && self.rater2[s] > 0.0
    }
}

pub fn observed_disagreements(table: &ContingencyTable) -> Disagreements {
    let k = table.k();
    let rater1 = (0..k).map(|s| (table.row_total(s) - table.cell(s, s)) / table.n()).collect();
    let rater2 = (0..k).map(|s| (table.col_total(s) - table.cell(s, s)) / table.n()).collect();
    Disagreements { rater1, rater2 }
}

/// Which root of the per-category quadratic a category uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Root {
    Smaller,
    Larger,
}

/// Raised when `B` is too small for a category's quadratic to have real
/// roots; the caller has to move `B` up.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("B = {b} is infeasible for disagreements ({d1}, {d2})")]
pub struct InfeasibleB {
    pub b: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Smallest `B` for which a category with disagreements `(d1, d2)` has real
/// roots: `(sqrt(d1) + sqrt(d2))^2`.
pub fn feasibility_bound(d1: f64, d2: f64) -> f64 {
    let s = d1.sqrt() + d2.sqrt();
    s * s
}

/// Both roots `(smaller, larger)` of `l^2 + l (d1 + d2 - B) + d1 d2 = 0`.
///
/// Returns `None` when the discriminant is negative. The discriminant is
/// evaluated in factored form, `(B - (sqrt d1 + sqrt d2)^2)(B - (sqrt d1 -
/// sqrt d2)^2)`, so it is exactly zero at [`feasibility_bound`].
pub fn lambda_roots(b: f64, d1: f64, d2: f64) -> Option<(f64, f64)> {
    let (r1, r2) = (d1.sqrt(), d2.sqrt());
    let upper = b - (r1 + r2) * (r1 + r2);
    if upper < 0.0 {
        return None;
    }
    let lower = b - (r1 - r2) * (r1 - r2);
    let disc = (upper * lower).sqrt();
    let larger = 0.5 * (b - d1 - d2 + disc);
    let product = d1 * d2;
    let smaller = if larger > 0.0 { product / larger } else { 0.0 };
    Some((smaller, larger))
}

/// `lambda_s` for a given `B` on the smaller root, with the degenerate rule
/// `lambda_s = 0` when either disagreement is zero.
pub fn lambda_for_b(b: f64, d1: f64, d2: f64) -> Result<f64, InfeasibleB> {
    lambda_on_root(b, d1, d2, Root::Smaller)
}

pub fn lambda_on_root(b: f64, d1: f64, d2: f64, root: Root) -> Result<f64, InfeasibleB> {
    if d1 <= 0.0 || d2 <= 0.0 {
        return Ok(0.0);
    }
    let (smaller, larger) = lambda_roots(b, d1, d2).ok_or(InfeasibleB { b, d1, d2 })?;
    Ok(match root {
        Root::Smaller => smaller,
        Root::Larger => larger,
    })
}

/// Fitted random-response distributions `pi_s1`, `pi_s2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomResponse {
    pub rater1: Vec<f64>,
    pub rater2: Vec<f64>,
}

/// Maximum-likelihood fit of the delta model to one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    /// Proportion classified at random, `B = 1 - Delta`.
    pub chance_mass: f64,
    pub lambda: Vec<f64>,
    pub delta: f64,
    pub alpha: Vec<f64>,
    /// `None` for a boundary fit (no observed disagreement), where the
    /// random-response distributions are not identified.
    pub random: Option<RandomResponse>,
    /// Largest absolute residual over the `K + 1` equations.
    pub residual: f64,
    /// Categories fixed at `lambda_s = 0` because a disagreement is zero.
    pub degenerate: Vec<bool>,
    /// Set when every observation is an agreement (`B = 0`).
    pub boundary: bool,
    /// Category that took the larger root of its quadratic, if any.
    pub larger_root: Option<usize>,
    pub log_likelihood: f64,
    /// Number of admissible roots the scan found.
    pub candidates: usize,
}

impl MleFit {
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn pi1(&self) -> Option<&[f64]> {
        self.random.as_ref().map(|r| r.rater1.as_slice())
    }

    pub fn pi2(&self) -> Option<&[f64]> {
        self.random.as_ref().map(|r| r.rater2.as_slice())
    }

    /// Cell probabilities implied by the fit.
    pub fn fitted_probabilities(&self) -> Vec<Vec<f64>> {
        let k = self.k();
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let chance = match &self.random {
                            Some(r) => self.chance_mass * r.rater1[i] * r.rater2[j],
                            None => 0.0,
                        };
                        if i == j {
                            self.alpha[i] + chance
                        } else {
                            chance
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// One branch of the bracket scan, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTrace {
    pub larger_root: Option<usize>,
    pub g_min: f64,
    pub g_max: f64,
    pub roots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub lower: f64,
    pub upper: f64,
    pub branches: Vec<BranchTrace>,
}

impl fmt::Display for SolverTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scanned B in [{:.6}, {:.3e}]", self.lower, self.upper)?;
        for b in &self.branches {
            let label = match b.larger_root {
                Some(k) => format!("larger root in category {}", k + 1),
                None => "smaller roots".to_string(),
            };
            write!(f, "; {label}: g in [{:.3e}, {:.3e}], {} root(s)", b.g_min, b.g_max, b.roots)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("the likelihood system needs K >= 3 categories, got {0}; use the two-category pathway")]
    TooFewCategories(usize),
    #[error("the likelihood equations have no admissible root ({0})")]
    NoInteriorSolution(SolverTrace),
    #[error("all disagreements fall in the two cells of categories {0} and {1}; the parameters are not identified")]
    NotIdentifiable(usize, usize),
}

/// Fits the delta model by maximum likelihood.
///
/// Tables without disagreement short-circuit to the boundary fit
/// (`Delta = 1`). Tables for which the likelihood has no stationary point
/// inside the parameter space yield [`FitError::NoInteriorSolution`]; see
/// [`fit_with_correction`] for the usual remedy.
pub fn fit_delta_mle(table: &ContingencyTable) -> Result<MleFit, FitError> {
    let k = table.k();
    if k < 3 {
        return Err(FitError::TooFewCategories(k));
    }
    let d = observed_disagreements(table);
    let total = d.total();
    if total <= 0.0 {
        return Ok(boundary_fit(table));
    }
    let active: Vec<usize> = (0..k).filter(|&s| d.is_active(s)).collect();
    if active.is_empty() {
        // Every lambda_s is pinned to zero and the sum equation gives B.
        return Ok(assemble(table, &d, total, None, 1));
    }
    if let Some((i, j)) = single_pair_support(table) {
        return Err(FitError::NotIdentifiable(i + 1, j + 1));
    }

    let lower = active.iter().map(|&s| feasibility_bound(d.rater1[s], d.rater2[s])).fold(total, f64::max);
    let grid = scan_grid(lower);
    let branches: Vec<Option<usize>> = std::iter::once(None).chain(active.iter().map(|&s| Some(s))).collect();

    let mut traces = Vec::with_capacity(branches.len());
    let mut best: Option<MleFit> = None;
    let mut candidates = 0;
    for &branch in &branches {
        let values: Vec<f64> = grid.iter().map(|&b| g_on_branch(&d, total, b, branch)).collect();
        let mut trace = BranchTrace {
            larger_root: branch,
            g_min: values.iter().copied().fold(f64::INFINITY, f64::min),
            g_max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            roots: 0,
        };
        for (idx, w) in values.windows(2).enumerate() {
            let root = if w[0] == 0.0 {
                Some(grid[idx])
            } else if w[0] * w[1] < 0.0 {
                bisect(&d, total, branch, grid[idx], grid[idx + 1], w[0])
            } else if idx + 2 == values.len() && w[1] == 0.0 {
                Some(grid[idx + 1])
            } else {
                None
            };
            let Some(b) = root else { continue };
            let fit = assemble(table, &d, b, branch, 0);
            if !admissible(&fit) {
                continue;
            }
            trace.roots += 1;
            candidates += 1;
            if best.as_ref().is_none_or(|cur| fit.log_likelihood > cur.log_likelihood) {
                best = Some(fit);
            }
        }
        traces.push(trace);
    }

    match best {
        Some(mut fit) => {
            fit.candidates = candidates;
            Ok(fit)
        }
        None => Err(FitError::NoInteriorSolution(SolverTrace {
            lower,
            upper: *grid.last().expect("grid is non-empty"),
            branches: traces,
        })),
    }
}

/// A fit together with the table it was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedFit {
    pub table: ContingencyTable,
    pub fit: MleFit,
    /// True when the fit is on the observed table plus 0.5 in every cell.
    pub corrected: bool,
}

/// Fits the table, falling back to the table with 0.5 added to every cell
/// when the likelihood equations have no admissible root or the parameters
/// are not identified.
pub fn fit_with_correction(table: &ContingencyTable) -> Result<CorrectedFit, FitError> {
    match fit_delta_mle(table) {
        Ok(fit) => Ok(CorrectedFit { table: table.clone(), fit, corrected: false }),
        Err(FitError::NoInteriorSolution(_) | FitError::NotIdentifiable(..)) => {
            let augmented = table.with_added(0.5);
            let fit = fit_delta_mle(&augmented)?;
            Ok(CorrectedFit { table: augmented, fit, corrected: true })
        }
        Err(e) => Err(e),
    }
}

fn boundary_fit(table: &ContingencyTable) -> MleFit {
    let k = table.k();
    let alpha: Vec<f64> = (0..k).map(|s| table.diagonal_proportion(s)).collect();
    let probs: Vec<Vec<f64>> =
        (0..k).map(|i| (0..k).map(|j| if i == j { alpha[i] } else { 0.0 }).collect()).collect();
    MleFit {
        chance_mass: 0.0,
        lambda: vec![0.0; k],
        delta: 1.0,
        log_likelihood: table.log_likelihood(&probs),
        alpha,
        random: None,
        residual: 0.0,
        degenerate: vec![true; k],
        boundary: true,
        larger_root: None,
        candidates: 1,
    }
}

/// Off-diagonal mass confined to cells `(i, j)` and `(j, i)`, both non-empty.
/// The sum equation then holds for every `B` on the branch where one of the
/// two categories takes the larger root.
fn single_pair_support(table: &ContingencyTable) -> Option<(usize, usize)> {
    let k = table.k();
    let mut pair = None;
    for i in 0..k {
        for j in (i + 1)..k {
            let (a, b) = (table.cell(i, j), table.cell(j, i));
            if a == 0.0 && b == 0.0 {
                continue;
            }
            if a == 0.0 || b == 0.0 || pair.is_some() {
                return None;
            }
            pair = Some((i, j));
        }
    }
    pair
}

fn scan_grid(lower: f64) -> Vec<f64> {
    let steps = (SCAN_POINTS - 2) as f64;
    let ratio = (SCAN_SPAN / SCAN_FIRST_OFFSET).ln();
    std::iter::once(lower)
        .chain((0..SCAN_POINTS - 1).map(|j| lower * (1.0 + SCAN_FIRST_OFFSET * (ratio * j as f64 / steps).exp())))
        .collect()
}

fn lambdas(d: &Disagreements, b: f64, branch: Option<usize>) -> Option<Vec<f64>> {
    (0..d.rater1.len())
        .map(|s| {
            let root = if branch == Some(s) { Root::Larger } else { Root::Smaller };
            lambda_on_root(b, d.rater1[s], d.rater2[s], root).ok()
        })
        .collect()
}

fn g_on_branch(d: &Disagreements, total: f64, b: f64, branch: Option<usize>) -> f64 {
    match lambdas(d, b, branch) {
        Some(l) => l.iter().sum::<f64>() - b + total,
        None => f64::NAN,
    }
}

fn bisect(d: &Disagreements, total: f64, branch: Option<usize>, mut lo: f64, mut hi: f64, g_lo: f64) -> Option<f64> {
    let lo_sign = g_lo.signum();
    let mut best = (g_lo.abs(), lo);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let g = g_on_branch(d, total, mid, branch);
        if !g.is_finite() {
            return None;
        }
        if g.abs() < best.0 {
            best = (g.abs(), mid);
        }
        if g == 0.0 || mid <= lo || mid >= hi {
            break;
        }
        if g.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (best.0 <= ROOT_TOLERANCE).then_some(best.1)
}

fn admissible(fit: &MleFit) -> bool {
    let Some(r) = &fit.random else { return true };
    r.rater1.iter().chain(&r.rater2).all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)) && fit.log_likelihood.is_finite()
}

fn assemble(table: &ContingencyTable, d: &Disagreements, b: f64, branch: Option<usize>, candidates: usize) -> MleFit {
    let k = table.k();
    let lambda = lambdas(d, b, branch).expect("roots are evaluated at feasible B");
    let rater1: Vec<f64> = (0..k).map(|s| (lambda[s] + d.rater1[s]) / b).collect();
    let rater2: Vec<f64> = (0..k).map(|s| (lambda[s] + d.rater2[s]) / b).collect();
    let alpha: Vec<f64> = (0..k).map(|s| table.diagonal_proportion(s) - lambda[s]).collect();
    let degenerate: Vec<bool> = (0..k).map(|s| !d.is_active(s)).collect();

    let mut residual = (lambda.iter().sum::<f64>() - b + d.total()).abs();
    for s in (0..k).filter(|&s| !degenerate[s]) {
        let implied = (lambda[s] + d.rater1[s]) * (lambda[s] + d.rater2[s]) / lambda[s];
        residual = residual.max((b - implied).abs());
    }

    let mut fit = MleFit {
        chance_mass: b,
        lambda,
        delta: 1.0 - b,
        alpha,
        random: Some(RandomResponse { rater1, rater2 }),
        residual,
        degenerate,
        boundary: false,
        larger_root: branch,
        log_likelihood: 0.0,
        candidates,
    };
    fit.log_likelihood = table.log_likelihood(&fit.fitted_probabilities());
    fit
}
