//! Classic, bias-corrected (`U`) and alternative (`AC`) estimators, and the
//! variance formulas shared by all of them.
//!
//! Most formulas involve the chance-structure quantities
//! `X_i = pi_i1 pi_i2 / (pi_i1 + pi_i2 - 1)`, which blow up when
//! `pi_i1 + pi_i2 = 1`. Such entries are tagged as infinite and every
//! expression that uses them is evaluated through its limit; with two or more
//! infinite entries the expressions have no unique limit and are reported as
//! singular.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mle::MleFit;
use crate::model::{consistency, PopulationParams};
use crate::quantity::Quantity;
use crate::table::ContingencyTable;

/// `|pi_i1 + pi_i2 - 1|` at or below this is treated as zero.
pub const INFINITE_TOLERANCE: f64 = 1e-12;
/// `|X - 1|` below this makes `X / (X - 1)` singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EstimatorError {
    #[error("Delta = 1: there is no chance component to correct")]
    Boundary,
    #[error("singular chance structure: {0}")]
    Singular(&'static str),
    #[error("chance agreement index equals 1")]
    DegenerateChanceIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChanceTerm {
    Finite(f64),
    Infinite,
}

impl ChanceTerm {
    pub fn finite(self) -> Option<f64> {
        match self {
            ChanceTerm::Finite(x) => Some(x),
            ChanceTerm::Infinite => None,
        }
    }
}

/// `X_i`, `X = sum X_i` and `I_pi = sum pi_i1 pi_i2` for one pair of
/// random-response distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChanceQuantities {
    pub terms: Vec<ChanceTerm>,
    /// `pi_i1 + pi_i2 - 1`.
    pub denominators: Vec<f64>,
    pub x: ChanceTerm,
    pub chance_index: f64,
}

pub fn chance_quantities(pi1: &[f64], pi2: &[f64]) -> ChanceQuantities {
    assert_eq!(pi1.len(), pi2.len());
    let mut terms = Vec::with_capacity(pi1.len());
    let mut denominators = Vec::with_capacity(pi1.len());
    for (&a, &b) in pi1.iter().zip(pi2) {
        let product = a * b;
        let t = a + b - 1.0;
        denominators.push(t);
        terms.push(if t.abs() <= INFINITE_TOLERANCE {
            if product > 0.0 {
                ChanceTerm::Infinite
            } else {
                ChanceTerm::Finite(0.0)
            }
        } else {
            ChanceTerm::Finite(product / t)
        });
    }
    let x = if terms.contains(&ChanceTerm::Infinite) {
        ChanceTerm::Infinite
    } else {
        ChanceTerm::Finite(terms.iter().filter_map(|t| t.finite()).sum())
    };
    let chance_index = pi1.iter().zip(pi2).map(|(a, b)| a * b).sum();
    ChanceQuantities { terms, denominators, x, chance_index }
}

impl ChanceQuantities {
    pub fn k(&self) -> usize {
        self.terms.len()
    }

    /// Index of the single infinite `X_k`, if any, and the sum of the finite
    /// entries.
    fn split(&self) -> Result<(Option<usize>, f64), EstimatorError> {
        let mut infinite = None;
        let mut finite = 0.0;
        for (i, t) in self.terms.iter().enumerate() {
            match t {
                ChanceTerm::Finite(x) => finite += x,
                ChanceTerm::Infinite if infinite.is_some() => {
                    return Err(EstimatorError::Singular("two or more X_i are infinite"))
                }
                ChanceTerm::Infinite => infinite = Some(i),
            }
        }
        if infinite.is_none() && (finite - 1.0).abs() < SINGULAR_TOLERANCE {
            return Err(EstimatorError::Singular("X = 1"));
        }
        Ok((infinite, finite))
    }

    fn term(&self, i: usize) -> f64 {
        self.terms[i].finite().expect("caller checked for the infinite entry")
    }

    /// `X / (X - 1)`.
    pub fn ratio(&self) -> Result<f64, EstimatorError> {
        Ok(match self.split()? {
            (Some(_), _) => 1.0,
            (None, x) => x / (x - 1.0),
        })
    }

    /// `X_i {X_i / (X - 1) - 1}`, so that `H_i = (1 - Delta)` times this.
    pub fn h_factor(&self, i: usize) -> Result<f64, EstimatorError> {
        Ok(match self.split()? {
            (Some(k), f) if k == i => 1.0 - f,
            (Some(_), _) => -self.term(i),
            (None, x) => {
                let xi = self.term(i);
                xi * (xi / (x - 1.0) - 1.0)
            }
        })
    }

    /// `X_i (X - X_i) / (X - 1)`.
    pub fn cross_term(&self, i: usize) -> Result<f64, EstimatorError> {
        Ok(match self.split()? {
            (Some(k), f) if k == i => f,
            (Some(_), _) => self.term(i),
            (None, x) => {
                let xi = self.term(i);
                xi * (x - xi) / (x - 1.0)
            }
        })
    }

    /// `(1 - X_m)(X - X_m) / (X - 1)`, the chance part of the variance of the
    /// two-category global agreement, with `m` the virtual category.
    pub fn excluded_factor(&self, m: usize) -> Result<f64, EstimatorError> {
        Ok(match self.split()? {
            (Some(k), f) if k == m => -f,
            (Some(_), _) => 1.0 - self.term(m),
            (None, x) => {
                let xm = self.term(m);
                (1.0 - xm) * (x - xm) / (x - 1.0)
            }
        })
    }
}

/// Bias terms `E_i` of the plug-in estimator of `pi_i1 pi_i2`, and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTerms {
    pub per_category: Vec<f64>,
    pub total: f64,
}

impl BiasTerms {
    fn zero(k: usize) -> Self {
        BiasTerms { per_category: vec![0.0; k], total: 0.0 }
    }
}

/// Plug-in bias terms for arbitrary `pi` vectors and global agreement.
pub fn bias_terms(pi1: &[f64], pi2: &[f64], delta: f64, n: f64) -> Result<BiasTerms, EstimatorError> {
    if delta >= 1.0 {
        return Err(EstimatorError::Boundary);
    }
    let cq = chance_quantities(pi1, pi2);
    let scale = n * (1.0 - delta);
    let per_category = (0..cq.k())
        .map(|i| Ok((pi1[i] * pi2[i] - cq.cross_term(i)?) / scale))
        .collect::<Result<Vec<f64>, EstimatorError>>()?;
    let total = per_category.iter().sum();
    Ok(BiasTerms { per_category, total })
}

/// Expected bias `E_i = [pi_i1 pi_i2 - X_i (X - X_i)/(X - 1)] / (n (1 - Delta))`
/// of the plug-in estimator of `pi_i1 pi_i2` for samples of size `n`.
pub fn expected_bias(params: &PopulationParams, n: f64) -> Result<BiasTerms, EstimatorError> {
    bias_terms(params.pi1(), params.pi2(), params.delta(), n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Classic,
    #[serde(rename = "u")]
    Unbiased,
    #[serde(rename = "ac")]
    Alternative,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Classic, Family::Unbiased, Family::Alternative];

    pub fn label(self) -> &'static str {
        match self {
            Family::Classic => "classic",
            Family::Unbiased => "u",
            Family::Alternative => "ac",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classic" => Ok(Family::Classic),
            "u" | "unbiased" => Ok(Family::Unbiased),
            "ac" | "alternative" => Ok(Family::Alternative),
            other => Err(format!("unknown estimator family `{other}` (expected classic, u or ac)")),
        }
    }
}

/// One family of estimates of `Delta`, `alpha_i` and `S_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFamily {
    pub family: Family,
    pub delta: f64,
    pub alpha: Vec<f64>,
    pub consistency: Vec<Quantity>,
    /// The chance agreement index this family uses.
    pub chance_index: f64,
    /// `E_i` for the `U` family, `A_i` for `AC`; absent for classic.
    pub correction: Option<BiasTerms>,
}

fn assemble(
    family: Family,
    table: &ContingencyTable,
    chance_index: f64,
    products: &[f64],
    correction: Option<BiasTerms>,
) -> Result<EstimateFamily, EstimatorError> {
    if (1.0 - chance_index).abs() < SINGULAR_TOLERANCE {
        return Err(EstimatorError::DegenerateChanceIndex);
    }
    let io = table.observed_agreement();
    let delta = (io - chance_index) / (1.0 - chance_index);
    let alpha: Vec<f64> =
        products.iter().enumerate().map(|(i, p)| table.diagonal_proportion(i) - (1.0 - delta) * p).collect();
    let consistency =
        alpha.iter().enumerate().map(|(i, &a)| consistency(a, table.category_total_proportion(i))).collect();
    Ok(EstimateFamily { family, delta, alpha, consistency, chance_index, correction })
}

fn boundary_family(family: Family, fit: &MleFit, table: &ContingencyTable) -> EstimateFamily {
    let k = fit.k();
    let alpha: Vec<f64> = (0..k).map(|i| table.diagonal_proportion(i)).collect();
    let consistency =
        alpha.iter().enumerate().map(|(i, &a)| consistency(a, table.category_total_proportion(i))).collect();
    let correction = (family != Family::Classic).then(|| BiasTerms::zero(k));
    EstimateFamily { family, delta: 1.0, alpha, consistency, chance_index: 0.0, correction }
}

fn fitted_pi(fit: &MleFit) -> (&[f64], &[f64]) {
    (fit.pi1().expect("non-boundary fit"), fit.pi2().expect("non-boundary fit"))
}

/// `I_pi = sum pi_i1 pi_i2`, `Delta = (I_o - I_pi)/(1 - I_pi)`,
/// `alpha_i = p_ii - (1 - Delta) pi_i1 pi_i2`, `S_i = 2 alpha_i / t_i`.
pub fn classic_estimates(fit: &MleFit, table: &ContingencyTable) -> Result<EstimateFamily, EstimatorError> {
    if fit.boundary {
        return Ok(boundary_family(Family::Classic, fit, table));
    }
    let (pi1, pi2) = fitted_pi(fit);
    let products: Vec<f64> = pi1.iter().zip(pi2).map(|(a, b)| a * b).collect();
    let chance_index = products.iter().sum();
    assemble(Family::Classic, table, chance_index, &products, None)
}

/// The bias-corrected family: `pi_i1 pi_i2` is replaced by
/// `pi_i1 pi_i2 - E_i` throughout.
pub fn unbiased_estimates(fit: &MleFit, table: &ContingencyTable) -> Result<EstimateFamily, EstimatorError> {
    if fit.boundary {
        return Ok(boundary_family(Family::Unbiased, fit, table));
    }
    let (pi1, pi2) = fitted_pi(fit);
    let bias = bias_terms(pi1, pi2, fit.delta, table.n())?;
    let products: Vec<f64> = (0..fit.k()).map(|i| pi1[i] * pi2[i] - bias.per_category[i]).collect();
    let chance_index = pi1.iter().zip(pi2).map(|(a, b)| a * b).sum::<f64>() - bias.total;
    assemble(Family::Unbiased, table, chance_index, &products, Some(bias))
}

/// The alternative family: `pi_i1 pi_i2` is replaced by
/// `(pi_i1 pi_i2 + A_i) / C` with `A_i = X_i (X - X_i) / (n (1 - Delta)(X - 1))`
/// and `C = 1 + 1 / (n (1 - Delta))`.
pub fn ac_estimates(fit: &MleFit, table: &ContingencyTable) -> Result<EstimateFamily, EstimatorError> {
    if fit.boundary {
        return Ok(boundary_family(Family::Alternative, fit, table));
    }
    let (pi1, pi2) = fitted_pi(fit);
    let cq = chance_quantities(pi1, pi2);
    let scale = table.n() * (1.0 - fit.delta);
    let a = (0..fit.k()).map(|i| Ok(cq.cross_term(i)? / scale)).collect::<Result<Vec<f64>, EstimatorError>>()?;
    let a_total: f64 = a.iter().sum();
    let c = 1.0 + 1.0 / scale;
    let products: Vec<f64> = (0..fit.k()).map(|i| (pi1[i] * pi2[i] + a[i]) / c).collect();
    let chance_index = (cq.chance_index + a_total) / c;
    assemble(Family::Alternative, table, chance_index, &products, Some(BiasTerms { per_category: a, total: a_total }))
}

pub fn estimates(fit: &MleFit, table: &ContingencyTable, family: Family) -> Result<EstimateFamily, EstimatorError> {
    match family {
        Family::Classic => classic_estimates(fit, table),
        Family::Unbiased => unbiased_estimates(fit, table),
        Family::Alternative => ac_estimates(fit, table),
    }
}

/// Variances of the global agreement, the `alpha_i` and the `S_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyVariances {
    pub delta: Quantity,
    pub alpha: Vec<Quantity>,
    pub consistency: Vec<Quantity>,
}

pub type AsymptoticVariances = FamilyVariances;

fn non_negative(v: f64) -> Quantity {
    if v.is_finite() && v >= 0.0 {
        Quantity::Value(v)
    } else {
        Quantity::Singular
    }
}

/// Evaluates
///
/// ```text
/// V(Delta)   = (1 - Delta)/n {Delta + X/(X - 1)}
/// V(alpha_i) = {H_i + alpha_i (1 - alpha_i)} / n
/// V(S_i)     = {4 H_i + S_i (2 t_i - 3 t_i S_i + 2 p_ii S_i)} / (n t_i^2)
/// H_i        = (1 - Delta) X_i {X_i/(X - 1) - 1}
/// ```
///
/// Negative results are tagged singular.
pub(crate) fn variance_formulas(
    cq: &ChanceQuantities,
    delta: f64,
    alpha: &[f64],
    consistency: &[Quantity],
    t: &[f64],
    diagonal: &[f64],
    n: f64,
) -> FamilyVariances {
    let k = cq.k();
    let b = 1.0 - delta;
    let delta_var = match cq.ratio() {
        Ok(r) => non_negative(b / n * (delta + r)),
        Err(_) => Quantity::Singular,
    };
    let mut alpha_var = Vec::with_capacity(k);
    let mut s_var = Vec::with_capacity(k);
    for i in 0..k {
        match cq.h_factor(i) {
            Ok(h) => {
                let h = b * h;
                alpha_var.push(non_negative((h + alpha[i] * (1.0 - alpha[i])) / n));
                s_var.push(match consistency[i] {
                    Quantity::Value(s) => {
                        non_negative((4.0 * h + s * (2.0 * t[i] - 3.0 * t[i] * s + 2.0 * diagonal[i] * s)) / (n * t[i] * t[i]))
                    }
                    other => other,
                });
            }
            Err(_) => {
                alpha_var.push(Quantity::Singular);
                s_var.push(Quantity::Singular);
            }
        }
    }
    FamilyVariances { delta: delta_var, alpha: alpha_var, consistency: s_var }
}

/// Asymptotic variances of the classic estimators at the true parameters.
pub fn asymptotic_variances(params: &PopulationParams, n: f64) -> Result<AsymptoticVariances, EstimatorError> {
    let delta = params.delta();
    if delta >= 1.0 {
        return Err(EstimatorError::Boundary);
    }
    let cq = chance_quantities(params.pi1(), params.pi2());
    cq.split()?;
    let margins = params.margins();
    let s: Vec<Quantity> = (0..params.k()).map(|i| consistency(params.alpha()[i], margins.t[i])).collect();
    Ok(variance_formulas(&cq, delta, params.alpha(), &s, &margins.t, &margins.diagonal, n))
}

/// Plug-in variances for one estimate family. The `U` and `AC` families use
/// the classic expressions with their own `Delta`, `alpha_i` and `S_i`
/// substituted.
pub fn estimated_variances(
    fit: &MleFit,
    table: &ContingencyTable,
    family: &EstimateFamily,
) -> Result<FamilyVariances, EstimatorError> {
    if fit.boundary {
        return Err(EstimatorError::Boundary);
    }
    let (pi1, pi2) = fitted_pi(fit);
    let cq = chance_quantities(pi1, pi2);
    let t: Vec<f64> = (0..fit.k()).map(|i| table.category_total_proportion(i)).collect();
    let diagonal: Vec<f64> = (0..fit.k()).map(|i| table.diagonal_proportion(i)).collect();
    Ok(variance_formulas(&cq, family.delta, &family.alpha, &family.consistency, &t, &diagonal, table.n()))
}

/// `V(pi_sr) = (X_s - pi_sr)/(n (1 - Delta)) {(X_s - pi_sr)/(X - 1) - 1}`
/// for rater `r` in {1, 2}.
pub fn pi_variance(pi1: &[f64], pi2: &[f64], delta: f64, n: f64, s: usize, r: usize) -> Result<f64, EstimatorError> {
    assert!(r == 1 || r == 2, "rater must be 1 or 2");
    if delta >= 1.0 {
        return Err(EstimatorError::Boundary);
    }
    let cq = chance_quantities(pi1, pi2);
    let (infinite, x) = cq.split()?;
    let xs = cq.terms[s].finite().ok_or(EstimatorError::Singular("X_s is infinite"))?;
    let pi = if r == 1 { pi1[s] } else { pi2[s] };
    let u = xs - pi;
    let inner = match infinite {
        Some(_) => -1.0,
        None => u / (x - 1.0) - 1.0,
    };
    Ok(u / (n * (1.0 - delta)) * inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mle::fit_delta_mle;

    fn setting(alpha: &[f64], pi1: &[f64], pi2: &[f64]) -> PopulationParams {
        PopulationParams::new(alpha.to_vec(), pi1.to_vec(), pi2.to_vec()).unwrap()
    }

    fn table(rows: &[&[f64]]) -> ContingencyTable {
        ContingencyTable::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn fleiss() -> ContingencyTable {
        table(&[&[75.0, 1.0, 4.0], &[5.0, 4.0, 1.0], &[0.0, 0.0, 10.0]])
    }

    #[test]
    fn chance_terms_with_infinite_entry() {
        let cq = chance_quantities(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]);
        assert!((cq.terms[0].finite().unwrap() + 0.04 / 0.6).abs() < 1e-15);
        assert!((cq.terms[1].finite().unwrap() + 0.225).abs() < 1e-15);
        assert_eq!(cq.terms[2], ChanceTerm::Infinite);
        assert_eq!(cq.x, ChanceTerm::Infinite);
        assert!((cq.chance_index - 0.38).abs() < 1e-15);
        assert_eq!(cq.ratio(), Ok(1.0));
    }

    #[test]
    fn chance_terms_point_mass() {
        let cq = chance_quantities(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(cq.terms, vec![ChanceTerm::Finite(1.0), ChanceTerm::Finite(0.0), ChanceTerm::Finite(0.0)]);
        assert_eq!(cq.ratio(), Err(EstimatorError::Singular("X = 1")));
    }

    #[test]
    fn five_category_ratio() {
        let pi = [0.1, 0.15, 0.2, 0.25, 0.3];
        let cq = chance_quantities(&pi, &pi);
        let x = cq.x.finite().unwrap();
        assert!((x + 0.46131).abs() < 1e-5);
        assert!((cq.ratio().unwrap() - 0.31568).abs() < 1e-5);
    }

    #[test]
    fn two_infinite_terms_are_singular() {
        let cq = chance_quantities(&[0.5, 0.5, 0.0], &[0.5, 0.5, 0.0]);
        assert!(matches!(cq.ratio(), Err(EstimatorError::Singular(_))));
    }

    /// Midpoint of the two one-sided values obtained by nudging `pi_32` (and
    /// compensating in `pi_22`) away from the singular point.
    fn limit_oracle(f: impl Fn(&PopulationParams) -> f64) -> f64 {
        let alpha = [0.05, 0.15, 0.2];
        let pi1 = [0.2, 0.3, 0.5];
        let h = 1e-6;
        let up = setting(&alpha, &pi1, &[0.2, 0.3 - h, 0.5 + h]);
        let down = setting(&alpha, &pi1, &[0.2, 0.3 + h, 0.5 - h]);
        0.5 * (f(&up) + f(&down))
    }

    #[test]
    fn bias_limit_matches_perturbation() {
        let p = setting(&[0.05, 0.15, 0.2], &[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]);
        let e = expected_bias(&p, 30.0).unwrap();
        for i in 0..3 {
            let oracle = limit_oracle(|q| expected_bias(q, 30.0).unwrap().per_category[i]);
            assert!((e.per_category[i] - oracle).abs() < 1e-5, "E_{i}: {} vs {oracle}", e.per_category[i]);
        }
    }

    #[test]
    fn variance_limit_matches_perturbation() {
        let p = setting(&[0.05, 0.15, 0.2], &[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]);
        let v = asymptotic_variances(&p, 30.0).unwrap();
        let oracle = limit_oracle(|q| asymptotic_variances(q, 30.0).unwrap().delta.value().unwrap());
        assert!((v.delta.value().unwrap() - oracle).abs() < 1e-5);
        for i in 0..3 {
            let oracle = limit_oracle(|q| asymptotic_variances(q, 30.0).unwrap().alpha[i].value().unwrap());
            assert!((v.alpha[i].value().unwrap() - oracle).abs() < 1e-5);
        }
    }

    #[test]
    fn bias_scales_with_n() {
        let p = setting(&[0.13, 0.13, 0.14], &[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]);
        let a = expected_bias(&p, 30.0).unwrap();
        let b = expected_bias(&p, 60.0).unwrap();
        for i in 0..3 {
            assert_eq!(a.per_category[i] / 2.0, b.per_category[i]);
        }
        assert!((a.total - a.per_category.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn bias_at_zero_delta() {
        let pi = [0.1, 0.3, 0.6];
        let p = setting(&[0.0, 0.0, 0.0], &pi, &pi);
        let e = expected_bias(&p, 10.0).unwrap();
        let cq = chance_quantities(&pi, &pi);
        for i in 0..3 {
            let expected = (pi[i] * pi[i] - cq.cross_term(i).unwrap()) / 10.0;
            assert!((e.per_category[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn asymptotic_examples() {
        let s1 = setting(&[0.05, 0.15, 0.2], &[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]);
        let v = asymptotic_variances(&s1, 30.0).unwrap();
        assert!((v.delta.value().unwrap() - 0.0280).abs() < 1e-4);
        assert!((v.alpha[2].value().unwrap() - 0.0312).abs() < 1e-4);
        assert!((v.consistency[2].value().unwrap() - 0.1177).abs() < 1e-4);

        let s2 = setting(&[0.05, 0.15, 0.2], &[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]);
        assert!((asymptotic_variances(&s2, 30.0).unwrap().delta.value().unwrap() - 0.0174).abs() < 1e-4);

        let pi = [0.1, 0.15, 0.2, 0.25, 0.3];
        let s25 = setting(&[0.05, 0.05, 0.05, 0.1, 0.15], &pi, &pi);
        assert!((asymptotic_variances(&s25, 30.0).unwrap().delta.value().unwrap() - 0.0143).abs() < 1e-4);
    }

    #[test]
    fn asymptotic_boundary() {
        let p = setting(&[0.5, 0.5, 0.0], &[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]);
        assert_eq!(asymptotic_variances(&p, 30.0), Err(EstimatorError::Boundary));
    }

    #[test]
    fn fleiss_families() {
        let t = fleiss();
        let fit = fit_delta_mle(&t).unwrap();
        let c = classic_estimates(&fit, &t).unwrap();
        assert!((c.delta - fit.delta).abs() < 1e-9);
        assert!((c.consistency[0].value().unwrap() - 0.687).abs() < 5e-4);
        assert!((c.consistency[1].value().unwrap() - 0.500).abs() < 5e-4);

        let u = unbiased_estimates(&fit, &t).unwrap();
        assert!((u.delta - 0.715).abs() < 5e-4);
        assert!((u.alpha[0] - 0.575).abs() < 5e-4);
        assert!((u.consistency[0].value().unwrap() - 0.719).abs() < 5e-4);
        assert!((u.alpha.iter().sum::<f64>() - u.delta).abs() < 1e-12);

        let ac = ac_estimates(&fit, &t).unwrap();
        assert!((ac.alpha.iter().sum::<f64>() - ac.delta).abs() < 1e-9);
    }

    #[test]
    fn estimated_variances_at_truth_equal_asymptotic() {
        // A fit whose random-response part equals the population values
        // makes the plug-in expressions identical to the asymptotic ones.
        let p = setting(&[0.05, 0.15, 0.2], &[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]);
        let joint = p.joint_probabilities();
        let n = 1000.0;
        let t = ContingencyTable::new(joint.iter().map(|r| r.iter().map(|x| x * n).collect()).collect()).unwrap();
        let margins = p.margins();
        let fit = MleFit {
            chance_mass: p.chance_mass(),
            lambda: (0..3).map(|i| p.chance_mass() * p.pi1()[i] * p.pi2()[i]).collect(),
            delta: p.delta(),
            alpha: p.alpha().to_vec(),
            random: Some(crate::mle::RandomResponse { rater1: p.pi1().to_vec(), rater2: p.pi2().to_vec() }),
            residual: 0.0,
            degenerate: vec![false; 3],
            boundary: false,
            larger_root: None,
            log_likelihood: 0.0,
            candidates: 1,
        };
        let c = classic_estimates(&fit, &t).unwrap();
        for i in 0..3 {
            assert!((c.alpha[i] - p.alpha()[i]).abs() < 1e-12);
            assert!((t.category_total_proportion(i) - margins.t[i]).abs() < 1e-12);
        }
        let est = estimated_variances(&fit, &t, &c).unwrap();
        let asy = asymptotic_variances(&p, n).unwrap();
        assert!((est.delta.value().unwrap() - asy.delta.value().unwrap()).abs() < 1e-14);
        for i in 0..3 {
            assert!((est.alpha[i].value().unwrap() - asy.alpha[i].value().unwrap()).abs() < 1e-14);
            assert!((est.consistency[i].value().unwrap() - asy.consistency[i].value().unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn fleiss_variances_are_close() {
        let t = fleiss();
        let fit = fit_delta_mle(&t).unwrap();
        let c = classic_estimates(&fit, &t).unwrap();
        let u = unbiased_estimates(&fit, &t).unwrap();
        let vc = estimated_variances(&fit, &t, &c).unwrap().delta.value().unwrap();
        let vu = estimated_variances(&fit, &t, &u).unwrap().delta.value().unwrap();
        // Independent transcription of the global-agreement variance.
        let (p1, p2) = (fit.pi1().unwrap(), fit.pi2().unwrap());
        let x: f64 = (0..3)
            .filter(|&i| p1[i] * p2[i] > 0.0)
            .map(|i| p1[i] * p2[i] / (p1[i] + p2[i] - 1.0))
            .sum();
        let direct = (1.0 - c.delta) / 100.0 * (c.delta + x / (x - 1.0));
        assert!((vc - direct).abs() < 1e-14);
        assert!(vc > 0.0 && vu > 0.0);
        assert!((vc - vu).abs() / vc.max(vu) < 0.2);
    }

    #[test]
    fn variance_zero_at_full_agreement_form() {
        let cq = chance_quantities(&[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]);
        let v = variance_formulas(&cq, 1.0, &[0.3, 0.3, 0.4], &[Quantity::Value(1.0); 3], &[0.6, 0.6, 0.8], &[0.3, 0.3, 0.4], 50.0);
        assert_eq!(v.delta, Quantity::Value(0.0));
    }

    #[test]
    fn pi_variance_example() {
        let pi = [0.1, 0.15, 0.2, 0.25, 0.3];
        let v = pi_variance(&pi, &pi, 0.4, 30.0, 0, 1).unwrap();
        assert!((v - 0.00577).abs() < 1e-5);
        assert_eq!(pi_variance(&pi, &pi, 0.4, 60.0, 0, 1).unwrap(), v / 2.0);
        assert_eq!(v, pi_variance(&pi, &pi, 0.4, 30.0, 0, 2).unwrap());
        let inf = [0.2, 0.3, 0.5];
        assert!(matches!(pi_variance(&inf, &inf, 0.4, 30.0, 2, 1), Err(EstimatorError::Singular(_))));
    }

    #[test]
    fn boundary_families_coincide() {
        let t = table(&[&[10.0, 0.0, 0.0], &[0.0, 20.0, 0.0], &[0.0, 0.0, 10.0]]);
        let fit = fit_delta_mle(&t).unwrap();
        let c = classic_estimates(&fit, &t).unwrap();
        let u = unbiased_estimates(&fit, &t).unwrap();
        assert_eq!(c.delta, 1.0);
        assert_eq!(c.alpha, u.alpha);
        assert_eq!(u.correction.unwrap().total, 0.0);
        assert_eq!(c.consistency[1], Quantity::Value(1.0));
        assert_eq!(estimated_variances(&fit, &t, &c), Err(EstimatorError::Boundary));
    }
}
