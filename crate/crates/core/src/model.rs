//! Population parameters of the delta model and quantities derived from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantity::Quantity;
use crate::table::ContingencyTable;

/// Tolerance for probability vectors supplied by users.
pub const USER_TOLERANCE: f64 = 1e-9;
/// Tolerance for values generated inside the crate.
pub const INTERNAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter vectors have different lengths ({alpha}, {pi1}, {pi2})")]
    LengthMismatch { alpha: usize, pi1: usize, pi2: usize },
    #[error("model needs at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("pi[{index}] of rater {rater} is outside [0, 1]: {value}")]
    ProbabilityOutOfRange { rater: usize, index: usize, value: f64 },
    #[error("random-response distribution of rater {rater} sums to {sum}, not 1")]
    NotNormalized { rater: usize, sum: f64 },
    #[error("global agreement sum(alpha) = {0} exceeds 1")]
    DeltaAboveOne(f64),
    #[error("implied probability p[{row}][{col}] = {value} is negative")]
    NegativeCell { row: usize, col: usize, value: f64 },
    #[error("alpha[{index}] = {value} is negative")]
    NegativeAlpha { index: usize, value: f64 },
}

/// True parameters `{alpha_i, pi_i1, pi_i2}` of a delta model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct PopulationParams {
    alpha: Vec<f64>,
    pi1: Vec<f64>,
    pi2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    alpha: Vec<f64>,
    pi1: Vec<f64>,
    pi2: Vec<f64>,
}

impl TryFrom<ParamsRepr> for PopulationParams {
    type Error = ModelError;

    fn try_from(r: ParamsRepr) -> Result<Self, ModelError> {
        PopulationParams::new(r.alpha, r.pi1, r.pi2)
    }
}

impl From<PopulationParams> for ParamsRepr {
    fn from(p: PopulationParams) -> Self {
        ParamsRepr { alpha: p.alpha, pi1: p.pi1, pi2: p.pi2 }
    }
}

impl PopulationParams {
    /// Validates user-supplied parameters (probability tolerance 1e-9).
    pub fn new(alpha: Vec<f64>, pi1: Vec<f64>, pi2: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_tolerance(alpha, pi1, pi2, USER_TOLERANCE)
    }

    pub fn with_tolerance(alpha: Vec<f64>, pi1: Vec<f64>, pi2: Vec<f64>, tol: f64) -> Result<Self, ModelError> {
        let k = alpha.len();
        if pi1.len() != k || pi2.len() != k {
            return Err(ModelError::LengthMismatch { alpha: k, pi1: pi1.len(), pi2: pi2.len() });
        }
        if k < 2 {
            return Err(ModelError::TooFewCategories(k));
        }
        for (rater, pi) in [(1, &pi1), (2, &pi2)] {
            for (index, &value) in pi.iter().enumerate() {
                if !(-tol..=1.0 + tol).contains(&value) {
                    return Err(ModelError::ProbabilityOutOfRange { rater, index, value });
                }
            }
            let sum: f64 = pi.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(ModelError::NotNormalized { rater, sum });
            }
        }
        let delta: f64 = alpha.iter().sum();
        if delta > 1.0 + tol {
            return Err(ModelError::DeltaAboveOne(delta));
        }
        let params = PopulationParams { alpha, pi1, pi2 };
        for (i, row) in params.joint_probabilities().iter().enumerate() {
            for (j, &value) in row.iter().enumerate() {
                if value < -tol {
                    return Err(ModelError::NegativeCell { row: i, col: j, value });
                }
            }
        }
        if let Some((index, &value)) = params.alpha.iter().enumerate().find(|(_, a)| **a < -tol) {
            return Err(ModelError::NegativeAlpha { index, value });
        }
        Ok(params)
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Random-response distribution of rater 1.
    pub fn pi1(&self) -> &[f64] {
        &self.pi1
    }

    /// Random-response distribution of rater 2.
    pub fn pi2(&self) -> &[f64] {
        &self.pi2
    }

    /// Global agreement `Delta = sum(alpha_i)`.
    pub fn delta(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Proportion classified at random, `B = 1 - Delta`.
    pub fn chance_mass(&self) -> f64 {
        1.0 - self.delta()
    }

    /// Cell probabilities `p_ij = [i == j] alpha_i + B pi_i1 pi_j2`.
    pub fn joint_probabilities(&self) -> Vec<Vec<f64>> {
        build_joint_probabilities(self)
    }

    /// Category totals `t_i` and diagonal probabilities `p_ii` implied by
    /// the model.
    pub fn margins(&self) -> CategoryMargins {
        let b = self.chance_mass();
        let k = self.k();
        CategoryMargins {
            t: (0..k).map(|i| 2.0 * self.alpha[i] + b * (self.pi1[i] + self.pi2[i])).collect(),
            diagonal: (0..k).map(|i| self.alpha[i] + b * self.pi1[i] * self.pi2[i]).collect(),
        }
    }
}

/// Cell probabilities of the delta model.
pub fn build_joint_probabilities(params: &PopulationParams) -> Vec<Vec<f64>> {
    let b = params.chance_mass();
    let k = params.k();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let chance = b * params.pi1[i] * params.pi2[j];
                    if i == j {
                        params.alpha[i] + chance
                    } else {
                        chance
                    }
                })
                .collect()
        })
        .collect()
}

/// Per-category totals `t_i = p_i. + p_.i` and diagonal probabilities, on
/// either the population or the observed scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMargins {
    pub t: Vec<f64>,
    pub diagonal: Vec<f64>,
}

impl CategoryMargins {
    pub fn observed(table: &ContingencyTable) -> Self {
        let k = table.k();
        CategoryMargins {
            t: (0..k).map(|i| table.category_total_proportion(i)).collect(),
            diagonal: (0..k).map(|i| table.diagonal_proportion(i)).collect(),
        }
    }
}

/// Consistency `S_i = 2 alpha_i / t_i`.
///
/// Undefined when `t_i = 0`, i.e. neither rater used the category.
pub fn consistency(alpha: f64, t: f64) -> Quantity {
    if t > 0.0 {
        Quantity::from_finite(2.0 * alpha / t)
    } else {
        Quantity::Undefined
    }
}

/// Ground-truth values of a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truths {
    pub delta: f64,
    pub t: Vec<f64>,
    pub consistency: Vec<Quantity>,
}

pub fn population_truths(params: &PopulationParams) -> Truths {
    let margins = params.margins();
    let consistency = params.alpha.iter().zip(&margins.t).map(|(&a, &t)| self::consistency(a, t)).collect();
    Truths { delta: params.delta(), t: margins.t, consistency }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn setting1() -> PopulationParams {
        PopulationParams::new(vec![0.05, 0.15, 0.2], vec![0.2, 0.3, 0.5], vec![0.2, 0.3, 0.5]).unwrap()
    }

    #[test]
    fn zero_agreement_is_independence() {
        let p = PopulationParams::new(vec![0.0; 3], vec![0.2, 0.3, 0.5], vec![0.2, 0.3, 0.5]).unwrap();
        let joint = p.joint_probabilities();
        assert!((joint[0][0] - 0.04).abs() < 1e-15);
        assert!((joint[1][2] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn setting1_diagonal_mass() {
        let joint = setting1().joint_probabilities();
        let diag: f64 = (0..3).map(|i| joint[i][i]).sum();
        assert!((diag - 0.628).abs() < 1e-12);
        assert!((setting1().delta() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn perfect_agreement_kills_chance() {
        let p = PopulationParams::new(vec![1.0, 0.0, 0.0], vec![0.1, 0.6, 0.3], vec![0.5, 0.25, 0.25]).unwrap();
        let joint = p.joint_probabilities();
        assert_eq!(joint[0][0], 1.0);
        let rest: f64 = joint.iter().flatten().sum::<f64>() - joint[0][0];
        assert_eq!(rest, 0.0);
    }

    #[test]
    fn consistency_examples() {
        assert!((consistency(0.1, 0.25).value().unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(consistency(0.0, 0.3), Quantity::Value(0.0));
        assert_eq!(consistency(0.2, 0.0), Quantity::Undefined);
        // setting 2, category 3
        let s3 = consistency(0.2, 0.4 + 0.6 * 0.7).value().unwrap();
        assert!((s3 - 0.4878).abs() < 1e-4);
    }

    #[test]
    fn truths_of_builtin_rows() {
        let t = population_truths(&setting1());
        assert!((t.delta - 0.40).abs() < 1e-12);
        assert!((t.consistency[2].value().unwrap() - 0.4).abs() < 1e-12);
        let s25 = PopulationParams::new(
            vec![0.05, 0.05, 0.05, 0.1, 0.15],
            vec![0.1, 0.15, 0.2, 0.25, 0.3],
            vec![0.1, 0.15, 0.2, 0.25, 0.3],
        )
        .unwrap();
        assert!((population_truths(&s25).delta - 0.40).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(matches!(
            PopulationParams::new(vec![0.1, 0.1], vec![0.5, 0.6], vec![0.5, 0.5]),
            Err(ModelError::NotNormalized { rater: 1, .. })
        ));
        assert!(matches!(
            PopulationParams::new(vec![0.6, 0.6], vec![0.5, 0.5], vec![0.5, 0.5]),
            Err(ModelError::DeltaAboveOne(_))
        ));
        assert!(matches!(
            PopulationParams::new(vec![-0.4, 0.1], vec![0.5, 0.5], vec![0.5, 0.5]),
            Err(ModelError::NegativeCell { row: 0, col: 0, .. })
        ));
        assert!(matches!(
            PopulationParams::new(vec![-0.01, 0.1], vec![0.5, 0.5], vec![0.5, 0.5]),
            Err(ModelError::NegativeAlpha { index: 0, .. })
        ));
        assert!(matches!(
            PopulationParams::new(vec![0.0, 0.1], vec![1.5, -0.5], vec![0.5, 0.5]),
            Err(ModelError::ProbabilityOutOfRange { rater: 1, index: 0, .. })
        ));
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, k).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    fn params() -> impl Strategy<Value = PopulationParams> {
        (2usize..7).prop_flat_map(|k| (simplex(k), simplex(k), simplex(k), 0.0f64..1.0)).prop_map(
            |(a, p1, p2, delta)| {
                let alpha = a.into_iter().map(|x| x * delta).collect();
                PopulationParams::new(alpha, p1, p2).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn joint_sums_to_one_and_matches_loop(p in params()) {
            let joint = build_joint_probabilities(&p);
            let total: f64 = joint.iter().flatten().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let b = 1.0 - p.alpha().iter().sum::<f64>();
            for i in 0..p.k() {
                for j in 0..p.k() {
                    let mut expected = b * p.pi1()[i] * p.pi2()[j];
                    if i == j { expected += p.alpha()[i]; }
                    prop_assert_eq!(joint[i][j], expected);
                }
            }
        }

        #[test]
        fn diagonal_decomposes(p in params()) {
            let joint = build_joint_probabilities(&p);
            let b = p.chance_mass();
            for i in 0..p.k() {
                prop_assert!((joint[i][i] - b * p.pi1()[i] * p.pi2()[i] - p.alpha()[i]).abs() < 1e-15);
            }
        }

        #[test]
        fn consistency_is_homogeneous(a in -1.0f64..1.0, t in 0.01f64..2.0, c in 0.01f64..100.0) {
            let lhs = consistency(c * a, c * t).value().unwrap();
            let rhs = consistency(a, t).value().unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }
}
