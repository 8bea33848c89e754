//! Two-category tables and gold-standard statistics.
//!
//! A 2x2 table leaves the delta model under-determined, so it is embedded in
//! a 3x3 table with an empty virtual third category and 0.5 added to every
//! cell. Agreement measures for the original two categories are then
//! rescaled by `1 - p_3.`, the share of the augmented table outside the
//! virtual row.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{
    chance_quantities, classic_estimates, estimated_variances, unbiased_estimates, EstimateFamily, EstimatorError,
    Family, FamilyVariances,
};
use crate::mle::{fit_delta_mle, FitError, MleFit};
use crate::quantity::Quantity;
use crate::table::ContingencyTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("the two-category pathway needs a 2x2 table, got {0}x{0}")]
    NotTwoByTwo(usize),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Embeds a 2x2 table in a 3x3 table with an empty third category, then adds
/// 0.5 to all nine cells.
pub fn augment_2x2(table: &ContingencyTable) -> Result<ContingencyTable, SpecialError> {
    if table.k() != 2 {
        return Err(SpecialError::NotTwoByTwo(table.k()));
    }
    let rows = (0..3)
        .map(|i| (0..3).map(|j| if i < 2 && j < 2 { table.cell(i, j) + 0.5 } else { 0.5 }).collect())
        .collect();
    Ok(ContingencyTable::new(rows).expect("augmented table is valid"))
}

/// Rescaled agreement for the two real categories of an augmented table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarredEstimates {
    pub family: Family,
    pub delta: f64,
    pub alpha: Vec<f64>,
    /// `S_i` of the augmented fit; the rescaling leaves it unchanged.
    pub consistency: Vec<Quantity>,
    pub variances: FamilyVariances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoByTwoReport {
    pub original: ContingencyTable,
    pub augmented: ContingencyTable,
    pub fit: MleFit,
    /// `1 - p_3.` on the augmented table.
    pub scale: f64,
    pub classic: StarredEstimates,
    pub unbiased: StarredEstimates,
    /// The underlying 3x3 families, used for gold-standard statistics.
    pub families: Vec<EstimateFamily>,
}

/// Fits a 2x2 table through the augmented 3x3 table.
pub fn fit_2x2(table: &ContingencyTable) -> Result<TwoByTwoReport, SpecialError> {
    let augmented = augment_2x2(table)?;
    let fit = fit_delta_mle(&augmented)?;
    let classic = classic_estimates(&fit, &augmented)?;
    let unbiased = unbiased_estimates(&fit, &augmented)?;
    let scale = 1.0 - augmented.row_proportion(2);
    let starred_classic = starred(&fit, &augmented, &classic, scale)?;
    let starred_unbiased = starred(&fit, &augmented, &unbiased, scale)?;
    Ok(TwoByTwoReport {
        original: table.clone(),
        augmented,
        fit,
        scale,
        classic: starred_classic,
        unbiased: starred_unbiased,
        families: vec![classic, unbiased],
    })
}

/// `alpha_i* = alpha_i / q`, `Delta* = alpha_1* + alpha_2*` with
///
/// ```text
/// V(alpha_i*) = [(1 - D) X_i {X_i/(X - 1) - 1} + q alpha_i* (1 - alpha_i*)] / (n q^2)
/// V(Delta*)   = [(1 - D)(1 - X_3)(X - X_3)/(X - 1) + q Delta* (1 - Delta*)] / (n q^2)
/// ```
///
/// where `D` is the family's global agreement on the augmented table.
fn starred(
    fit: &MleFit,
    augmented: &ContingencyTable,
    family: &EstimateFamily,
    q: f64,
) -> Result<StarredEstimates, SpecialError> {
    let alpha: Vec<f64> = family.alpha[..2].iter().map(|a| a / q).collect();
    let delta = alpha[0] + alpha[1];
    let n = augmented.n();
    let denom = n * q * q;
    let b = 1.0 - family.delta;
    let (pi1, pi2) = (fit.pi1().expect("augmented fit is interior"), fit.pi2().expect("augmented fit is interior"));
    let cq = chance_quantities(pi1, pi2);
    let var_of = |chance: Result<f64, EstimatorError>, value: f64| match chance {
        Ok(c) => {
            let v = (b * c + q * value * (1.0 - value)) / denom;
            if v >= 0.0 { Quantity::Value(v) } else { Quantity::Singular }
        }
        Err(_) => Quantity::Singular,
    };
    let var_delta = var_of(cq.excluded_factor(2), delta);
    let var_alpha = (0..2).map(|i| var_of(cq.h_factor(i), alpha[i])).collect();
    let full = estimated_variances(fit, augmented, family)?;
    Ok(StarredEstimates {
        family: family.family,
        delta,
        alpha,
        consistency: family.consistency[..2].to_vec(),
        variances: FamilyVariances {
            delta: var_delta,
            alpha: var_alpha,
            consistency: full.consistency[..2].to_vec(),
        },
    })
}

/// Conformity `F_i = alpha_i / p_i.` and predictivity `P_i = alpha_i / p_.i`
/// of the column rater, with the row rater as gold standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldStandardStats {
    pub family: Family,
    pub conformity: Vec<Quantity>,
    pub predictivity: Vec<Quantity>,
    pub conformity_variance: Vec<Quantity>,
    pub predictivity_variance: Vec<Quantity>,
}

impl GoldStandardStats {
    /// Keeps the first `k` categories (drops the virtual one of a 2x2 fit).
    pub fn truncated(mut self, k: usize) -> Self {
        self.conformity.truncate(k);
        self.predictivity.truncate(k);
        self.conformity_variance.truncate(k);
        self.predictivity_variance.truncate(k);
        self
    }
}

/// `F_i`, `P_i` and `V(F_i) = {H_i + p_i. F_i (1 - F_i)} / (n p_i.^2)`
/// (likewise for `P_i` with `p_.i`), with `H_i` computed from the family's
/// global agreement. A column gold standard is handled by transposing the
/// table and refitting.
pub fn gold_standard_stats(fit: &MleFit, table: &ContingencyTable, family: &EstimateFamily) -> GoldStandardStats {
    let k = fit.k();
    let n = table.n();
    let b = 1.0 - family.delta;
    let h: Vec<Result<f64, EstimatorError>> = match (fit.pi1(), fit.pi2()) {
        (Some(pi1), Some(pi2)) => {
            let cq = chance_quantities(pi1, pi2);
            (0..k).map(|i| cq.h_factor(i).map(|x| b * x)).collect()
        }
        _ => vec![Ok(0.0); k],
    };
    let ratio = |i: usize, margin: f64| -> (Quantity, Quantity) {
        if margin <= 0.0 {
            return (Quantity::Undefined, Quantity::Undefined);
        }
        let value = family.alpha[i] / margin;
        let var = match h[i] {
            Ok(h) => {
                let v = (h + margin * value * (1.0 - value)) / (n * margin * margin);
                if v >= 0.0 { Quantity::Value(v) } else { Quantity::Singular }
            }
            Err(_) => Quantity::Singular,
        };
        (Quantity::Value(value), var)
    };
    let (conformity, conformity_variance) = (0..k).map(|i| ratio(i, table.row_proportion(i))).unzip();
    let (predictivity, predictivity_variance) = (0..k).map(|i| ratio(i, table.col_proportion(i))).unzip();
    GoldStandardStats { family: family.family, conformity, predictivity, conformity_variance, predictivity_variance }
}

/// The same table with the raters swapped, so that a column gold standard
/// becomes a row gold standard.
pub fn with_column_gold_standard(table: &ContingencyTable) -> ContingencyTable {
    table.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[f64]]) -> ContingencyTable {
        ContingencyTable::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn nelson_pepe() -> ContingencyTable {
        table(&[&[80.0, 10.0], &[10.0, 0.0]])
    }

    #[test]
    fn augmentation_matches_layout() {
        let a = augment_2x2(&nelson_pepe()).unwrap();
        assert_eq!(a.to_rows(), vec![vec![80.5, 10.5, 0.5], vec![10.5, 0.5, 0.5], vec![0.5, 0.5, 0.5]]);
        assert_eq!(a.n(), 104.5);

        let d = augment_2x2(&table(&[&[50.0, 0.0], &[0.0, 50.0]])).unwrap();
        assert_eq!(d.to_rows(), vec![vec![50.5, 0.5, 0.5], vec![0.5, 50.5, 0.5], vec![0.5, 0.5, 0.5]]);
    }

    #[test]
    fn augmentation_rejects_three_categories() {
        let t = table(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(augment_2x2(&t), Err(SpecialError::NotTwoByTwo(3)));
    }

    #[test]
    fn nelson_pepe_starred() {
        let r = fit_2x2(&nelson_pepe()).unwrap();
        assert!((r.classic.delta - 0.583).abs() < 1e-3);
        assert!((r.unbiased.delta - 0.714).abs() < 1e-3);
        assert!((r.classic.alpha[0] - 0.680).abs() < 1e-3);
        assert!((r.unbiased.alpha[0] - 0.745).abs() < 1e-3);
        assert!((r.unbiased.alpha[1] + 0.031).abs() < 1e-3);
        assert!((r.classic.consistency[1].value().unwrap() + 0.870).abs() < 1e-3);
        assert!((r.unbiased.consistency[1].value().unwrap() + 0.280).abs() < 1e-3);
        assert_eq!(r.classic.delta, r.classic.alpha[0] + r.classic.alpha[1]);
        assert!(r.classic.variances.delta.value().unwrap() > 0.0);
    }

    #[test]
    fn symmetric_two_by_two() {
        let r = fit_2x2(&table(&[&[45.0, 5.0], &[5.0, 45.0]])).unwrap();
        assert!((r.classic.alpha[0] - r.classic.alpha[1]).abs() < 1e-9);
        assert!((r.unbiased.alpha[0] - r.unbiased.alpha[1]).abs() < 1e-9);
    }

    #[test]
    fn fleiss_gold_standard() {
        let t = table(&[&[75.0, 1.0, 4.0], &[5.0, 4.0, 1.0], &[0.0, 0.0, 10.0]]);
        let fit = fit_delta_mle(&t).unwrap();
        let c = classic_estimates(&fit, &t).unwrap();
        let g = gold_standard_stats(&fit, &t, &c);
        assert!((g.conformity[2].value().unwrap() - 1.0).abs() < 1e-12);
        assert!((g.predictivity[2].value().unwrap() - 0.1 / 0.15).abs() < 1e-12);
        for i in 0..3 {
            let (f, p) = (g.conformity[i].value().unwrap(), g.predictivity[i].value().unwrap());
            let s = c.consistency[i].value().unwrap();
            assert!((2.0 / (1.0 / f + 1.0 / p) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn nelson_pepe_gold_standard() {
        let r = fit_2x2(&nelson_pepe()).unwrap();
        let g = gold_standard_stats(&r.fit, &r.augmented, &r.families[0]).truncated(2);
        let gu = gold_standard_stats(&r.fit, &r.augmented, &r.families[1]).truncated(2);
        assert!((g.conformity[0].value().unwrap() - 0.765).abs() < 1e-3);
        assert!((g.predictivity[0].value().unwrap() - 0.765).abs() < 1e-3);
        assert!((gu.conformity[0].value().unwrap() - 0.839).abs() < 1e-3);
        assert!((gu.conformity[1].value().unwrap() + 0.280).abs() < 1e-3);
        assert_eq!(g.conformity.len(), 2);
    }

    #[test]
    fn empty_margin_is_undefined() {
        let t = table(&[&[10.0, 2.0, 0.0], &[3.0, 10.0, 0.0], &[1.0, 1.0, 0.0]]);
        let fit = crate::mle::fit_with_correction(&t).unwrap();
        let c = classic_estimates(&fit.fit, &fit.table).unwrap();
        let g = gold_standard_stats(&fit.fit, &t, &c);
        assert_eq!(g.predictivity[2], Quantity::Undefined);
    }

    #[test]
    fn transpose_helper_swaps_roles() {
        let t = table(&[&[75.0, 1.0, 4.0], &[5.0, 4.0, 1.0], &[0.0, 0.0, 10.0]]);
        let tt = with_column_gold_standard(&t);
        assert_eq!(tt.row_total(2), t.col_total(2));
    }
}
