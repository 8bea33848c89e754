//! Cohen's kappa.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::ContingencyTable;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KappaError {
    #[error("kappa is undefined: expected agreement is 1")]
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub observed: f64,
    pub expected: f64,
    pub kappa: f64,
}

/// `kappa = (I_o - I_e) / (1 - I_e)` with `I_e = sum_i p_i. p_.i`.
pub fn cohen_kappa(table: &ContingencyTable) -> Result<KappaResult, KappaError> {
    let observed = table.observed_agreement();
    let expected: f64 = (0..table.k()).map(|i| table.row_proportion(i) * table.col_proportion(i)).sum();
    if expected >= 1.0 - 1e-12 {
        return Err(KappaError::Undefined);
    }
    Ok(KappaResult { observed, expected, kappa: (observed - expected) / (1.0 - expected) })
}
