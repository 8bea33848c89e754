//! Square count tables of two raters' classifications.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("table needs at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("row {} has {found} entries, expected {expected} (table must be square)", row + 1)]
    NotSquare { row: usize, expected: usize, found: usize },
    #[error("cell ({}, {}) is negative: {value}", row + 1, col + 1)]
    NegativeCount { row: usize, col: usize, value: f64 },
    #[error("cell ({}, {}) is not a finite number", row + 1, col + 1)]
    NonFinite { row: usize, col: usize },
    #[error("table total is zero")]
    Empty,
}

/// A K x K table of non-negative counts `x_ij` (rows: rater 1, columns:
/// rater 2).
///
/// Counts are real-valued so that continuity-corrected tables (every cell
/// plus 0.5) share the type. Marginals are computed once at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct ContingencyTable {
    k: usize,
    cells: Vec<f64>,
    rows: Vec<f64>,
    cols: Vec<f64>,
    n: f64,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    cells: Vec<Vec<f64>>,
}

impl TryFrom<TableRepr> for ContingencyTable {
    type Error = TableError;

    fn try_from(repr: TableRepr) -> Result<Self, TableError> {
        ContingencyTable::new(repr.cells)
    }
}

impl From<ContingencyTable> for TableRepr {
    fn from(t: ContingencyTable) -> Self {
        TableRepr { cells: t.to_rows() }
    }
}

impl ContingencyTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, TableError> {
        let k = rows.len();
        if k < 2 {
            return Err(TableError::TooFewCategories(k));
        }
        let mut cells = Vec::with_capacity(k * k);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(TableError::NotSquare { row: i, expected: k, found: row.len() });
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(TableError::NonFinite { row: i, col: j });
                }
                if x < 0.0 {
                    return Err(TableError::NegativeCount { row: i, col: j, value: x });
                }
            }
            cells.extend(row);
        }
        Self::from_cells(k, cells)
    }

    /// Builds a table from integer counts, as produced by sampling.
    pub fn from_counts(k: usize, counts: &[u32]) -> Result<Self, TableError> {
        assert_eq!(counts.len(), k * k, "count vector must hold k*k cells");
        if k < 2 {
            return Err(TableError::TooFewCategories(k));
        }
        Self::from_cells(k, counts.iter().map(|&c| f64::from(c)).collect())
    }

    fn from_cells(k: usize, cells: Vec<f64>) -> Result<Self, TableError> {
        let mut rows = vec![0.0; k];
        let mut cols = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                let x = cells[i * k + j];
                rows[i] += x;
                cols[j] += x;
            }
        }
        let n: f64 = rows.iter().sum();
        if n <= 0.0 {
            return Err(TableError::Empty);
        }
        Ok(ContingencyTable { k, cells, rows, cols, n })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Total count.
    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.k + j]
    }

    pub fn row_total(&self, i: usize) -> f64 {
        self.rows[i]
    }

    pub fn col_total(&self, j: usize) -> f64 {
        self.cols[j]
    }

    /// Observed proportion `x_ij / n`.
    pub fn proportion(&self, i: usize, j: usize) -> f64 {
        self.cell(i, j) / self.n
    }

    pub fn row_proportion(&self, i: usize) -> f64 {
        self.rows[i] / self.n
    }

    pub fn col_proportion(&self, j: usize) -> f64 {
        self.cols[j] / self.n
    }

    pub fn diagonal_proportion(&self, i: usize) -> f64 {
        self.proportion(i, i)
    }

    /// `p_i. + p_.i`, the share of classifications into category `i` by
    /// either rater.
    pub fn category_total_proportion(&self, i: usize) -> f64 {
        self.row_proportion(i) + self.col_proportion(i)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.cells.chunks(self.k).map(|r| r.to_vec()).collect()
    }

    /// Observed agreement index: the sum of diagonal proportions.
    pub fn observed_agreement(&self) -> f64 {
        (0..self.k).map(|i| self.diagonal_proportion(i)).sum()
    }

    /// Swaps the roles of the two raters.
    pub fn transpose(&self) -> Self {
        let k = self.k;
        let mut cells = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                cells[j * k + i] = self.cell(i, j);
            }
        }
        ContingencyTable { k, cells, rows: self.cols.clone(), cols: self.rows.clone(), n: self.n }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.k).all(|i| (0..i).all(|j| self.cell(i, j) == self.cell(j, i)))
    }

    /// A copy with `amount` added to every cell.
    pub fn with_added(&self, amount: f64) -> Self {
        let cells = self.cells.iter().map(|x| x + amount).collect();
        Self::from_cells(self.k, cells).expect("adding a positive amount keeps the table valid")
    }

    /// A copy with every cell multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite());
        let cells = self.cells.iter().map(|x| x * factor).collect();
        Self::from_cells(self.k, cells).expect("positive scaling keeps the table valid")
    }

    /// Multinomial log-likelihood `sum x_ij ln p_ij` of the table under the
    /// given cell probabilities. Empty cells contribute nothing; an observed
    /// cell with zero probability gives negative infinity.
    pub fn log_likelihood(&self, probs: &[Vec<f64>]) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                let x = self.cell(i, j);
                if x > 0.0 {
                    let p = probs[i][j];
                    if p <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    ll += x * p.ln();
                }
            }
        }
        ll
    }
}

/// Observed agreement index `I_o = sum_i p_ii`.
pub fn observed_agreement_index(table: &ContingencyTable) -> f64 {
    table.observed_agreement()
}
