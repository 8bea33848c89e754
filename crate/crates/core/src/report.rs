//! End-to-end analysis of one table and its text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{estimated_variances, estimates, EstimatorError, Family, FamilyVariances};
use crate::kappa::cohen_kappa;
use crate::mle::{fit_with_correction, FitError, MleFit};
use crate::quantity::Quantity;
use crate::special::{fit_2x2, gold_standard_stats, GoldStandardStats, SpecialError, StarredEstimates};
use crate::table::ContingencyTable;

/// Which rater is the gold standard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldStandard {
    Rows,
    Columns,
}

impl std::str::FromStr for GoldStandard {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rows" | "row" => Ok(GoldStandard::Rows),
            "columns" | "column" | "cols" => Ok(GoldStandard::Columns),
            other => Err(format!("unknown gold standard `{other}` (expected rows or columns)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    /// Route through the 2x2 pathway. Implied for 2x2 input.
    pub two_by_two: bool,
    pub gold_standard: Option<GoldStandard>,
    pub families: Vec<Family>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { two_by_two: false, gold_standard: None, families: vec![Family::Classic, Family::Unbiased] }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("--two-by-two needs a 2x2 table, got {0}x{0}")]
    NotTwoByTwo(usize),
    #[error("solver: {0}")]
    Fit(#[from] FitError),
    #[error("estimator: {0}")]
    Estimator(#[from] EstimatorError),
}

impl From<SpecialError> for AnalysisError {
    fn from(e: SpecialError) -> Self {
        match e {
            SpecialError::NotTwoByTwo(k) => AnalysisError::NotTwoByTwo(k),
            SpecialError::Fit(e) => AnalysisError::Fit(e),
            SpecialError::Estimator(e) => AnalysisError::Estimator(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Standard,
    TwoCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    pub k: usize,
    pub n: f64,
    pub cells: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyBlock {
    pub family: Family,
    pub delta: f64,
    pub alpha: Vec<f64>,
    pub consistency: Vec<Quantity>,
    /// Absent for a boundary fit, where the variance formulas do not apply.
    pub variances: Option<FamilyVariances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoByTwoBlock {
    pub augmented: Vec<Vec<f64>>,
    /// `1 - p_3.` of the augmented table.
    pub scale: f64,
    pub classic: StarredEstimates,
    pub unbiased: StarredEstimates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaBlock {
    pub observed: f64,
    pub expected: f64,
    pub kappa: Quantity,
    /// The bias-corrected kappa is not computed by this tool.
    pub kappa_cu: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldStandardBlock {
    pub rater: GoldStandard,
    pub families: Vec<GoldStandardStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub input: InputEcho,
    pub mode: Mode,
    /// Set when the fit is on the table with 0.5 added to every cell.
    pub corrected: bool,
    pub fit: MleFit,
    pub families: Vec<FamilyBlock>,
    pub two_by_two: Option<TwoByTwoBlock>,
    pub gold_standard: Option<GoldStandardBlock>,
    pub kappa: KappaBlock,
    pub diagnostics: Vec<String>,
}

fn family_blocks(
    fit: &MleFit,
    table: &ContingencyTable,
    families: &[Family],
    diagnostics: &mut Vec<String>,
) -> Result<Vec<FamilyBlock>, AnalysisError> {
    let mut blocks = Vec::with_capacity(families.len());
    for &family in families {
        let e = estimates(fit, table, family)?;
        let variances = match estimated_variances(fit, table, &e) {
            Ok(v) => Some(v),
            Err(EstimatorError::Boundary) => None,
            Err(err) => return Err(err.into()),
        };
        if let Some(v) = &variances {
            let singular = std::iter::once(&v.delta).chain(&v.alpha).chain(&v.consistency).any(|q| *q == Quantity::Singular);
            if singular {
                diagnostics.push(format!("{} family: some variances are singular", family.label()));
            }
        }
        blocks.push(FamilyBlock {
            family,
            delta: e.delta,
            alpha: e.alpha,
            consistency: e.consistency,
            variances,
        });
    }
    Ok(blocks)
}

fn fit_diagnostics(fit: &MleFit, diagnostics: &mut Vec<String>) {
    diagnostics.push(format!("solver residual {:.3e}", fit.residual));
    if fit.boundary {
        diagnostics.push("no disagreements: boundary fit with Delta = 1".into());
    }
    if let Some(k) = fit.larger_root {
        diagnostics.push(format!("category {} uses the larger root of its equation", k + 1));
    }
    let degenerate: Vec<String> =
        fit.degenerate.iter().enumerate().filter(|(_, d)| **d).map(|(i, _)| (i + 1).to_string()).collect();
    if !degenerate.is_empty() && !fit.boundary {
        diagnostics.push(format!("lambda fixed at 0 in categories {}", degenerate.join(", ")));
    }
    if fit.candidates > 1 {
        diagnostics.push(format!("{} admissible roots; kept the most likely", fit.candidates));
    }
}

fn gold_families(families: &[Family]) -> Vec<Family> {
    families.iter().copied().filter(|f| *f != Family::Alternative).collect()
}

/// Fits the table and assembles every requested block.
pub fn build_report(table: &ContingencyTable, options: &ReportOptions) -> Result<AnalysisReport, AnalysisError> {
    let mut diagnostics = Vec::new();
    let kappa = match cohen_kappa(table) {
        Ok(r) => KappaBlock { observed: r.observed, expected: r.expected, kappa: Quantity::Value(r.kappa), kappa_cu: "unavailable".into() },
        Err(_) => KappaBlock {
            observed: table.observed_agreement(),
            expected: 1.0,
            kappa: Quantity::Undefined,
            kappa_cu: "unavailable".into(),
        },
    };
    let input = InputEcho { k: table.k(), n: table.n(), cells: table.to_rows() };
    if options.two_by_two && table.k() != 2 {
        return Err(AnalysisError::NotTwoByTwo(table.k()));
    }

    if table.k() == 2 {
        if !options.two_by_two {
            diagnostics.push("2x2 input: using the two-category pathway".into());
        }
        let oriented = match options.gold_standard {
            Some(GoldStandard::Columns) => table.transpose(),
            _ => table.clone(),
        };
        let r = fit_2x2(&oriented)?;
        fit_diagnostics(&r.fit, &mut diagnostics);
        let families = family_blocks(&r.fit, &r.augmented, &options.families, &mut diagnostics)?;
        let gold_standard = match options.gold_standard {
            None => None,
            Some(rater) => Some(GoldStandardBlock {
                rater,
                families: gold_families(&options.families)
                    .into_iter()
                    .map(|f| {
                        let e = estimates(&r.fit, &r.augmented, f)?;
                        Ok(gold_standard_stats(&r.fit, &r.augmented, &e).truncated(2))
                    })
                    .collect::<Result<_, AnalysisError>>()?,
            }),
        };
        if options.gold_standard == Some(GoldStandard::Columns) {
            diagnostics.push("columns are the gold standard: raters swapped before fitting".into());
        }
        return Ok(AnalysisReport {
            input,
            mode: Mode::TwoCategory,
            corrected: true,
            fit: r.fit.clone(),
            families,
            two_by_two: Some(TwoByTwoBlock {
                augmented: r.augmented.to_rows(),
                scale: r.scale,
                classic: r.classic,
                unbiased: r.unbiased,
            }),
            gold_standard,
            kappa,
            diagnostics,
        });
    }

    let cf = fit_with_correction(table)?;
    if cf.corrected {
        diagnostics.push("likelihood equations have no admissible root: refitted with 0.5 added to every cell".into());
    }
    fit_diagnostics(&cf.fit, &mut diagnostics);
    let families = family_blocks(&cf.fit, &cf.table, &options.families, &mut diagnostics)?;
    let gold_standard = match options.gold_standard {
        None => None,
        Some(rater) => {
            let (fit, used) = match rater {
                GoldStandard::Rows => (cf.fit.clone(), cf.table.clone()),
                GoldStandard::Columns => {
                    diagnostics.push("columns are the gold standard: raters swapped for conformity and predictivity".into());
                    let t = fit_with_correction(&table.transpose())?;
                    (t.fit, t.table)
                }
            };
            let stats = gold_families(&options.families)
                .into_iter()
                .map(|f| Ok(gold_standard_stats(&fit, &used, &estimates(&fit, &used, f)?)))
                .collect::<Result<_, AnalysisError>>()?;
            Some(GoldStandardBlock { rater, families: stats })
        }
    };
    Ok(AnalysisReport {
        input,
        mode: Mode::Standard,
        corrected: cf.corrected,
        fit: cf.fit,
        families,
        two_by_two: None,
        gold_standard,
        kappa,
        diagnostics,
    })
}

/// Decimal places in text reports.
pub const TEXT_DECIMALS: usize = 3;

impl AnalysisReport {
    pub fn to_text(&self) -> String {
        let d = TEXT_DECIMALS;
        let q = |x: Quantity| x.display(d);
        let v = |x: f64| format!("{x:.d$}");
        let mut out = String::new();
        let mode = match self.mode {
            Mode::Standard => "standard",
            Mode::TwoCategory => "two-category",
        };
        let _ = writeln!(out, "K = {}, n = {}, mode: {mode}", self.input.k, self.input.n);
        if self.corrected && self.mode == Mode::Standard {
            let _ = writeln!(out, "fitted on the table with 0.5 added to every cell");
        }

        let width = 12;
        let header: String = self.families.iter().map(|f| format!("{:>width$}", f.family.label())).collect();
        let _ = writeln!(out, "\n{:<14}{header}", "");
        let line = |out: &mut String, label: &str, cells: Vec<String>| {
            let _ = writeln!(out, "{label:<14}{}", cells.iter().map(|c| format!("{c:>width$}")).collect::<String>());
        };
        line(&mut out, "Delta", self.families.iter().map(|f| v(f.delta)).collect());
        for i in 0..self.fit.k() {
            line(&mut out, &format!("alpha_{}", i + 1), self.families.iter().map(|f| v(f.alpha[i])).collect());
        }
        for i in 0..self.fit.k() {
            line(&mut out, &format!("S_{}", i + 1), self.families.iter().map(|f| q(f.consistency[i])).collect());
        }
        let var = |f: &FamilyBlock, pick: &dyn Fn(&FamilyVariances) -> Quantity| {
            f.variances.as_ref().map_or("n/a".to_string(), |x| q(pick(x)))
        };
        line(&mut out, "V(Delta)", self.families.iter().map(|f| var(f, &|x| x.delta)).collect());
        for i in 0..self.fit.k() {
            line(&mut out, &format!("V(alpha_{})", i + 1), self.families.iter().map(|f| var(f, &|x| x.alpha[i])).collect());
        }
        for i in 0..self.fit.k() {
            line(
                &mut out,
                &format!("V(S_{})", i + 1),
                self.families.iter().map(|f| var(f, &|x| x.consistency[i])).collect(),
            );
        }

        if let Some(tb) = &self.two_by_two {
            let _ = writeln!(out, "\ntwo-category measures (scale 1 - p_3. = {})", v(tb.scale));
            let _ = writeln!(out, "{:<14}{:>width$}{:>width$}", "", "classic", "u");
            let pair = |out: &mut String, label: &str, a: String, b: String| {
                let _ = writeln!(out, "{label:<14}{a:>width$}{b:>width$}");
            };
            pair(&mut out, "Delta*", v(tb.classic.delta), v(tb.unbiased.delta));
            for i in 0..2 {
                pair(&mut out, &format!("alpha_{}*", i + 1), v(tb.classic.alpha[i]), v(tb.unbiased.alpha[i]));
            }
            for i in 0..2 {
                pair(&mut out, &format!("S_{}", i + 1), q(tb.classic.consistency[i]), q(tb.unbiased.consistency[i]));
            }
            pair(&mut out, "V(Delta*)", q(tb.classic.variances.delta), q(tb.unbiased.variances.delta));
            for i in 0..2 {
                pair(
                    &mut out,
                    &format!("V(alpha_{}*)", i + 1),
                    q(tb.classic.variances.alpha[i]),
                    q(tb.unbiased.variances.alpha[i]),
                );
            }
        }

        if let Some(g) = &self.gold_standard {
            let rater = match g.rater {
                GoldStandard::Rows => "rows",
                GoldStandard::Columns => "columns",
            };
            let _ = writeln!(out, "\ngold standard: {rater}");
            let header: String = g.families.iter().map(|f| format!("{:>width$}", f.family.label())).collect();
            let _ = writeln!(out, "{:<14}{header}", "");
            let k = g.families.first().map_or(0, |f| f.conformity.len());
            for i in 0..k {
                line(&mut out, &format!("F_{}", i + 1), g.families.iter().map(|f| q(f.conformity[i])).collect());
            }
            for i in 0..k {
                line(&mut out, &format!("P_{}", i + 1), g.families.iter().map(|f| q(f.predictivity[i])).collect());
            }
            for i in 0..k {
                line(&mut out, &format!("V(F_{})", i + 1), g.families.iter().map(|f| q(f.conformity_variance[i])).collect());
            }
            for i in 0..k {
                line(
                    &mut out,
                    &format!("V(P_{})", i + 1),
                    g.families.iter().map(|f| q(f.predictivity_variance[i])).collect(),
                );
            }
        }

        let _ = writeln!(out, "\nkappa_C {}   kappa_CU {}", q(self.kappa.kappa), self.kappa.kappa_cu);
        if !self.diagnostics.is_empty() {
            let _ = writeln!(out, "\ndiagnostics:");
            for note in &self.diagnostics {
                let _ = writeln!(out, "  {note}");
            }
        }
        out
    }
}
