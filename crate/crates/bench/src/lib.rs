//! Fixtures shared by the benchmarks.

use deltakit_core::ContingencyTable;

fn table(rows: &[&[f64]]) -> ContingencyTable {
    ContingencyTable::new(rows.iter().map(|r| r.to_vec()).collect()).expect("fixture table")
}

/// Three categories, n = 100.
pub fn fleiss() -> ContingencyTable {
    table(&[&[75.0, 1.0, 4.0], &[5.0, 4.0, 1.0], &[0.0, 0.0, 10.0]])
}

/// Four categories, n = 30.
pub fn kramer_feinstein() -> ContingencyTable {
    table(&[&[1.0, 2.0, 0.0, 0.0], &[1.0, 5.0, 3.0, 1.0], &[1.0, 4.0, 5.0, 2.0], &[1.0, 1.0, 1.0, 2.0]])
}

/// Two categories, n = 100.
pub fn nelson_pepe() -> ContingencyTable {
    table(&[&[80.0, 10.0], &[10.0, 0.0]])
}
