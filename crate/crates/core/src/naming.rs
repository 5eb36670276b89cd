//! Canonical names for generated tables and attributes.
//!
//! All identifiers in a generated warehouse are derived from table ordinals
//! through these functions, so every component (DDL, data generation, query
//! rendering, refresh SQL) agrees on spelling without passing strings around.
//! Ordinals are 1-based in names: the first fact table is `FT1`, the finest
//! level of the third dimension is `DIM3_1`.

/// Name of fact table `i` (1-based): `FT{i}`.
pub fn fact_table(i: usize) -> String {
    format!("FT{i}")
}

/// Name of hierarchy level `level` (1 = finest) of dimension `d` (1-based):
/// `DIM{d}_{level}`.
pub fn level_table(d: usize, level: usize) -> String {
    format!("DIM{d}_{level}")
}

/// Primary key attribute of `table`: `{table}_PK`.
pub fn primary_key(table: &str) -> String {
    format!("{table}_PK")
}

/// Member attribute `k` (1-based) of `table`: `{table}_DESCR{k}`.
pub fn member(table: &str, k: usize) -> String {
    format!("{table}_DESCR{k}")
}

/// Foreign key attribute referencing `target` from any table: `{target}_FK`.
///
/// The referencing table's own name does not participate, so a fact table
/// and a finer hierarchy level pointing at the same target spell the
/// attribute identically, which keeps join clauses uniform.
pub fn foreign_key(target: &str) -> String {
    format!("{target}_FK")
}

/// Measure attribute `k` (1-based) of fact table `table`: `{table}_MEAS{k}`.
pub fn measure(table: &str, k: usize) -> String {
    format!("{table}_MEAS{k}")
}
