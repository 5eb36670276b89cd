//! Warehouse schema model and synthesis.
//!
//! A warehouse is a set of fact tables over a shared pool of dimensions.
//! Each dimension is a chain of hierarchy tables from the finest level
//! (level 1, the one fact tables reference) up to the coarsest; each finer
//! level links to the next coarser one, giving the classic snowflake shape.
//! A single fact table over flat dimensions degenerates to a star; several
//! fact tables sharing dimensions form a constellation. Which dimensions a
//! fact table gets is the only random choice here, so the same expanded
//! parameters always produce the same table and column names.

use crate::naming;
use crate::params::{level_cardinality_f64, LowLevelParams, ParamError};
use crate::rng::SeededRng;
use thiserror::Error;

/// One hierarchy level table of a dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyLevelDef {
    /// 0-based ordinal of the owning dimension.
    pub dim: usize,
    /// 1-based level number; 1 is the finest level.
    pub level: usize,
    pub table_name: String,
    /// Key column: `{table}_PK`, valued 1..=cardinality.
    pub primary_key: String,
    /// Member (descriptor) columns: `{table}_DESCR{k}`.
    pub members: Vec<String>,
    /// Link column to the next coarser level; absent at the coarsest level.
    pub foreign_key: Option<String>,
    /// Row count the data generator will produce for this level.
    pub target_cardinality: u64,
}

/// A dimension: its hierarchy levels ordered finest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionDef {
    /// 0-based ordinal; names use `index + 1`.
    pub index: usize,
    /// `levels[0]` is level 1 (finest), `levels.last()` the coarsest.
    pub levels: Vec<HierarchyLevelDef>,
}

impl DimensionDef {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// The level table fact rows reference.
    pub fn finest(&self) -> &HierarchyLevelDef {
        &self.levels[0]
    }

    /// Level by its 1-based number.
    pub fn level(&self, level: usize) -> &HierarchyLevelDef {
        &self.levels[level - 1]
    }
}

/// A fact table: foreign keys into dimensions plus measures.
#[derive(Debug, Clone, PartialEq)]
pub struct FactTableDef {
    /// 0-based ordinal; the name uses `index + 1`.
    pub index: usize,
    pub table_name: String,
    /// 0-based ordinals of referenced dimensions, in attachment order.
    /// Always distinct.
    pub dim_refs: Vec<usize>,
    /// Key columns aligned with `dim_refs`: `{finest level}_FK`.
    pub key_attrs: Vec<String>,
    /// Measure columns: `{table}_MEAS{k}`.
    pub measures: Vec<String>,
    /// Fraction of the dimension cross product realized as rows.
    pub density: f64,
}

/// The synthesized warehouse.
#[derive(Debug, Clone, PartialEq)]
pub struct WarehouseSchema {
    pub dimensions: Vec<DimensionDef>,
    pub fact_tables: Vec<FactTableDef>,
}

impl WarehouseSchema {
    /// All table names in canonical order: dimensions ascending with levels
    /// finest first, then fact tables.
    pub fn all_table_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for dim in &self.dimensions {
            for level in &dim.levels {
                names.push(level.table_name.clone());
            }
        }
        for fact in &self.fact_tables {
            names.push(fact.table_name.clone());
        }
        names
    }

    pub fn table_count(&self) -> usize {
        self.fact_tables.len()
            + self
                .dimensions
                .iter()
                .map(|d| d.levels.len())
                .sum::<usize>()
    }
}

/// Observed warehouse contents: per-table row counts in canonical order and
/// their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct WarehouseStats {
    pub table_counts: Vec<(String, u64)>,
    pub global_size: u64,
}

impl WarehouseStats {
    pub fn count(&self, table: &str) -> Option<u64> {
        self.table_counts
            .iter()
            .find(|(name, _)| name == table)
            .map(|&(_, n)| n)
    }
}

/// Schema synthesis failures.
#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("invalid parameters: {0}")]
    InvalidParams(#[from] ParamError),
    #[error("target cardinality of {table} does not fit a 64-bit row key")]
    CardinalityOverflow { table: String },
}

/// Builds the warehouse schema for an expanded parameter set.
///
/// Dimension structure is a pure function of the parameters; the RNG only
/// decides which dimensions each fact table references (a uniform draw per
/// slot, without replacement). Intra-dimension link columns are named after
/// the coarser level they point to, so joins read
/// `DIM1_1.DIM1_2_FK = DIM1_2.DIM1_2_PK`.
pub fn build_schema(
    low: &LowLevelParams,
    rng: &mut SeededRng,
) -> Result<WarehouseSchema, SchemaError> {
    low.validate()?;

    let mut dimensions = Vec::with_capacity(low.tot_nb_dim);
    for d in 0..low.tot_nb_dim {
        let depth = low.nb_levels[d];
        let mut levels = Vec::with_capacity(depth);
        for level in 1..=depth {
            let table_name = naming::level_table(d + 1, level);
            let cardinality =
                level_cardinality_f64(low.hhlevel_size[d], low.dim_sfactor[d], depth, level);
            if cardinality > u64::MAX as f64 {
                return Err(SchemaError::CardinalityOverflow { table: table_name });
            }
            levels.push(HierarchyLevelDef {
                dim: d,
                level,
                primary_key: naming::primary_key(&table_name),
                members: (1..=low.nb_att[d][level - 1])
                    .map(|k| naming::member(&table_name, k))
                    .collect(),
                foreign_key: (level < depth)
                    .then(|| naming::foreign_key(&naming::level_table(d + 1, level + 1))),
                target_cardinality: cardinality as u64,
                table_name,
            });
        }
        dimensions.push(DimensionDef { index: d, levels });
    }

    let mut fact_tables = Vec::with_capacity(low.nb_ft);
    for f in 0..low.nb_ft {
        let table_name = naming::fact_table(f + 1);
        let mut dim_refs: Vec<usize> = Vec::with_capacity(low.nb_dim[f]);
        for _ in 0..low.nb_dim[f] {
            dim_refs.push(rng.random_dimension(low.tot_nb_dim, &dim_refs));
        }
        let key_attrs = dim_refs
            .iter()
            .map(|&d| naming::foreign_key(&dimensions[d].finest().table_name))
            .collect();
        fact_tables.push(FactTableDef {
            index: f,
            measures: (1..=low.nb_meas[f])
                .map(|k| naming::measure(&table_name, k))
                .collect(),
            table_name,
            dim_refs,
            key_attrs,
            density: low.density[f],
        });
    }

    Ok(WarehouseSchema {
        dimensions,
        fact_tables,
    })
}
