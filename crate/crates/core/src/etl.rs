//! Incremental warehouse refresh: quota planning and execution.
//!
//! A refresh phase inserts and modifies rows, never deletes. The global
//! refresh rate `grr` sets the total operation budget as a fraction of the
//! warehouse row count; `drr` splits it between dimensions and fact tables,
//! and `ir` splits each share between inserts and modifications. Budgets
//! divide evenly across tables (and across a dimension's hierarchy levels),
//! which leaves fractional per-table quotas at realistic rates;
//! [`plan_refresh`] realizes each quota as `floor(q)` plus a Bernoulli draw
//! on the fraction, so realized counts are integers whose expectation is
//! exactly the quota.
//!
//! Execution keeps the warehouse consistent: new dimension rows get the next
//! sequential key and link to an existing coarser row, coarser levels are
//! refreshed before finer ones, modifications rewrite only descriptive
//! members (dimensions) or measures (fact tables), and new fact rows never
//! duplicate an existing key combination.

use crate::backend::{Backend, BackendError};
use crate::naming;
use crate::params::ParamError;
use crate::rng::{SeededRng, StringReferential};
use crate::schema::{FactTableDef, HierarchyLevelDef, WarehouseSchema, WarehouseStats};
use crate::value::Value;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Refresh rates. The fact-table share (`1 - drr`) and the modification
/// share (`1 - ir`) are derived, not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct EtlParams {
    /// Global refresh rate: refresh operations per warehouse row.
    pub grr: f64,
    /// Dimension share of the refresh budget.
    pub drr: f64,
    /// Insert share of each table's budget; the rest are modifications.
    pub ir: f64,
}

impl Default for EtlParams {
    fn default() -> Self {
        EtlParams {
            grr: 0.01,
            drr: 0.05,
            ir: 0.95,
        }
    }
}

impl EtlParams {
    /// Fact-table share of the refresh budget.
    pub fn frr(&self) -> f64 {
        1.0 - self.drr
    }

    /// Modification share of each table's budget.
    pub fn mr(&self) -> f64 {
        1.0 - self.ir
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let rates = [("GRR", self.grr), ("DRR", self.drr), ("IR", self.ir)];
        for (name, p) in rates {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(ParamError::OutOfRange {
                    name: name.to_string(),
                    value: p,
                    expected: "in [0, 1]",
                });
            }
        }
        Ok(())
    }
}

/// One table's refresh budget: the real-valued quotas and the integer
/// counts they rounded to for this plan.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotaPair {
    pub insert_quota: f64,
    pub modify_quota: f64,
    /// Realized insert count: `floor(insert_quota)` or one more.
    pub inserts: u64,
    /// Realized modification count.
    pub modifies: u64,
}

impl QuotaPair {
    pub fn total(&self) -> u64 {
        self.inserts + self.modifies
    }
}

/// A realized refresh budget for every warehouse table.
#[derive(Debug, Clone, PartialEq)]
pub struct RefreshPlan {
    /// Quotas per dimension and hierarchy level, indexed `[dim][level - 1]`
    /// (finest level first, matching the schema's level order).
    pub dim_quotas: Vec<Vec<QuotaPair>>,
    /// Quotas per fact table.
    pub fact_quotas: Vec<QuotaPair>,
}

impl RefreshPlan {
    /// Total realized operations over all dimension levels.
    pub fn dimension_ops(&self) -> u64 {
        self.dim_quotas.iter().flatten().map(QuotaPair::total).sum()
    }

    /// Total realized operations over all fact tables.
    pub fn fact_ops(&self) -> u64 {
        self.fact_quotas.iter().map(QuotaPair::total).sum()
    }

    pub fn total_ops(&self) -> u64 {
        self.dimension_ops() + self.fact_ops()
    }

    pub fn is_empty(&self) -> bool {
        self.total_ops() == 0
    }
}

/// Rounds a real quota to an integer count without losing its expectation:
/// `floor(q)` plus a Bernoulli draw on the fractional part. A quota of zero
/// consumes no draw, so an all-zero plan is free.
fn realize(quota: f64, rng: &mut SeededRng) -> u64 {
    if quota <= 0.0 {
        return 0;
    }
    let base = quota.floor();
    let extra = rng.bernoulli(quota - base);
    base as u64 + extra as u64
}

/// Computes the refresh budget for one phase.
///
/// Per hierarchy level of dimension `d`:
/// `global_size * grr * drr * ir / tot_nb_dim / nb_levels(d)` inserts (the
/// modification share uses `1 - ir`). Per fact table:
/// `global_size * grr * (1 - drr) * ir / nb_ft` inserts. Realization draws
/// follow a fixed order (dimensions ascending, levels coarsest first,
/// inserts before modifications, then fact tables), which is part of the
/// reproducibility contract.
pub fn plan_refresh(
    params: &EtlParams,
    stats: &WarehouseStats,
    schema: &WarehouseSchema,
    rng: &mut SeededRng,
) -> RefreshPlan {
    let g = stats.global_size as f64;
    let tot_nb_dim = schema.dimensions.len() as f64;
    let nb_ft = schema.fact_tables.len() as f64;

    let mut dim_quotas: Vec<Vec<QuotaPair>> = Vec::with_capacity(schema.dimensions.len());
    for dim in &schema.dimensions {
        let per_level = g * params.grr * params.drr / tot_nb_dim / dim.depth() as f64;
        let insert_quota = per_level * params.ir;
        let modify_quota = per_level * params.mr();
        let mut levels = vec![
            QuotaPair {
                insert_quota,
                modify_quota,
                inserts: 0,
                modifies: 0,
            };
            dim.depth()
        ];
        for level_no in (1..=dim.depth()).rev() {
            let pair = &mut levels[level_no - 1];
            pair.inserts = realize(insert_quota, rng);
            pair.modifies = realize(modify_quota, rng);
        }
        dim_quotas.push(levels);
    }

    let fact_quotas = schema
        .fact_tables
        .iter()
        .map(|_| {
            let per_fact = g * params.grr * params.frr() / nb_ft;
            let insert_quota = per_fact * params.ir;
            let modify_quota = per_fact * params.mr();
            QuotaPair {
                inserts: realize(insert_quota, rng),
                modifies: realize(modify_quota, rng),
                insert_quota,
                modify_quota,
            }
        })
        .collect();

    RefreshPlan {
        dim_quotas,
        fact_quotas,
    }
}

/// Operation counts and wall time of one executed refresh stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefreshOutcome {
    pub inserts: u64,
    pub modifies: u64,
    pub duration: Duration,
}

/// Refresh execution failures.
#[derive(Debug, Error)]
pub enum EtlError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cannot modify {table}: the table is empty")]
    EmptyTable { table: String },
    #[error("no row of {table} has key {key}, even after a fresh draw")]
    StaleKey { table: String, key: u64 },
    #[error(
        "{table} is saturated: {attempts} random key combinations all \
         exist already (density is at or near 1)"
    )]
    FactSaturated { table: String, attempts: u32 },
}

/// Cached table sizes for one refresh phase.
///
/// Row counts double as maximum keys because every key column is a dense
/// `1..=n` sequence: the loader generates them that way and refresh inserts
/// extend them by one. Counts are queried once per phase and maintained in
/// memory afterwards, so an insert burst costs one statement per row rather
/// than a count query plus a statement.
#[derive(Debug, Clone)]
pub struct RefreshSession {
    sizes: BTreeMap<String, u64>,
}

impl RefreshSession {
    /// Snapshots current table sizes from the backend.
    pub fn new(backend: &mut dyn Backend, schema: &WarehouseSchema) -> Result<Self, BackendError> {
        Ok(Self::from_stats(&backend.warehouse_stats(schema)?))
    }

    /// Builds a session from already-known stats.
    pub fn from_stats(stats: &WarehouseStats) -> Self {
        RefreshSession {
            sizes: stats.table_counts.iter().cloned().collect(),
        }
    }

    /// Current size of `table`; zero when the table is unknown.
    pub fn size(&self, table: &str) -> u64 {
        self.sizes.get(table).copied().unwrap_or(0)
    }

    /// Inserts one row into a hierarchy level: the next sequential key,
    /// fresh member strings, and (below the coarsest level) a link drawn
    /// over the coarser level's current extension. Returns the new key.
    pub fn insert_into_dim(
        &mut self,
        level: &HierarchyLevelDef,
        referential: &StringReferential,
        backend: &mut dyn Backend,
        rng: &mut SeededRng,
    ) -> Result<u64, EtlError> {
        let dialect = backend.dialect().clone();
        let new_key = self.size(&level.table_name) + 1;

        let mut columns = vec![dialect.quote(&level.primary_key)];
        let mut values = vec![Value::Int(new_key as i64).to_sql_literal()];
        for member in &level.members {
            columns.push(dialect.quote(member));
            values.push(Value::Text(referential.random_string(rng, member)).to_sql_literal());
        }
        if let Some(fk) = &level.foreign_key {
            let coarser = naming::level_table(level.dim + 1, level.level + 1);
            let coarser_size = self.size(&coarser);
            columns.push(dialect.quote(fk));
            values.push(Value::Int(rng.random_key(coarser_size) as i64).to_sql_literal());
        }

        let sql = format!(
            "INSERT INTO {} ({}) VALUES ({})",
            dialect.quote(&level.table_name),
            columns.join(", "),
            values.join(", ")
        );
        backend.execute_update(&sql)?;
        *self.sizes.entry(level.table_name.clone()).or_insert(0) += 1;
        Ok(new_key)
    }

    /// Rewrites the member strings of one existing row, picked by a skewed
    /// key draw. The key and link columns are never touched. A draw that
    /// matches no row (the cached size was wrong) is retried once with a
    /// fresh key before failing. Returns the modified key.
    pub fn modify_dim(
        &mut self,
        level: &HierarchyLevelDef,
        referential: &StringReferential,
        backend: &mut dyn Backend,
        rng: &mut SeededRng,
    ) -> Result<u64, EtlError> {
        let size = self.size(&level.table_name);
        if size == 0 {
            return Err(EtlError::EmptyTable {
                table: level.table_name.clone(),
            });
        }
        let dialect = backend.dialect().clone();
        let mut key = 0;
        for _attempt in 0..2 {
            key = rng.random_key(size);
            let assignments: Vec<String> = level
                .members
                .iter()
                .map(|member| {
                    format!(
                        "{} = {}",
                        dialect.quote(member),
                        Value::Text(referential.random_string(rng, member)).to_sql_literal()
                    )
                })
                .collect();
            let sql = format!(
                "UPDATE {} SET {} WHERE {} = {}",
                dialect.quote(&level.table_name),
                assignments.join(", "),
                dialect.quote(&level.primary_key),
                key
            );
            if backend.execute_update(&sql)? > 0 {
                return Ok(key);
            }
        }
        Err(EtlError::StaleKey {
            table: level.table_name.clone(),
            key,
        })
    }

    /// Inserts one fact row under a fresh key combination: one skewed draw
    /// per referenced dimension's finest level, retried up to 100 times
    /// when the combination already exists, plus uniform measures in
    /// [0, 100). Returns the new combination.
    pub fn insert_into_ft(
        &mut self,
        fact: &FactTableDef,
        backend: &mut dyn Backend,
        rng: &mut SeededRng,
    ) -> Result<Vec<u64>, EtlError> {
        const MAX_ATTEMPTS: u32 = 100;
        let dialect = backend.dialect().clone();
        let finest_sizes: Vec<u64> = fact
            .dim_refs
            .iter()
            .map(|&d| self.size(&naming::level_table(d + 1, 1)))
            .collect();

        for _ in 0..MAX_ATTEMPTS {
            let keys: Vec<u64> = finest_sizes.iter().map(|&s| rng.random_key(s)).collect();
            let probe = format!(
                "SELECT COUNT(*) FROM {} WHERE {}",
                dialect.quote(&fact.table_name),
                key_predicate(&dialect, &fact.key_attrs, &keys)
            );
            let rows = backend.query_rows(&probe)?;
            let occupied =
                matches!(rows.first().and_then(|r| r.first()), Some(Value::Int(n)) if *n > 0);
            if occupied {
                continue;
            }

            let mut columns: Vec<String> =
                fact.key_attrs.iter().map(|a| dialect.quote(a)).collect();
            let mut values: Vec<String> = keys
                .iter()
                .map(|&k| Value::Int(k as i64).to_sql_literal())
                .collect();
            for measure in &fact.measures {
                columns.push(dialect.quote(measure));
                // Same single-precision widening as the bulk generator.
                values.push(
                    Value::Real(rng.uniform_float(0.0, 100.0) as f32 as f64).to_sql_literal(),
                );
            }
            let sql = format!(
                "INSERT INTO {} ({}) VALUES ({})",
                dialect.quote(&fact.table_name),
                columns.join(", "),
                values.join(", ")
            );
            backend.execute_update(&sql)?;
            *self.sizes.entry(fact.table_name.clone()).or_insert(0) += 1;
            return Ok(keys);
        }
        Err(EtlError::FactSaturated {
            table: fact.table_name.clone(),
            attempts: MAX_ATTEMPTS,
        })
    }

    /// Rewrites every measure of one existing fact row with fresh uniform
    /// values; keys are never touched. The victim is the row at a skewed
    /// rank in key order. Returns false without issuing SQL when the table
    /// is empty (a legal state for sparse fact tables).
    pub fn modify_ft(
        &mut self,
        fact: &FactTableDef,
        backend: &mut dyn Backend,
        rng: &mut SeededRng,
    ) -> Result<bool, EtlError> {
        let size = self.size(&fact.table_name);
        if size == 0 {
            return Ok(false);
        }
        let dialect = backend.dialect().clone();
        let key_list: Vec<String> = fact.key_attrs.iter().map(|a| dialect.quote(a)).collect();

        for _attempt in 0..2 {
            let rank = rng.random_key(size);
            let pick = format!(
                "SELECT {} FROM {} ORDER BY {} LIMIT 1 OFFSET {}",
                key_list.join(", "),
                dialect.quote(&fact.table_name),
                key_list.join(", "),
                rank - 1
            );
            let rows = backend.query_rows(&pick)?;
            let Some(victim) = rows.first() else {
                // The cached size overstated the table; one fresh draw.
                continue;
            };
            let keys: Vec<u64> = victim
                .iter()
                .map(|v| match v {
                    Value::Int(k) => *k as u64,
                    other => unreachable!("fact key columns are integers, got {other:?}"),
                })
                .collect();
            let assignments: Vec<String> = fact
                .measures
                .iter()
                .map(|measure| {
                    format!(
                        "{} = {}",
                        dialect.quote(measure),
                        Value::Real(rng.uniform_float(0.0, 100.0) as f32 as f64).to_sql_literal()
                    )
                })
                .collect();
            let sql = format!(
                "UPDATE {} SET {} WHERE {}",
                dialect.quote(&fact.table_name),
                assignments.join(", "),
                key_predicate(&dialect, &fact.key_attrs, &keys)
            );
            backend.execute_update(&sql)?;
            return Ok(true);
        }
        Err(EtlError::StaleKey {
            table: fact.table_name.clone(),
            key: size,
        })
    }
}

fn key_predicate(
    dialect: &crate::dialect::DialectDescriptor,
    attrs: &[String],
    keys: &[u64],
) -> String {
    attrs
        .iter()
        .zip(keys)
        .map(|(a, k)| format!("{} = {}", dialect.quote(a), k))
        .collect::<Vec<_>>()
        .join(" AND ")
}

/// Executes the dimension half of a plan: dimensions in order, levels
/// coarsest first (so links always have a target), inserts before
/// modifications. Table sizes are snapshotted from the backend once at
/// entry.
pub fn refresh_dimensions(
    plan: &RefreshPlan,
    schema: &WarehouseSchema,
    referential: &StringReferential,
    backend: &mut dyn Backend,
    rng: &mut SeededRng,
) -> Result<RefreshOutcome, EtlError> {
    let start = Instant::now();
    let mut session = RefreshSession::new(backend, schema)?;
    let mut inserts = 0;
    let mut modifies = 0;
    for dim in &schema.dimensions {
        for level_no in (1..=dim.depth()).rev() {
            let level = dim.level(level_no);
            let quota = &plan.dim_quotas[dim.index][level_no - 1];
            for _ in 0..quota.inserts {
                session.insert_into_dim(level, referential, backend, rng)?;
                inserts += 1;
            }
            for _ in 0..quota.modifies {
                session.modify_dim(level, referential, backend, rng)?;
                modifies += 1;
            }
        }
    }
    Ok(RefreshOutcome {
        inserts,
        modifies,
        duration: start.elapsed(),
    })
}

/// Executes the fact half of a plan: tables in order, inserts before
/// modifications. Sizes are snapshotted at entry, so new dimension members
/// inserted earlier in the same phase are eligible fact keys.
pub fn refresh_facts(
    plan: &RefreshPlan,
    schema: &WarehouseSchema,
    backend: &mut dyn Backend,
    rng: &mut SeededRng,
) -> Result<RefreshOutcome, EtlError> {
    let start = Instant::now();
    let mut session = RefreshSession::new(backend, schema)?;
    let mut inserts = 0;
    let mut modifies = 0;
    for fact in &schema.fact_tables {
        let quota = &plan.fact_quotas[fact.index];
        for _ in 0..quota.inserts {
            session.insert_into_ft(fact, backend, rng)?;
            inserts += 1;
        }
        for _ in 0..quota.modifies {
            if session.modify_ft(fact, backend, rng)? {
                modifies += 1;
            }
        }
    }
    Ok(RefreshOutcome {
        inserts,
        modifies,
        duration: start.elapsed(),
    })
}

/// Scans every link in the warehouse and reports dangling references:
/// hierarchy links to the next coarser level and fact keys to each
/// dimension's finest level. An empty result means referential integrity
/// holds warehouse-wide.
pub fn scan_referential_integrity(
    backend: &mut dyn Backend,
    schema: &WarehouseSchema,
) -> Result<Vec<String>, BackendError> {
    let dialect = backend.dialect().clone();
    let mut violations = Vec::new();
    let mut check = |backend: &mut dyn Backend,
                     table: &str,
                     fk: &str,
                     target: &str,
                     target_pk: &str|
     -> Result<(), BackendError> {
        let sql = format!(
            "SELECT COUNT(*) FROM {} WHERE {} NOT IN (SELECT {} FROM {})",
            dialect.quote(table),
            dialect.quote(fk),
            dialect.quote(target_pk),
            dialect.quote(target)
        );
        if let Some(Value::Int(n)) = backend.query_rows(&sql)?.first().and_then(|r| r.first()) {
            if *n > 0 {
                violations.push(format!(
                    "{n} rows of {table} reference missing {target} keys via {fk}"
                ));
            }
        }
        Ok(())
    };

    for dim in &schema.dimensions {
        for level in &dim.levels {
            if let Some(fk) = &level.foreign_key {
                let coarser = dim.level(level.level + 1);
                check(
                    backend,
                    &level.table_name,
                    fk,
                    &coarser.table_name,
                    &coarser.primary_key,
                )?;
            }
        }
    }
    for fact in &schema.fact_tables {
        for (i, &d) in fact.dim_refs.iter().enumerate() {
            let finest = schema.dimensions[d].finest();
            check(
                backend,
                &fact.table_name,
                &fact.key_attrs[i],
                &finest.table_name,
                &finest.primary_key,
            )?;
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{connect, BackendConfig};
    use crate::datagen::{load_warehouse, GenOptions};
    use crate::ddl::{emit_ddl, ConstraintMode};
    use crate::params::{derive_low_level, HighLevelParams, LowLevelParams};
    use crate::rng::{PURPOSE_DATA, PURPOSE_ETL, PURPOSE_PARAMS, PURPOSE_SCHEMA};
    use crate::schema::build_schema;

    fn etl_rng(seed: u64) -> SeededRng {
        SeededRng::new(seed, PURPOSE_ETL, 0.0)
    }

    fn default_schema() -> WarehouseSchema {
        let high = HighLevelParams {
            sigma_ratio: 0.0,
            ..HighLevelParams::default()
        };
        let low = derive_low_level(&high, &mut SeededRng::new(1, PURPOSE_PARAMS, 0.0)).unwrap();
        build_schema(&low, &mut SeededRng::new(42, PURPOSE_SCHEMA, 0.0)).unwrap()
    }

    fn synthetic_stats(schema: &WarehouseSchema, global_size: u64) -> WarehouseStats {
        WarehouseStats {
            table_counts: schema
                .all_table_names()
                .into_iter()
                .map(|t| (t, 0))
                .collect(),
            global_size,
        }
    }

    /// Two dimensions of two levels (8 over 2 rows), one fact table over
    /// both at density 0.5: 64 candidates, a desk-scale live warehouse.
    fn small_low() -> LowLevelParams {
        LowLevelParams {
            nb_ft: 1,
            tot_nb_dim: 2,
            nb_dim: vec![2],
            nb_meas: vec![2],
            density: vec![0.5],
            nb_levels: vec![2, 2],
            nb_att: vec![vec![2, 1], vec![1, 1]],
            hhlevel_size: vec![2, 2],
            dim_sfactor: vec![4.0, 4.0],
        }
    }

    fn live_warehouse(low: &LowLevelParams, seed: u64) -> (WarehouseSchema, Box<dyn Backend>) {
        let schema = build_schema(low, &mut SeededRng::new(seed, PURPOSE_SCHEMA, 0.0)).unwrap();
        let config = BackendConfig::parse(":memory:", None).unwrap();
        let mut backend = connect(&config).unwrap();
        let ddl = emit_ddl(&schema, backend.dialect(), ConstraintMode::Declared).unwrap();
        backend.execute_ddl(&ddl).unwrap();
        load_warehouse(
            &schema,
            &mut SeededRng::new(seed, PURPOSE_DATA, 0.0),
            &StringReferential::new(seed),
            &GenOptions::default(),
            &mut *backend,
        )
        .unwrap();
        (schema, backend)
    }

    fn table_counts(backend: &mut dyn Backend, schema: &WarehouseSchema) -> Vec<(String, u64)> {
        backend.warehouse_stats(schema).unwrap().table_counts
    }

    #[test]
    fn default_quotas_match_the_hand_formula() {
        let schema = default_schema();
        let stats = synthetic_stats(&schema, 10_000);
        let plan = plan_refresh(&EtlParams::default(), &stats, &schema, &mut etl_rng(1));

        // 10000 * 0.01 * 0.05 split over 5 dimensions and 3 levels, then
        // split 95/5 between inserts and modifications.
        let insert = 10_000.0 * 0.01 * 0.05 * 0.95 / 5.0 / 3.0;
        let modify = 10_000.0 * 0.01 * 0.05 * 0.05 / 5.0 / 3.0;
        for levels in &plan.dim_quotas {
            assert_eq!(levels.len(), 3);
            for pair in levels {
                assert!((pair.insert_quota - insert).abs() < 1e-12);
                assert!((pair.modify_quota - modify).abs() < 1e-12);
            }
        }
        assert_eq!(plan.fact_quotas.len(), 1);
        let fact = &plan.fact_quotas[0];
        assert!((fact.insert_quota - 90.25).abs() < 1e-12);
        assert!((fact.modify_quota - 4.75).abs() < 1e-12);
    }

    #[test]
    fn realized_counts_stay_within_one_of_their_quota() {
        let schema = default_schema();
        let stats = synthetic_stats(&schema, 10_000);
        for seed in 0..200 {
            let plan = plan_refresh(&EtlParams::default(), &stats, &schema, &mut etl_rng(seed));
            for pair in plan.dim_quotas.iter().flatten().chain(&plan.fact_quotas) {
                let i = pair.inserts as f64;
                let m = pair.modifies as f64;
                assert!(i == pair.insert_quota.floor() || i == pair.insert_quota.floor() + 1.0);
                assert!(m == pair.modify_quota.floor() || m == pair.modify_quota.floor() + 1.0);
            }
        }
    }

    #[test]
    fn planning_is_reproducible() {
        let schema = default_schema();
        let stats = synthetic_stats(&schema, 10_000);
        let a = plan_refresh(&EtlParams::default(), &stats, &schema, &mut etl_rng(7));
        let b = plan_refresh(&EtlParams::default(), &stats, &schema, &mut etl_rng(7));
        assert_eq!(a, b);
    }

    #[test]
    fn realized_totals_meet_their_expectation() {
        // Expected totals at the defaults over a 10000-row warehouse:
        // dimensions 10000 * 0.01 * 0.05 = 5, facts 10000 * 0.01 * 0.95
        // = 95. Realized totals are sums of independent floor-plus-Bernoulli
        // terms, so the mean over 400 plans sits well within 0.3 and 1.
        let schema = default_schema();
        let stats = synthetic_stats(&schema, 10_000);
        let seeds = 400;
        let mut dim_total = 0u64;
        let mut fact_total = 0u64;
        for seed in 0..seeds {
            let plan = plan_refresh(&EtlParams::default(), &stats, &schema, &mut etl_rng(seed));
            dim_total += plan.dimension_ops();
            fact_total += plan.fact_ops();
        }
        let dim_mean = dim_total as f64 / seeds as f64;
        let fact_mean = fact_total as f64 / seeds as f64;
        assert!((dim_mean - 5.0).abs() < 0.3, "dimension mean {dim_mean}");
        assert!((fact_mean - 95.0).abs() < 1.0, "fact mean {fact_mean}");
    }

    #[test]
    fn zero_refresh_rate_plans_nothing() {
        let schema = default_schema();
        let stats = synthetic_stats(&schema, 10_000);
        let params = EtlParams {
            grr: 0.0,
            ..EtlParams::default()
        };
        let plan = plan_refresh(&params, &stats, &schema, &mut etl_rng(3));
        assert!(plan.is_empty());
        assert_eq!(plan.total_ops(), 0);
        for pair in plan.dim_quotas.iter().flatten().chain(&plan.fact_quotas) {
            assert_eq!(pair.insert_quota, 0.0);
            assert_eq!(pair.modify_quota, 0.0);
        }
    }

    #[test]
    fn rate_validation_rejects_out_of_range_values() {
        EtlParams::default().validate().unwrap();
        let bad = EtlParams {
            grr: 1.5,
            ..EtlParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = EtlParams {
            ir: -0.1,
            ..EtlParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dimension_refresh_executes_exactly_the_plan() {
        let (schema, mut backend) = live_warehouse(&small_low(), 5);
        let before = table_counts(&mut *backend, &schema);
        let stats = backend.warehouse_stats(&schema).unwrap();

        // Rates high enough that every level sees both operation kinds.
        let params = EtlParams {
            grr: 0.8,
            drr: 0.9,
            ir: 0.6,
        };
        let mut rng = etl_rng(11);
        let plan = plan_refresh(&params, &stats, &schema, &mut rng);
        assert!(plan.dimension_ops() > 0);

        let referential = StringReferential::new(5);
        let outcome =
            refresh_dimensions(&plan, &schema, &referential, &mut *backend, &mut rng).unwrap();
        let planned_inserts: u64 = plan.dim_quotas.iter().flatten().map(|p| p.inserts).sum();
        let planned_modifies: u64 = plan.dim_quotas.iter().flatten().map(|p| p.modifies).sum();
        assert_eq!(outcome.inserts, planned_inserts);
        assert_eq!(outcome.modifies, planned_modifies);

        // Each level grew by exactly its planned inserts, keys stayed dense,
        // and every link still resolves.
        let after = table_counts(&mut *backend, &schema);
        for dim in &schema.dimensions {
            for level in &dim.levels {
                let old = before
                    .iter()
                    .find(|(t, _)| t == &level.table_name)
                    .unwrap()
                    .1;
                let new = after
                    .iter()
                    .find(|(t, _)| t == &level.table_name)
                    .unwrap()
                    .1;
                let planned = plan.dim_quotas[dim.index][level.level - 1].inserts;
                assert_eq!(new, old + planned, "{} growth", level.table_name);

                let max_key = backend
                    .query_rows(&format!(
                        "SELECT MAX({}) FROM {}",
                        level.primary_key, level.table_name
                    ))
                    .unwrap()[0][0]
                    .clone();
                assert_eq!(max_key, Value::Int(new as i64), "{} keys", level.table_name);
            }
        }
        assert_eq!(
            scan_referential_integrity(&mut *backend, &schema).unwrap(),
            Vec::<String>::new()
        );
    }

    #[test]
    fn fact_refresh_grows_without_duplicating_keys() {
        let (schema, mut backend) = live_warehouse(&small_low(), 9);
        let stats = backend.warehouse_stats(&schema).unwrap();
        let before_fact = stats.count("FT1").unwrap();

        let params = EtlParams {
            grr: 0.4,
            drr: 0.2,
            ir: 0.5,
        };
        let mut rng = etl_rng(13);
        let plan = plan_refresh(&params, &stats, &schema, &mut rng);
        assert!(plan.fact_quotas[0].inserts > 0);
        assert!(plan.fact_quotas[0].modifies > 0);

        let outcome = refresh_facts(&plan, &schema, &mut *backend, &mut rng).unwrap();
        assert_eq!(outcome.inserts, plan.fact_quotas[0].inserts);
        assert_eq!(outcome.modifies, plan.fact_quotas[0].modifies);

        let after = backend.warehouse_stats(&schema).unwrap();
        assert_eq!(after.count("FT1").unwrap(), before_fact + outcome.inserts);

        let distinct = backend
            .query_rows("SELECT COUNT(*) FROM (SELECT DISTINCT DIM1_1_FK, DIM2_1_FK FROM FT1)")
            .unwrap()[0][0]
            .clone();
        assert_eq!(distinct, Value::Int((before_fact + outcome.inserts) as i64));

        let bounds = backend
            .query_rows("SELECT MIN(FT1_MEAS1), MAX(FT1_MEAS1) FROM FT1")
            .unwrap();
        let (Value::Real(lo), Value::Real(hi)) = (&bounds[0][0], &bounds[0][1]) else {
            panic!("measures must be real")
        };
        assert!(*lo >= 0.0 && *hi < 100.0);
        assert_eq!(
            scan_referential_integrity(&mut *backend, &schema).unwrap(),
            Vec::<String>::new()
        );
    }

    #[test]
    fn empty_plan_refresh_is_a_noop() {
        let (schema, mut backend) = live_warehouse(&small_low(), 2);
        let before = table_counts(&mut *backend, &schema);
        let stats = backend.warehouse_stats(&schema).unwrap();
        let params = EtlParams {
            grr: 0.0,
            ..EtlParams::default()
        };
        let mut rng = etl_rng(1);
        let plan = plan_refresh(&params, &stats, &schema, &mut rng);
        let referential = StringReferential::new(2);
        let dims =
            refresh_dimensions(&plan, &schema, &referential, &mut *backend, &mut rng).unwrap();
        let facts = refresh_facts(&plan, &schema, &mut *backend, &mut rng).unwrap();
        assert_eq!((dims.inserts, dims.modifies), (0, 0));
        assert_eq!((facts.inserts, facts.modifies), (0, 0));
        assert_eq!(table_counts(&mut *backend, &schema), before);
    }

    #[test]
    fn insert_only_plans_issue_no_updates() {
        let (schema, mut backend) = live_warehouse(&small_low(), 3);
        let stats = backend.warehouse_stats(&schema).unwrap();
        let params = EtlParams {
            grr: 0.5,
            drr: 0.5,
            ir: 1.0,
        };
        let mut rng = etl_rng(4);
        let plan = plan_refresh(&params, &stats, &schema, &mut rng);
        for pair in plan.dim_quotas.iter().flatten().chain(&plan.fact_quotas) {
            assert_eq!(pair.modifies, 0);
        }
        let referential = StringReferential::new(3);
        let dims =
            refresh_dimensions(&plan, &schema, &referential, &mut *backend, &mut rng).unwrap();
        let facts = refresh_facts(&plan, &schema, &mut *backend, &mut rng).unwrap();
        assert_eq!(dims.modifies, 0);
        assert_eq!(facts.modifies, 0);
        assert!(dims.inserts + facts.inserts > 0);
    }

    #[test]
    fn dimension_inserts_are_sequential_and_linked() {
        let (schema, mut backend) = live_warehouse(&small_low(), 7);
        let mut session = RefreshSession::new(&mut *backend, &schema).unwrap();
        let referential = StringReferential::new(7);
        let mut rng = etl_rng(7);
        let finest = schema.dimensions[0].finest();

        let k1 = session
            .insert_into_dim(finest, &referential, &mut *backend, &mut rng)
            .unwrap();
        let k2 = session
            .insert_into_dim(finest, &referential, &mut *backend, &mut rng)
            .unwrap();
        assert_eq!((k1, k2), (9, 10), "finest level had 8 rows");

        let rows = backend
            .query_rows(&format!(
                "SELECT DIM1_2_FK FROM DIM1_1 WHERE DIM1_1_PK IN ({k1}, {k2})"
            ))
            .unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            let Value::Int(fk) = &row[0] else {
                panic!("link must be an integer")
            };
            assert!((1..=2i64).contains(fk), "link {fk} must hit DIM1_2");
        }
    }

    #[test]
    fn dimension_modify_rewrites_members_only() {
        let (schema, mut backend) = live_warehouse(&small_low(), 8);
        let mut session = RefreshSession::new(&mut *backend, &schema).unwrap();
        let referential = StringReferential::new(8);
        let mut rng = etl_rng(8);
        let finest = schema.dimensions[0].finest();

        let snapshot = |backend: &mut dyn Backend| {
            backend
                .query_rows("SELECT DIM1_1_PK, DIM1_1_DESCR1, DIM1_1_DESCR2, DIM1_2_FK FROM DIM1_1 ORDER BY DIM1_1_PK")
                .unwrap()
        };
        let before = snapshot(&mut *backend);
        let victim = session
            .modify_dim(finest, &referential, &mut *backend, &mut rng)
            .unwrap();
        let after = snapshot(&mut *backend);

        assert_eq!(before.len(), after.len());
        for (b, a) in before.iter().zip(&after) {
            assert_eq!(b[0], a[0], "keys are immutable");
            assert_eq!(b[3], a[3], "links are immutable");
            if b[0] != Value::Int(victim as i64) {
                assert_eq!(b, a, "only the victim row may change");
            } else {
                // Fresh draws under this seed differ from the loaded values.
                assert_ne!(&b[1..3], &a[1..3], "victim members must be rewritten");
            }
        }
    }

    #[test]
    fn stale_size_information_is_reported_after_one_retry() {
        // A created but never loaded warehouse: the table exists and is
        // empty, while the session is fed stats claiming five rows.
        let low = small_low();
        let schema = build_schema(&low, &mut SeededRng::new(1, PURPOSE_SCHEMA, 0.0)).unwrap();
        let config = BackendConfig::parse(":memory:", None).unwrap();
        let mut backend = connect(&config).unwrap();
        let ddl = emit_ddl(&schema, backend.dialect(), ConstraintMode::Omitted).unwrap();
        backend.execute_ddl(&ddl).unwrap();

        let lying_stats = WarehouseStats {
            table_counts: vec![("DIM1_1".to_string(), 5)],
            global_size: 5,
        };
        let mut session = RefreshSession::from_stats(&lying_stats);
        let referential = StringReferential::new(1);
        let finest = schema.dimensions[0].finest();
        match session.modify_dim(finest, &referential, &mut *backend, &mut etl_rng(1)) {
            Err(EtlError::StaleKey { table, key }) => {
                assert_eq!(table, "DIM1_1");
                assert!((1..=5).contains(&key));
            }
            other => panic!("expected a stale key error, got {other:?}"),
        }
    }

    #[test]
    fn saturated_fact_tables_refuse_inserts() {
        // Two flat dimensions of two rows each and density 1: all four key
        // combinations exist, so no fresh combination can be drawn.
        let low = LowLevelParams {
            nb_ft: 1,
            tot_nb_dim: 2,
            nb_dim: vec![2],
            nb_meas: vec![1],
            density: vec![1.0],
            nb_levels: vec![1, 1],
            nb_att: vec![vec![1], vec![1]],
            hhlevel_size: vec![2, 2],
            dim_sfactor: vec![1.0, 1.0],
        };
        let (schema, mut backend) = live_warehouse(&low, 6);
        let stats = backend.warehouse_stats(&schema).unwrap();
        assert_eq!(
            stats.count("FT1").unwrap(),
            4,
            "density 1 fills the product"
        );

        let mut session = RefreshSession::new(&mut *backend, &schema).unwrap();
        match session.insert_into_ft(&schema.fact_tables[0], &mut *backend, &mut etl_rng(2)) {
            Err(EtlError::FactSaturated { table, attempts }) => {
                assert_eq!(table, "FT1");
                assert_eq!(attempts, 100);
            }
            other => panic!("expected saturation, got {other:?}"),
        }
    }

    #[test]
    fn modifying_an_empty_fact_table_is_skipped() {
        let low = small_low();
        let schema = build_schema(&low, &mut SeededRng::new(1, PURPOSE_SCHEMA, 0.0)).unwrap();
        let config = BackendConfig::parse(":memory:", None).unwrap();
        let mut backend = connect(&config).unwrap();
        let ddl = emit_ddl(&schema, backend.dialect(), ConstraintMode::Omitted).unwrap();
        backend.execute_ddl(&ddl).unwrap();

        let mut session = RefreshSession::new(&mut *backend, &schema).unwrap();
        let touched = session
            .modify_ft(&schema.fact_tables[0], &mut *backend, &mut etl_rng(3))
            .unwrap();
        assert!(!touched);
    }

    #[test]
    fn integrity_survives_repeated_mixed_refreshes() {
        let (schema, mut backend) = live_warehouse(&small_low(), 14);
        let referential = StringReferential::new(14);
        let params = EtlParams {
            grr: 0.3,
            drr: 0.5,
            ir: 0.7,
        };
        let mut rng = etl_rng(14);
        let mut previous = table_counts(&mut *backend, &schema);
        for round in 0..3 {
            let stats = backend.warehouse_stats(&schema).unwrap();
            let plan = plan_refresh(&params, &stats, &schema, &mut rng);
            refresh_dimensions(&plan, &schema, &referential, &mut *backend, &mut rng).unwrap();
            refresh_facts(&plan, &schema, &mut *backend, &mut rng).unwrap();

            let current = table_counts(&mut *backend, &schema);
            for ((table, old), (_, new)) in previous.iter().zip(&current) {
                assert!(
                    new >= old,
                    "round {round}: {table} shrank from {old} to {new}"
                );
            }
            assert_eq!(
                scan_referential_integrity(&mut *backend, &schema).unwrap(),
                Vec::<String>::new(),
                "round {round} broke a reference"
            );
            previous = current;
        }
    }
}
