//! Tuple generation for dimension levels and fact tables.
//!
//! Dimension levels are generated coarsest first so link values can point
//! at rows that already exist; keys are dense sequences `1..=cardinality`.
//! Fact tables walk the cross product of their dimensions' finest keys and
//! keep each candidate with probability `density`, so fact row counts are
//! binomial around `density * |cross product|` and never require
//! materializing the full product.
//!
//! Generation is decoupled from storage through [`BatchSink`]: the same
//! tuple stream loads a database ([`load_warehouse`]), fills memory for
//! tests ([`MemorySink`]), or serializes to CSV files ([`CsvSink`]).

use crate::backend::{Backend, BackendError};
use crate::rng::{SeededRng, StringReferential};
use crate::schema::{DimensionDef, FactTableDef, WarehouseSchema, WarehouseStats};
use crate::value::Value;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Rows per [`TupleBatch`] unless overridden.
pub const DEFAULT_BATCH_SIZE: usize = 1000;

/// Ceiling on fact-table candidate count (the cross product size) unless
/// overridden. Walking more candidates than this is almost certainly a
/// misconfiguration rather than an intended benchmark database.
pub const DEFAULT_FACT_CANDIDATE_CAP: u128 = 10_000_000;

/// Knobs for tuple generation.
#[derive(Debug, Clone)]
pub struct GenOptions {
    pub batch_size: usize,
    pub fact_candidate_cap: u128,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            batch_size: DEFAULT_BATCH_SIZE,
            fact_candidate_cap: DEFAULT_FACT_CANDIDATE_CAP,
        }
    }
}

/// A slice of generated rows for one table, column order matching the
/// table's DDL. `ordinal` counts batches per table from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleBatch {
    pub table_name: String,
    pub ordinal: u64,
    pub rows: Vec<Vec<Value>>,
}

/// Error surfaced by a sink; generation stops at the first one.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct SinkError {
    pub message: String,
}

impl SinkError {
    pub fn new(message: impl Into<String>) -> Self {
        SinkError {
            message: message.into(),
        }
    }
}

/// Destination for generated tuples.
pub trait BatchSink {
    fn submit(&mut self, batch: &TupleBatch) -> Result<(), SinkError>;
}

/// Tuple generation failures.
#[derive(Debug, Error)]
pub enum DataGenError {
    #[error("sink rejected a batch of {table}: {source}")]
    Sink { table: String, source: SinkError },
    #[error(
        "{table} spans {candidates} candidate rows, above the cap of {cap}; \
         shrink the dimensions or raise the candidate cap"
    )]
    TooManyCandidates {
        table: String,
        candidates: u128,
        cap: u128,
    },
}

/// Generates one hierarchy level table (`level_no` is 1-based).
///
/// Rows are `[key, members.., link]`: the key counts up from 1, each member
/// is drawn from the string referential, and the link (absent at the
/// coarsest level) is a skewed draw over the coarser level's keys. Returns
/// the row count, which always equals the level's target cardinality.
pub fn generate_level(
    dim: &DimensionDef,
    level_no: usize,
    rng: &mut SeededRng,
    referential: &StringReferential,
    sink: &mut dyn BatchSink,
    opts: &GenOptions,
) -> Result<u64, DataGenError> {
    let level = dim.level(level_no);
    let coarser_size = (level_no < dim.depth()).then(|| dim.level(level_no + 1).target_cardinality);
    let mut batch = TupleBatch {
        table_name: level.table_name.clone(),
        ordinal: 0,
        rows: Vec::with_capacity(opts.batch_size),
    };
    for key in 1..=level.target_cardinality {
        let mut row = Vec::with_capacity(1 + level.members.len() + coarser_size.is_some() as usize);
        row.push(Value::Int(key as i64));
        for member in &level.members {
            row.push(Value::Text(referential.random_string(rng, member)));
        }
        if let Some(size) = coarser_size {
            row.push(Value::Int(rng.random_key(size) as i64));
        }
        batch.rows.push(row);
        if batch.rows.len() == opts.batch_size {
            flush(sink, &mut batch)?;
        }
    }
    if !batch.rows.is_empty() {
        flush(sink, &mut batch)?;
    }
    Ok(level.target_cardinality)
}

/// Generates a whole dimension, coarsest level first.
///
/// Returns `(table, rows)` pairs in canonical (finest-first) order.
pub fn generate_dimension(
    dim: &DimensionDef,
    rng: &mut SeededRng,
    referential: &StringReferential,
    sink: &mut dyn BatchSink,
    opts: &GenOptions,
) -> Result<Vec<(String, u64)>, DataGenError> {
    let mut counts = vec![0u64; dim.depth()];
    for level_no in (1..=dim.depth()).rev() {
        counts[level_no - 1] = generate_level(dim, level_no, rng, referential, sink, opts)?;
    }
    Ok(dim
        .levels
        .iter()
        .map(|l| l.table_name.clone())
        .zip(counts)
        .collect())
}

/// Generates one fact table by Bernoulli sampling its candidate space.
///
/// Candidates are every combination of finest-level keys of the referenced
/// dimensions, walked in odometer order (last dimension fastest). Each
/// candidate survives with probability `density`; survivors get one
/// single-precision measure per measure column, uniform in [0, 100).
/// Returns the number of rows kept.
pub fn generate_fact(
    fact: &FactTableDef,
    schema: &WarehouseSchema,
    rng: &mut SeededRng,
    sink: &mut dyn BatchSink,
    opts: &GenOptions,
) -> Result<u64, DataGenError> {
    let sizes: Vec<u64> = fact
        .dim_refs
        .iter()
        .map(|&d| schema.dimensions[d].finest().target_cardinality)
        .collect();
    let candidates: u128 = sizes.iter().map(|&s| s as u128).product();
    if candidates > opts.fact_candidate_cap {
        return Err(DataGenError::TooManyCandidates {
            table: fact.table_name.clone(),
            candidates,
            cap: opts.fact_candidate_cap,
        });
    }

    let mut batch = TupleBatch {
        table_name: fact.table_name.clone(),
        ordinal: 0,
        rows: Vec::with_capacity(opts.batch_size),
    };
    let mut kept = 0u64;
    let mut keys = vec![1u64; sizes.len()];
    for _ in 0..candidates {
        if rng.bernoulli(fact.density) {
            let mut row = Vec::with_capacity(keys.len() + fact.measures.len());
            row.extend(keys.iter().map(|&k| Value::Int(k as i64)));
            for _ in &fact.measures {
                // Single-precision measures, widened so they stay exact.
                row.push(Value::Real(rng.uniform_float(0.0, 100.0) as f32 as f64));
            }
            batch.rows.push(row);
            kept += 1;
            if batch.rows.len() == opts.batch_size {
                flush(sink, &mut batch)?;
            }
        }
        // Advance the odometer; the final wrap coincides with loop exit.
        for slot in (0..keys.len()).rev() {
            keys[slot] += 1;
            if keys[slot] <= sizes[slot] {
                break;
            }
            keys[slot] = 1;
        }
    }
    if !batch.rows.is_empty() {
        flush(sink, &mut batch)?;
    }
    Ok(kept)
}

fn flush(sink: &mut dyn BatchSink, batch: &mut TupleBatch) -> Result<(), DataGenError> {
    sink.submit(batch).map_err(|source| DataGenError::Sink {
        table: batch.table_name.clone(),
        source,
    })?;
    batch.ordinal += 1;
    batch.rows.clear();
    Ok(())
}

/// Result of a full warehouse load.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub stats: WarehouseStats,
    pub duration: Duration,
}

/// Warehouse load failures, pointing at the table that broke and the last
/// one that finished so a partial load can be diagnosed.
#[derive(Debug, Error)]
#[error(
    "loading {table} failed (last table completed: {}): {source}",
    last_completed.as_deref().unwrap_or("none")
)]
pub struct LoadError {
    pub table: String,
    pub last_completed: Option<String>,
    pub source: DataGenError,
}

struct BackendSink<'a> {
    backend: &'a mut dyn Backend,
}

impl BatchSink for BackendSink<'_> {
    fn submit(&mut self, batch: &TupleBatch) -> Result<(), SinkError> {
        self.backend
            .bulk_insert(batch)
            .map(|_| ())
            .map_err(|e: BackendError| SinkError::new(e.to_string()))
    }
}

/// Generates and loads every warehouse table into `backend`, timing the
/// whole operation. Tables load in canonical dependency order (dimension
/// levels coarsest first, then fact tables), so declared foreign keys are
/// always satisfied mid-load.
pub fn load_warehouse(
    schema: &WarehouseSchema,
    rng: &mut SeededRng,
    referential: &StringReferential,
    opts: &GenOptions,
    backend: &mut dyn Backend,
) -> Result<LoadReport, LoadError> {
    let start = Instant::now();
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut last_completed: Option<String> = None;
    let mut sink = BackendSink { backend };

    for dim in &schema.dimensions {
        for level_no in (1..=dim.depth()).rev() {
            let table = dim.level(level_no).table_name.clone();
            let rows = generate_level(dim, level_no, rng, referential, &mut sink, opts).map_err(
                |source| LoadError {
                    table: table.clone(),
                    last_completed: last_completed.clone(),
                    source,
                },
            )?;
            counts.insert(table.clone(), rows);
            last_completed = Some(table);
        }
    }
    for fact in &schema.fact_tables {
        let rows =
            generate_fact(fact, schema, rng, &mut sink, opts).map_err(|source| LoadError {
                table: fact.table_name.clone(),
                last_completed: last_completed.clone(),
                source,
            })?;
        counts.insert(fact.table_name.clone(), rows);
        last_completed = Some(fact.table_name.clone());
    }

    let table_counts: Vec<(String, u64)> = schema
        .all_table_names()
        .into_iter()
        .map(|name| {
            let n = counts[&name];
            (name, n)
        })
        .collect();
    let global_size = table_counts.iter().map(|&(_, n)| n).sum();
    Ok(LoadReport {
        stats: WarehouseStats {
            table_counts,
            global_size,
        },
        duration: start.elapsed(),
    })
}

/// Sink that accumulates every row in memory, keyed by table.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub tables: BTreeMap<String, Vec<Vec<Value>>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self, table: &str) -> &[Vec<Value>] {
        self.tables.get(table).map(|r| r.as_slice()).unwrap_or(&[])
    }
}

impl BatchSink for MemorySink {
    fn submit(&mut self, batch: &TupleBatch) -> Result<(), SinkError> {
        self.tables
            .entry(batch.table_name.clone())
            .or_default()
            .extend(batch.rows.iter().cloned());
        Ok(())
    }
}

/// Sink that writes one headered CSV file per table into a directory.
///
/// Generated values never contain commas, quotes, or newlines, so fields
/// are written verbatim.
pub struct CsvSink {
    dir: PathBuf,
    headers: BTreeMap<String, Vec<String>>,
    writers: BTreeMap<String, BufWriter<File>>,
}

impl CsvSink {
    /// Prepares a sink for `schema`'s tables under `dir` (which must exist).
    pub fn new(dir: impl AsRef<Path>, schema: &WarehouseSchema) -> Self {
        let mut headers = BTreeMap::new();
        for dim in &schema.dimensions {
            for level in &dim.levels {
                let mut cols = vec![level.primary_key.clone()];
                cols.extend(level.members.iter().cloned());
                cols.extend(level.foreign_key.iter().cloned());
                headers.insert(level.table_name.clone(), cols);
            }
        }
        for fact in &schema.fact_tables {
            let mut cols = fact.key_attrs.clone();
            cols.extend(fact.measures.iter().cloned());
            headers.insert(fact.table_name.clone(), cols);
        }
        CsvSink {
            dir: dir.as_ref().to_path_buf(),
            headers,
            writers: BTreeMap::new(),
        }
    }

    /// Flushes every file; call once after generation.
    pub fn finish(mut self) -> Result<(), SinkError> {
        for (table, writer) in self.writers.iter_mut() {
            writer
                .flush()
                .map_err(|e| SinkError::new(format!("flushing {table}.csv: {e}")))?;
        }
        Ok(())
    }
}

impl BatchSink for CsvSink {
    fn submit(&mut self, batch: &TupleBatch) -> Result<(), SinkError> {
        let table = &batch.table_name;
        if !self.writers.contains_key(table) {
            let header = self
                .headers
                .get(table)
                .ok_or_else(|| SinkError::new(format!("{table} is not in the schema")))?;
            let path = self.dir.join(format!("{table}.csv"));
            let file = File::create(&path)
                .map_err(|e| SinkError::new(format!("creating {}: {e}", path.display())))?;
            let mut writer = BufWriter::new(file);
            writeln!(writer, "{}", header.join(","))
                .map_err(|e| SinkError::new(format!("writing {table}.csv: {e}")))?;
            self.writers.insert(table.clone(), writer);
        }
        let writer = self.writers.get_mut(table).unwrap();
        for row in &batch.rows {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{}", line.join(","))
                .map_err(|e| SinkError::new(format!("writing {table}.csv: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::LowLevelParams;
    use crate::rng::{PURPOSE_DATA, PURPOSE_SCHEMA};
    use crate::schema::build_schema;
    use std::collections::BTreeSet;

    /// A small warehouse: two dimensions of 2 levels (8 and 2 rows), one
    /// fact table over both at density 0.5, so 64 candidates.
    fn small_schema() -> WarehouseSchema {
        let low = LowLevelParams {
            nb_ft: 1,
            tot_nb_dim: 2,
            nb_dim: vec![2],
            nb_meas: vec![2],
            density: vec![0.5],
            nb_levels: vec![2, 2],
            nb_att: vec![vec![2, 1], vec![1, 1]],
            hhlevel_size: vec![2, 2],
            dim_sfactor: vec![4.0, 4.0],
        };
        low.validate().unwrap();
        build_schema(&low, &mut SeededRng::new(3, PURPOSE_SCHEMA, 0.0)).unwrap()
    }

    fn data_rng(seed: u64) -> SeededRng {
        SeededRng::new(seed, PURPOSE_DATA, 0.0)
    }

    #[test]
    fn levels_fill_their_cardinality_with_dense_keys() {
        let schema = small_schema();
        let referential = StringReferential::new(9);
        let mut sink = MemorySink::new();
        let counts = generate_dimension(
            &schema.dimensions[0],
            &mut data_rng(9),
            &referential,
            &mut sink,
            &GenOptions::default(),
        )
        .unwrap();
        assert_eq!(
            counts,
            vec![("DIM1_1".to_string(), 8), ("DIM1_2".to_string(), 2)]
        );

        let rows = sink.rows("DIM1_1");
        assert_eq!(rows.len(), 8);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row[0], Value::Int(i as i64 + 1));
            // Two members then the link to the coarser level.
            assert_eq!(row.len(), 4);
            for member_val in &row[1..3] {
                let Value::Text(s) = member_val else {
                    panic!("member must be text")
                };
                assert!(s.starts_with("DIM1_1_DESCR"));
            }
            let Value::Int(fk) = &row[3] else {
                panic!("link must be an integer")
            };
            assert!((1..=2).contains(fk), "link {fk} outside the coarser level");
        }
        assert_eq!(sink.rows("DIM1_2").len(), 2);
        // Coarsest level rows carry no link column.
        assert_eq!(sink.rows("DIM1_2")[0].len(), 2);
    }

    #[test]
    fn generation_is_reproducible() {
        let schema = small_schema();
        let referential = StringReferential::new(4);
        let mut a = MemorySink::new();
        let mut b = MemorySink::new();
        for sink in [&mut a, &mut b] {
            let mut rng = data_rng(4);
            for dim in &schema.dimensions {
                generate_dimension(dim, &mut rng, &referential, sink, &GenOptions::default())
                    .unwrap();
            }
            generate_fact(
                &schema.fact_tables[0],
                &schema,
                &mut rng,
                sink,
                &GenOptions::default(),
            )
            .unwrap();
        }
        assert_eq!(a.tables, b.tables);
    }

    #[test]
    fn fact_rows_are_distinct_candidates_with_bounded_measures() {
        let schema = small_schema();
        let mut sink = MemorySink::new();
        let kept = generate_fact(
            &schema.fact_tables[0],
            &schema,
            &mut data_rng(11),
            &mut sink,
            &GenOptions::default(),
        )
        .unwrap();
        let rows = sink.rows("FT1");
        assert_eq!(rows.len(), kept as usize);
        let mut seen = BTreeSet::new();
        for row in rows {
            let (Value::Int(k1), Value::Int(k2)) = (&row[0], &row[1]) else {
                panic!("keys must be integers")
            };
            assert!((1..=8).contains(k1) && (1..=8).contains(k2));
            assert!(seen.insert((*k1, *k2)), "candidate appeared twice");
            for m in &row[2..] {
                let Value::Real(v) = m else {
                    panic!("measure must be real")
                };
                assert!((0.0..100.0).contains(v));
                assert_eq!(*v, *v as f32 as f64, "measure wider than single precision");
            }
        }
    }

    #[test]
    fn fact_row_count_is_binomial_around_density() {
        let schema = small_schema();
        // 64 candidates at density 0.5: mean 32, stdev 4. Averaging 200
        // seeds shrinks the standard error to ~0.28.
        let mut total = 0u64;
        let seeds = 200;
        for seed in 0..seeds {
            let mut sink = MemorySink::new();
            total += generate_fact(
                &schema.fact_tables[0],
                &schema,
                &mut data_rng(seed),
                &mut sink,
                &GenOptions::default(),
            )
            .unwrap();
        }
        let mean = total as f64 / seeds as f64;
        assert!((mean - 32.0).abs() < 1.0, "mean row count drifted: {mean}");
    }

    #[test]
    fn batches_respect_size_and_arrive_in_order() {
        struct Probe {
            sizes: Vec<usize>,
            ordinals: Vec<u64>,
        }
        impl BatchSink for Probe {
            fn submit(&mut self, batch: &TupleBatch) -> Result<(), SinkError> {
                self.sizes.push(batch.rows.len());
                self.ordinals.push(batch.ordinal);
                Ok(())
            }
        }
        let schema = small_schema();
        let mut probe = Probe {
            sizes: vec![],
            ordinals: vec![],
        };
        let opts = GenOptions {
            batch_size: 3,
            ..GenOptions::default()
        };
        generate_level(
            &schema.dimensions[0],
            1,
            &mut data_rng(2),
            &StringReferential::new(2),
            &mut probe,
            &opts,
        )
        .unwrap();
        assert_eq!(probe.sizes, vec![3, 3, 2]);
        assert_eq!(probe.ordinals, vec![0, 1, 2]);
    }

    #[test]
    fn oversized_cross_products_are_refused() {
        let schema = small_schema();
        let opts = GenOptions {
            fact_candidate_cap: 63,
            ..GenOptions::default()
        };
        let mut sink = MemorySink::new();
        match generate_fact(
            &schema.fact_tables[0],
            &schema,
            &mut data_rng(1),
            &mut sink,
            &opts,
        ) {
            Err(DataGenError::TooManyCandidates {
                table, candidates, ..
            }) => {
                assert_eq!(table, "FT1");
                assert_eq!(candidates, 64);
            }
            other => panic!("expected candidate cap error, got {other:?}"),
        }
        assert!(sink.tables.is_empty(), "nothing may be emitted on refusal");
    }

    #[test]
    fn csv_sink_writes_headered_files() {
        let schema = small_schema();
        let dir = tempfile::tempdir().unwrap();
        let referential = StringReferential::new(5);
        let mut rng = data_rng(5);
        let mut sink = CsvSink::new(dir.path(), &schema);
        for dim in &schema.dimensions {
            generate_dimension(
                dim,
                &mut rng,
                &referential,
                &mut sink,
                &GenOptions::default(),
            )
            .unwrap();
        }
        generate_fact(
            &schema.fact_tables[0],
            &schema,
            &mut rng,
            &mut sink,
            &GenOptions::default(),
        )
        .unwrap();
        sink.finish().unwrap();

        let dim_csv = std::fs::read_to_string(dir.path().join("DIM1_1.csv")).unwrap();
        let mut lines = dim_csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "DIM1_1_PK,DIM1_1_DESCR1,DIM1_1_DESCR2,DIM1_2_FK"
        );
        assert_eq!(lines.count(), 8);

        let fact_csv = std::fs::read_to_string(dir.path().join("FT1.csv")).unwrap();
        let header = fact_csv.lines().next().unwrap();
        assert!(header.ends_with(",FT1_MEAS1,FT1_MEAS2"));
    }
}
