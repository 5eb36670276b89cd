//! Embedded SQLite backend (bundled engine, no server required).

use super::{benchmark_drop_rank, Backend, BackendError, QueryOutcome};
use crate::datagen::TupleBatch;
use crate::dialect::DialectDescriptor;
use crate::schema::{WarehouseSchema, WarehouseStats};
use crate::value::Value;
use rusqlite::types::ValueRef;
use rusqlite::{Connection, ToSql};
use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

impl ToSql for Value {
    fn to_sql(&self) -> rusqlite::Result<rusqlite::types::ToSqlOutput<'_>> {
        use rusqlite::types::ToSqlOutput;
        Ok(match self {
            Value::Int(v) => ToSqlOutput::from(*v),
            Value::Real(v) => ToSqlOutput::from(*v),
            Value::Text(s) => ToSqlOutput::from(s.as_str()),
            Value::Null => ToSqlOutput::from(rusqlite::types::Null),
        })
    }
}

fn from_sqlite(value: ValueRef<'_>) -> Result<Value, BackendError> {
    Ok(match value {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(v) => Value::Int(v),
        ValueRef::Real(v) => Value::Real(v),
        ValueRef::Text(bytes) => Value::Text(String::from_utf8_lossy(bytes).into_owned()),
        ValueRef::Blob(_) => {
            return Err(BackendError::Sql {
                message: "unexpected blob column in result".to_string(),
                excerpt: String::new(),
            })
        }
    })
}

/// Connection to an embedded SQLite database.
pub struct SqliteBackend {
    conn: Connection,
    dialect: DialectDescriptor,
    /// Column counts per table, learned on first insert.
    arity: HashMap<String, usize>,
}

impl SqliteBackend {
    /// Opens (creating if needed) a database file.
    pub fn open_file(
        path: impl AsRef<Path>,
        dialect: DialectDescriptor,
    ) -> Result<Self, BackendError> {
        let conn =
            Connection::open(path.as_ref()).map_err(|e| BackendError::Connect(e.to_string()))?;
        Self::with_connection(conn, dialect)
    }

    /// Opens a private in-memory database.
    pub fn open_memory(dialect: DialectDescriptor) -> Result<Self, BackendError> {
        let conn =
            Connection::open_in_memory().map_err(|e| BackendError::Connect(e.to_string()))?;
        Self::with_connection(conn, dialect)
    }

    fn with_connection(conn: Connection, dialect: DialectDescriptor) -> Result<Self, BackendError> {
        // Bulk-load oriented settings; durability is irrelevant for a
        // regenerable benchmark database.
        conn.execute_batch(
            "PRAGMA journal_mode = MEMORY; \
             PRAGMA synchronous = OFF; \
             PRAGMA temp_store = MEMORY;",
        )
        .map_err(|e| BackendError::Connect(e.to_string()))?;
        Ok(SqliteBackend {
            conn,
            dialect,
            arity: HashMap::new(),
        })
    }

    fn table_arity(&mut self, table: &str) -> Result<usize, BackendError> {
        if let Some(&n) = self.arity.get(table) {
            return Ok(n);
        }
        let sql = format!("SELECT * FROM {table} LIMIT 0");
        let stmt = self
            .conn
            .prepare(&sql)
            .map_err(|e| BackendError::sql(e.to_string(), &sql))?;
        let n = stmt.column_count();
        drop(stmt);
        self.arity.insert(table.to_string(), n);
        Ok(n)
    }
}

impl Backend for SqliteBackend {
    fn execute_ddl(&mut self, statements: &[String]) -> Result<usize, BackendError> {
        for (index, statement) in statements.iter().enumerate() {
            self.conn
                .execute(statement, [])
                .map_err(|e| BackendError::Ddl {
                    index,
                    message: e.to_string(),
                })?;
        }
        // Table shapes may have changed under a cached arity.
        self.arity.clear();
        Ok(statements.len())
    }

    fn bulk_insert(&mut self, batch: &TupleBatch) -> Result<u64, BackendError> {
        if batch.rows.is_empty() {
            return Ok(0);
        }
        let expected = self.table_arity(&batch.table_name)?;
        for row in &batch.rows {
            if row.len() != expected {
                return Err(BackendError::Arity {
                    table: batch.table_name.clone(),
                    expected,
                    got: row.len(),
                });
            }
        }
        let placeholders = vec!["?"; expected].join(", ");
        let sql = format!("INSERT INTO {} VALUES ({placeholders})", batch.table_name);
        let tx = self
            .conn
            .transaction()
            .map_err(|e| BackendError::sql(e.to_string(), &sql))?;
        {
            let mut stmt = tx
                .prepare_cached(&sql)
                .map_err(|e| BackendError::sql(e.to_string(), &sql))?;
            for row in &batch.rows {
                stmt.execute(rusqlite::params_from_iter(row.iter()))
                    .map_err(|e| BackendError::sql(e.to_string(), &sql))?;
            }
        }
        tx.commit()
            .map_err(|e| BackendError::sql(e.to_string(), &sql))?;
        Ok(batch.rows.len() as u64)
    }

    fn execute_timed(&mut self, sql: &str) -> Result<QueryOutcome, BackendError> {
        let start = Instant::now();
        let mut stmt = self
            .conn
            .prepare(sql)
            .map_err(|e| BackendError::sql(e.to_string(), sql))?;
        let mut rows = stmt
            .query([])
            .map_err(|e| BackendError::sql(e.to_string(), sql))?;
        let mut count = 0u64;
        while rows
            .next()
            .map_err(|e| BackendError::sql(e.to_string(), sql))?
            .is_some()
        {
            count += 1;
        }
        Ok(QueryOutcome {
            rows: count,
            duration: start.elapsed(),
        })
    }

    fn execute_update(&mut self, sql: &str) -> Result<u64, BackendError> {
        self.conn
            .execute(sql, [])
            .map(|n| n as u64)
            .map_err(|e| BackendError::sql(e.to_string(), sql))
    }

    fn query_rows(&mut self, sql: &str) -> Result<Vec<Vec<Value>>, BackendError> {
        let mut stmt = self
            .conn
            .prepare(sql)
            .map_err(|e| BackendError::sql(e.to_string(), sql))?;
        let columns = stmt.column_count();
        let mut rows = stmt
            .query([])
            .map_err(|e| BackendError::sql(e.to_string(), sql))?;
        let mut out = Vec::new();
        while let Some(row) = rows
            .next()
            .map_err(|e| BackendError::sql(e.to_string(), sql))?
        {
            let mut converted = Vec::with_capacity(columns);
            for i in 0..columns {
                let raw = row
                    .get_ref(i)
                    .map_err(|e| BackendError::sql(e.to_string(), sql))?;
                converted.push(from_sqlite(raw)?);
            }
            out.push(converted);
        }
        Ok(out)
    }

    fn list_tables(&mut self) -> Result<Vec<String>, BackendError> {
        let sql = "SELECT name FROM sqlite_master \
                   WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name";
        let rows = self.query_rows(sql)?;
        Ok(rows
            .into_iter()
            .filter_map(|row| match row.into_iter().next() {
                Some(Value::Text(name)) => Some(name),
                _ => None,
            })
            .collect())
    }

    fn reset_warehouse(&mut self) -> Result<usize, BackendError> {
        let mut targets: Vec<(u32, u32, String)> = self
            .list_tables()?
            .into_iter()
            .filter_map(|name| benchmark_drop_rank(&name).map(|(g, o)| (g, o, name)))
            .collect();
        targets.sort();
        for (_, _, name) in &targets {
            let sql = format!("DROP TABLE {name}");
            self.execute_update(&sql)?;
        }
        self.arity.clear();
        Ok(targets.len())
    }

    fn warehouse_stats(
        &mut self,
        schema: &WarehouseSchema,
    ) -> Result<WarehouseStats, BackendError> {
        let mut table_counts = Vec::new();
        let mut global_size = 0u64;
        for table in schema.all_table_names() {
            let sql = format!("SELECT COUNT(*) FROM {table}");
            let rows = self.query_rows(&sql)?;
            let count = match rows.first().and_then(|r| r.first()) {
                Some(Value::Int(n)) => *n as u64,
                _ => {
                    return Err(BackendError::sql("COUNT returned no rows", &sql));
                }
            };
            table_counts.push((table, count));
            global_size += count;
        }
        Ok(WarehouseStats {
            table_counts,
            global_size,
        })
    }

    fn dialect(&self) -> &DialectDescriptor {
        &self.dialect
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddl::{emit_ddl, ConstraintMode};
    use crate::params::{derive_low_level, HighLevelParams};
    use crate::rng::{SeededRng, StringReferential, PURPOSE_PARAMS, PURPOSE_SCHEMA};
    use crate::schema::build_schema;

    fn open() -> SqliteBackend {
        SqliteBackend::open_memory(DialectDescriptor::sqlite()).unwrap()
    }

    fn default_schema() -> WarehouseSchema {
        let high = HighLevelParams {
            sigma_ratio: 0.0,
            ..HighLevelParams::default()
        };
        let low = derive_low_level(&high, &mut SeededRng::new(1, PURPOSE_PARAMS, 0.0)).unwrap();
        build_schema(&low, &mut SeededRng::new(42, PURPOSE_SCHEMA, 0.0)).unwrap()
    }

    #[test]
    fn generated_ddl_executes_end_to_end() {
        let schema = default_schema();
        let ddl = emit_ddl(
            &schema,
            &DialectDescriptor::sqlite(),
            ConstraintMode::Declared,
        )
        .unwrap();
        let mut backend = open();
        assert_eq!(backend.execute_ddl(&ddl).unwrap(), 16);
        let tables = backend.list_tables().unwrap();
        assert_eq!(tables.len(), 16);
        assert!(tables.contains(&"FT1".to_string()));
    }

    #[test]
    fn ddl_failure_reports_the_statement_index() {
        let mut backend = open();
        let statements = vec![
            "CREATE TABLE A (X INTEGER)".to_string(),
            "CREATE TABLE A (X INTEGER)".to_string(),
        ];
        match backend.execute_ddl(&statements) {
            Err(BackendError::Ddl { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected DDL error, got {other:?}"),
        }
        assert_eq!(backend.list_tables().unwrap(), vec!["A".to_string()]);
    }

    #[test]
    fn bulk_insert_roundtrips_values() {
        let mut backend = open();
        backend
            .execute_ddl(&["CREATE TABLE T (K INTEGER, M REAL, S CHAR(10))".to_string()])
            .unwrap();
        let batch = TupleBatch {
            table_name: "T".to_string(),
            ordinal: 0,
            rows: vec![
                vec![
                    Value::Int(1),
                    Value::Real(0.25f32 as f64),
                    Value::Text("A_B".to_string()),
                ],
                vec![Value::Int(2), Value::Real(99.5), Value::Null],
            ],
        };
        assert_eq!(backend.bulk_insert(&batch).unwrap(), 2);
        let rows = backend
            .query_rows("SELECT K, M, S FROM T ORDER BY K")
            .unwrap();
        assert_eq!(
            rows,
            vec![
                vec![
                    Value::Int(1),
                    Value::Real(0.25),
                    Value::Text("A_B".to_string())
                ],
                vec![Value::Int(2), Value::Real(99.5), Value::Null],
            ]
        );
    }

    #[test]
    fn arity_mismatch_is_rejected_before_writing() {
        let mut backend = open();
        backend
            .execute_ddl(&["CREATE TABLE T (A INTEGER, B INTEGER)".to_string()])
            .unwrap();
        let batch = TupleBatch {
            table_name: "T".to_string(),
            ordinal: 0,
            rows: vec![vec![Value::Int(1)]],
        };
        match backend.bulk_insert(&batch) {
            Err(BackendError::Arity {
                table,
                expected,
                got,
            }) => {
                assert_eq!(table, "T");
                assert_eq!(expected, 2);
                assert_eq!(got, 1);
            }
            other => panic!("expected arity error, got {other:?}"),
        }
        let rows = backend.query_rows("SELECT COUNT(*) FROM T").unwrap();
        assert_eq!(rows[0][0], Value::Int(0));
    }

    #[test]
    fn execute_timed_counts_drained_rows() {
        let mut backend = open();
        backend
            .execute_ddl(&["CREATE TABLE T (A INTEGER)".to_string()])
            .unwrap();
        backend
            .execute_update("INSERT INTO T VALUES (1), (2), (3)")
            .unwrap();
        let outcome = backend.execute_timed("SELECT A FROM T").unwrap();
        assert_eq!(outcome.rows, 3);
        let err = backend.execute_timed("SELECT nope FROM T");
        assert!(matches!(err, Err(BackendError::Sql { .. })));
    }

    #[test]
    fn reset_drops_only_benchmark_tables_and_is_idempotent() {
        let schema = default_schema();
        let ddl = emit_ddl(
            &schema,
            &DialectDescriptor::sqlite(),
            ConstraintMode::Declared,
        )
        .unwrap();
        let mut backend = open();
        backend.execute_ddl(&ddl).unwrap();
        backend
            .execute_ddl(&["CREATE TABLE KEEP_ME (X INTEGER)".to_string()])
            .unwrap();
        assert_eq!(backend.reset_warehouse().unwrap(), 16);
        assert_eq!(backend.list_tables().unwrap(), vec!["KEEP_ME".to_string()]);
        assert_eq!(backend.reset_warehouse().unwrap(), 0);
    }

    #[test]
    fn stats_count_every_schema_table() {
        let schema = default_schema();
        let ddl = emit_ddl(
            &schema,
            &DialectDescriptor::sqlite(),
            ConstraintMode::Declared,
        )
        .unwrap();
        let mut backend = open();
        backend.execute_ddl(&ddl).unwrap();
        backend
            .execute_update("INSERT INTO DIM1_3 VALUES (1, 'a', 'b', 'c', 'd', 'e')")
            .unwrap();
        let stats = backend.warehouse_stats(&schema).unwrap();
        assert_eq!(stats.table_counts.len(), 16);
        assert_eq!(stats.count("DIM1_3"), Some(1));
        assert_eq!(stats.count("FT1"), Some(0));
        assert_eq!(stats.global_size, 1);
    }

    #[test]
    fn loaded_dimension_data_satisfies_declared_references() {
        use crate::datagen::{BatchSink, SinkError};
        struct Adapter<'a> {
            backend: &'a mut SqliteBackend,
        }
        impl BatchSink for Adapter<'_> {
            fn submit(&mut self, batch: &TupleBatch) -> Result<(), SinkError> {
                self.backend
                    .bulk_insert(batch)
                    .map(|_| ())
                    .map_err(|e| SinkError::new(e.to_string()))
            }
        }

        // Load a small dimension and check no link value dangles.
        let schema = default_schema();
        let ddl = emit_ddl(
            &schema,
            &DialectDescriptor::sqlite(),
            ConstraintMode::Declared,
        )
        .unwrap();
        let mut backend = open();
        backend.execute_ddl(&ddl).unwrap();
        let referential = StringReferential::new(7);
        let mut rng = SeededRng::new(7, crate::rng::PURPOSE_DATA, 0.0);
        let mut sink = Adapter {
            backend: &mut backend,
        };
        crate::datagen::generate_dimension(
            &schema.dimensions[0],
            &mut rng,
            &referential,
            &mut sink,
            &crate::datagen::GenOptions::default(),
        )
        .unwrap();
        let dangling = backend
            .query_rows(
                "SELECT COUNT(*) FROM DIM1_1 \
                 WHERE DIM1_2_FK NOT IN (SELECT DIM1_2_PK FROM DIM1_2)",
            )
            .unwrap();
        assert_eq!(dangling[0][0], Value::Int(0));
    }
}
