//! Database abstraction the benchmark drives.
//!
//! The crate ships one complete engine, embedded SQLite, reachable by file
//! path, `:memory:`, or a `sqlite://` URI. URIs with `postgres://` or
//! `mysql://` schemes parse (and pick the matching SQL dialect) so
//! configurations written for external engines validate, but connecting to
//! them reports that no driver is built in rather than pretending.

mod sqlite;

pub use sqlite::SqliteBackend;

use crate::datagen::TupleBatch;
use crate::dialect::DialectDescriptor;
use crate::schema::{WarehouseSchema, WarehouseStats};
use crate::value::Value;
use std::path::PathBuf;
use std::time::Duration;
use thiserror::Error;

/// Where a backend lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConnectionDescriptor {
    /// Embedded engine, private in-memory database.
    Memory,
    /// Embedded engine, database file (created on demand).
    File(PathBuf),
    /// An engine this build has no driver for; kept for error reporting.
    External { scheme: String, uri: String },
}

/// Parsed connection target plus the SQL dialect to speak.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub descriptor: ConnectionDescriptor,
    pub dialect: DialectDescriptor,
}

impl BackendConfig {
    /// Parses a `--db` argument: `:memory:`, a plain file path, or a URI.
    ///
    /// `sqlite://PATH` addresses the embedded engine; `postgres://` and
    /// `mysql://` parse to external descriptors with their engine's
    /// dialect; other schemes fall back to the standard dialect. A
    /// `dialect_override` names any built-in dialect and wins over the
    /// scheme's choice.
    pub fn parse(db: &str, dialect_override: Option<&str>) -> Result<Self, BackendError> {
        let mut config = if db == ":memory:" {
            BackendConfig {
                descriptor: ConnectionDescriptor::Memory,
                dialect: DialectDescriptor::sqlite(),
            }
        } else if db.contains("://") {
            let url = url::Url::parse(db).map_err(|e| BackendError::BadUri {
                uri: db.to_string(),
                message: e.to_string(),
            })?;
            match url.scheme() {
                "sqlite" => {
                    // Accept both sqlite://relative and sqlite:///absolute.
                    let path = format!("{}{}", url.authority(), url.path());
                    if path.is_empty() {
                        return Err(BackendError::BadUri {
                            uri: db.to_string(),
                            message: "sqlite URI names no file".to_string(),
                        });
                    }
                    BackendConfig {
                        descriptor: ConnectionDescriptor::File(PathBuf::from(path)),
                        dialect: DialectDescriptor::sqlite(),
                    }
                }
                scheme => BackendConfig {
                    descriptor: ConnectionDescriptor::External {
                        scheme: scheme.to_string(),
                        uri: db.to_string(),
                    },
                    dialect: DialectDescriptor::by_name(scheme)
                        .unwrap_or_else(DialectDescriptor::sql99),
                },
            }
        } else {
            BackendConfig {
                descriptor: ConnectionDescriptor::File(PathBuf::from(db)),
                dialect: DialectDescriptor::sqlite(),
            }
        };
        if let Some(name) = dialect_override {
            config.dialect = DialectDescriptor::by_name(name)
                .ok_or_else(|| BackendError::UnknownDialect(name.to_string()))?;
        }
        Ok(config)
    }
}

/// Timing and size of one executed query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryOutcome {
    /// Rows fetched (every result row is drained).
    pub rows: u64,
    pub duration: Duration,
}

/// Backend failures.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("cannot open database: {0}")]
    Connect(String),
    #[error(
        "no {scheme} driver is built in; use a file path, :memory:, or a \
         sqlite:// URI for the embedded engine"
    )]
    UnsupportedScheme { scheme: String },
    #[error("unknown dialect {0} (known: sqlite, postgres, mysql, sql99)")]
    UnknownDialect(String),
    #[error("invalid database URI {uri}: {message}")]
    BadUri { uri: String, message: String },
    #[error("DDL statement {index} failed: {message}")]
    Ddl { index: usize, message: String },
    #[error(
        "bulk insert into {table}: rows carry {got} values but the table has {expected} columns"
    )]
    Arity {
        table: String,
        expected: usize,
        got: usize,
    },
    #[error("SQL failed: {message} (statement: {excerpt})")]
    Sql { message: String, excerpt: String },
}

impl BackendError {
    /// Builds a `Sql` error keeping only the head of a long statement.
    pub fn sql(message: impl Into<String>, statement: &str) -> Self {
        let excerpt: String = if statement.len() > 120 {
            format!("{}...", &statement[..120])
        } else {
            statement.to_string()
        };
        BackendError::Sql {
            message: message.into(),
            excerpt,
        }
    }
}

/// A connected database able to run the benchmark protocol.
pub trait Backend {
    /// Runs DDL statements in order, stopping at the first failure and
    /// reporting its index. Returns how many statements ran.
    fn execute_ddl(&mut self, statements: &[String]) -> Result<usize, BackendError>;

    /// Inserts a generated batch inside one transaction. Row arity is
    /// checked against the table before anything is written. Returns the
    /// number of rows inserted.
    fn bulk_insert(&mut self, batch: &TupleBatch) -> Result<u64, BackendError>;

    /// Runs a query, drains its rows, and reports count plus wall time.
    fn execute_timed(&mut self, sql: &str) -> Result<QueryOutcome, BackendError>;

    /// Runs a statement that returns no rows; yields rows affected.
    fn execute_update(&mut self, sql: &str) -> Result<u64, BackendError>;

    /// Runs a query and materializes every row.
    fn query_rows(&mut self, sql: &str) -> Result<Vec<Vec<Value>>, BackendError>;

    /// Lists user table names, alphabetically.
    fn list_tables(&mut self) -> Result<Vec<String>, BackendError>;

    /// Drops every benchmark table (fact tables first, then hierarchy
    /// levels finest first, so declared references never dangle). Other
    /// tables are untouched. Returns the number dropped; zero means the
    /// database held no benchmark tables, making the call idempotent.
    fn reset_warehouse(&mut self) -> Result<usize, BackendError>;

    /// Counts rows of every schema table in canonical order.
    fn warehouse_stats(&mut self, schema: &WarehouseSchema)
        -> Result<WarehouseStats, BackendError>;

    /// The SQL dialect this connection speaks.
    fn dialect(&self) -> &DialectDescriptor;
}

/// Opens a connection for `config`.
///
/// Only the embedded engine is available; external descriptors fail with
/// [`BackendError::UnsupportedScheme`].
pub fn connect(config: &BackendConfig) -> Result<Box<dyn Backend>, BackendError> {
    match &config.descriptor {
        ConnectionDescriptor::Memory => Ok(Box::new(SqliteBackend::open_memory(
            config.dialect.clone(),
        )?)),
        ConnectionDescriptor::File(path) => Ok(Box::new(SqliteBackend::open_file(
            path,
            config.dialect.clone(),
        )?)),
        ConnectionDescriptor::External { scheme, .. } => Err(BackendError::UnsupportedScheme {
            scheme: scheme.clone(),
        }),
    }
}

/// Classifies a table name created by this benchmark and assigns its drop
/// precedence: fact tables first, then levels from finest to coarsest.
/// Names that do not match the generator's patterns return `None`.
pub(crate) fn benchmark_drop_rank(name: &str) -> Option<(u32, u32)> {
    fn ordinal(digits: &str) -> Option<u32> {
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    }
    if let Some(rest) = name.strip_prefix("FT") {
        let idx = ordinal(rest)?;
        return Some((0, idx));
    }
    if let Some(rest) = name.strip_prefix("DIM") {
        let (dim, level) = rest.split_once('_')?;
        let d = ordinal(dim)?;
        let l = ordinal(level)?;
        return Some((l, d));
    }
    None
}
