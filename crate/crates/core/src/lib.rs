//! dwbench-core: a deterministic benchmark kit for relational data warehouses.
//!
//! The library synthesizes a parameterized star/snowflake/constellation
//! warehouse (schema and data), a decision-support workload of OLAP and
//! extraction queries, and an incremental refresh stream, then drives a
//! load/cold/warm measurement protocol against a SQL backend and reports
//! response-time metrics.
//!
//! Everything downstream of a `(configuration, seed)` pair is reproducible:
//! the same inputs yield byte-identical DDL, table contents, workload files,
//! and refresh operation streams on every run and every platform.
//!
//! Module map:
//!
//! * [`params`]: benchmark parameters, derivation of the expanded per-table
//!   parameter set, validation, and size estimation.
//! * [`rng`]: the seeded random engine and the string referential.
//! * [`schema`]: warehouse schema synthesis; [`ddl`] renders it to SQL.
//! * [`datagen`]: dimension and fact tuple generation, batching, loading.
//! * [`workload`]: query model, workload generation, SQL rendering, and the
//!   workload file format.
//! * [`etl`]: refresh planning (insert/modify quotas) and execution.
//! * [`harness`]: the load/cold/warm protocol, metrics, and CSV reporting.
//! * [`backend`]: the database abstraction and the embedded SQLite engine.
//! * [`dialect`]: per-engine SQL capability descriptors.
//! * [`config`]: the key=value configuration file format.

pub mod backend;
pub mod config;
pub mod datagen;
pub mod ddl;
pub mod dialect;
pub mod etl;
pub mod harness;
pub mod naming;
pub mod params;
pub mod rng;
pub mod schema;
pub mod value;
pub mod workload;

pub use backend::{connect, Backend, BackendConfig, BackendError};
pub use dialect::DialectDescriptor;
pub use params::{HighLevelParams, LowLevelParams};
pub use rng::SeededRng;
pub use schema::WarehouseSchema;
pub use value::Value;
