//! Decision-support workload: query model, generation, SQL rendering, and
//! the workload file format.

pub mod ast;
pub mod file;
pub mod gen;
pub mod render;

pub use ast::{
    Aggregate, AstError, CmpOp, Grouping, Having, JoinCond, Operand, QualifiedAttr, QueryAst,
    QueryKind, Restriction,
};
pub use file::{load_workload, parse_workload, render_workload, save_workload, WorkloadFileError};
pub use gen::{
    build_initial_query, derive_drilldowns, generate_workload, DrillCursor, Workload,
    WorkloadParamError, WorkloadParams,
};
pub use render::{render_sql, RenderError, MAX_EXPANSION_BRANCHES};
