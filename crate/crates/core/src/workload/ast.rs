//! Structured model of a generated decision-support query.
//!
//! Queries are kept as data, not SQL text: the renderer turns an ast into
//! a concrete dialect's SQL on demand, so one workload file can drive
//! engines with different grouping-operator support. The model covers
//! exactly what the generator produces: a star join from one fact table
//! through dimension hierarchies, equality restrictions on member values,
//! `SUM` aggregates, an optional CUBE/ROLLUP/plain grouping over the
//! selected attributes, and an optional `HAVING` on one aggregate.

use std::fmt;
use thiserror::Error;

/// A column reference qualified by its table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualifiedAttr {
    pub table: String,
    pub attr: String,
}

impl QualifiedAttr {
    pub fn new(table: impl Into<String>, attr: impl Into<String>) -> Self {
        QualifiedAttr {
            table: table.into(),
            attr: attr.into(),
        }
    }
}

impl fmt::Display for QualifiedAttr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.attr)
    }
}

/// Comparison operator in a restriction or `HAVING` clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Right-hand side of a restriction.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Str(String),
    Num(f64),
}

/// A predicate over one attribute, `attr op operand`.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub attr: QualifiedAttr,
    pub op: CmpOp,
    pub operand: Operand,
}

/// An equi-join condition `left = right` between two tables' key columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinCond {
    pub left: QualifiedAttr,
    pub right: QualifiedAttr,
}

/// A `SUM` aggregate over a fact measure, with its select-list alias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregate {
    pub measure: QualifiedAttr,
    pub alias: String,
}

/// The grouping clause shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Grouping {
    /// No `GROUP BY` at all (extraction queries).
    None,
    Plain(Vec<QualifiedAttr>),
    Cube(Vec<QualifiedAttr>),
    Rollup(Vec<QualifiedAttr>),
}

impl Grouping {
    /// The grouped attributes, empty for `None`.
    pub fn attrs(&self) -> &[QualifiedAttr] {
        match self {
            Grouping::None => &[],
            Grouping::Plain(a) | Grouping::Cube(a) | Grouping::Rollup(a) => a,
        }
    }

    /// Mutable grouped attributes; `None` for the ungrouped shape.
    pub fn attrs_mut(&mut self) -> Option<&mut Vec<QualifiedAttr>> {
        match self {
            Grouping::None => None,
            Grouping::Plain(a) | Grouping::Cube(a) | Grouping::Rollup(a) => Some(a),
        }
    }
}

/// A `HAVING` filter over one aggregate (by index into `aggregates`).
#[derive(Debug, Clone, PartialEq)]
pub struct Having {
    pub aggregate: usize,
    pub op: CmpOp,
    pub threshold: f64,
}

/// Query family: aggregation-oriented OLAP or plain detail extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Olap,
    Extraction,
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryKind::Olap => write!(f, "OLAP"),
            QueryKind::Extraction => write!(f, "EXTRACTION"),
        }
    }
}

/// One generated query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub kind: QueryKind,
    /// How many drill-down steps away from its initial query this variant
    /// is; 0 for initial queries.
    pub drill_depth: u32,
    pub select_attrs: Vec<QualifiedAttr>,
    pub aggregates: Vec<Aggregate>,
    /// Tables of the `FROM` clause; the fact table first, then hierarchy
    /// levels in the order their joins were added.
    pub tables: Vec<String>,
    pub joins: Vec<JoinCond>,
    pub restrictions: Vec<Restriction>,
    pub grouping: Grouping,
    pub having: Option<Having>,
}

/// Structural defects in a query.
#[derive(Debug, Error)]
pub enum AstError {
    #[error("query selects no attributes")]
    EmptySelect,
    #[error("table {0} appears twice in FROM")]
    DuplicateTable(String),
    #[error("{0} references table {1} which is not in FROM")]
    UnknownTable(&'static str, String),
    #[error("an extraction query cannot carry {0}")]
    ExtractionWith(&'static str),
    #[error("an OLAP query needs at least one aggregate")]
    OlapWithoutAggregates,
    #[error("grouping list must equal the selected attributes")]
    GroupingMismatch,
    #[error("HAVING references aggregate {got}, but only {count} exist")]
    HavingOutOfRange { got: usize, count: usize },
}

impl QueryAst {
    /// Checks the invariants every generated query satisfies; loaded files
    /// go through the same gate so hand-edited workloads fail loudly.
    pub fn validate(&self) -> Result<(), AstError> {
        if self.select_attrs.is_empty() {
            return Err(AstError::EmptySelect);
        }
        for (i, t) in self.tables.iter().enumerate() {
            if self.tables[..i].contains(t) {
                return Err(AstError::DuplicateTable(t.clone()));
            }
        }
        let known = |a: &QualifiedAttr| self.tables.contains(&a.table);
        for a in &self.select_attrs {
            if !known(a) {
                return Err(AstError::UnknownTable(
                    "a selected attribute",
                    a.table.clone(),
                ));
            }
        }
        for j in &self.joins {
            if !known(&j.left) || !known(&j.right) {
                let t = if known(&j.left) {
                    j.right.table.clone()
                } else {
                    j.left.table.clone()
                };
                return Err(AstError::UnknownTable("a join condition", t));
            }
        }
        for r in &self.restrictions {
            if !known(&r.attr) {
                return Err(AstError::UnknownTable(
                    "a restriction",
                    r.attr.table.clone(),
                ));
            }
        }
        for a in &self.aggregates {
            if !known(&a.measure) {
                return Err(AstError::UnknownTable(
                    "an aggregate",
                    a.measure.table.clone(),
                ));
            }
        }
        match self.kind {
            QueryKind::Extraction => {
                if !self.aggregates.is_empty() {
                    return Err(AstError::ExtractionWith("aggregates"));
                }
                if self.grouping != Grouping::None {
                    return Err(AstError::ExtractionWith("a GROUP BY clause"));
                }
                if self.having.is_some() {
                    return Err(AstError::ExtractionWith("a HAVING clause"));
                }
            }
            QueryKind::Olap => {
                if self.aggregates.is_empty() {
                    return Err(AstError::OlapWithoutAggregates);
                }
            }
        }
        if self.grouping != Grouping::None && self.grouping.attrs() != self.select_attrs {
            return Err(AstError::GroupingMismatch);
        }
        if let Some(h) = &self.having {
            if h.aggregate >= self.aggregates.len() {
                return Err(AstError::HavingOutOfRange {
                    got: h.aggregate,
                    count: self.aggregates.len(),
                });
            }
        }
        Ok(())
    }
}
