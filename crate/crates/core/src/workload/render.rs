//! Turns a query ast into SQL for a concrete dialect.
//!
//! When the dialect lacks native `CUBE`/`ROLLUP`, the grouping operator is
//! expanded into the equivalent `UNION ALL` of plain `GROUP BY` blocks: one
//! branch per grouping set, with attributes outside the branch's set padded
//! by `NULL` literals so every branch stays union-compatible and the result
//! matches the native operator row for row (the all-null padding plays the
//! role of the super-aggregate markers).

use super::ast::{Grouping, Operand, QueryAst};
use crate::dialect::DialectDescriptor;
use thiserror::Error;

/// Ceiling on `UNION ALL` branches an expansion may produce. A CUBE over k
/// attributes needs 2^k branches; beyond this the statement would dwarf any
/// realistic engine limit, so rendering refuses instead.
pub const MAX_EXPANSION_BRANCHES: usize = 4096;

/// Rendering failures.
#[derive(Debug, Error)]
pub enum RenderError {
    #[error(
        "dialect {dialect} lacks native {construct} and its expansion needs \
         {branches} branches (cap {MAX_EXPANSION_BRANCHES})"
    )]
    TooManyBranches {
        dialect: String,
        construct: &'static str,
        branches: usize,
    },
}

fn quote_str(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn qualified(dialect: &DialectDescriptor, table: &str, attr: &str) -> String {
    format!("{}.{}", dialect.quote(table), dialect.quote(attr))
}

/// Renders the SELECT list. `mask[i] = false` replaces selected attribute
/// `i` with a NULL literal (used by expansion branches).
fn select_list(q: &QueryAst, dialect: &DialectDescriptor, mask: Option<&[bool]>) -> String {
    let mut items = Vec::with_capacity(q.select_attrs.len() + q.aggregates.len());
    for (i, attr) in q.select_attrs.iter().enumerate() {
        let included = mask.is_none_or(|m| m[i]);
        if included {
            items.push(qualified(dialect, &attr.table, &attr.attr));
        } else {
            items.push("NULL".to_string());
        }
    }
    for agg in &q.aggregates {
        items.push(format!(
            "SUM({}) AS {}",
            qualified(dialect, &agg.measure.table, &agg.measure.attr),
            dialect.quote(&agg.alias)
        ));
    }
    items.join(", ")
}

fn where_clause(q: &QueryAst, dialect: &DialectDescriptor) -> Option<String> {
    let mut conds = Vec::with_capacity(q.joins.len() + q.restrictions.len());
    for join in &q.joins {
        conds.push(format!(
            "{} = {}",
            qualified(dialect, &join.left.table, &join.left.attr),
            qualified(dialect, &join.right.table, &join.right.attr)
        ));
    }
    for r in &q.restrictions {
        let operand = match &r.operand {
            Operand::Str(s) => quote_str(s),
            Operand::Num(n) => n.to_string(),
        };
        conds.push(format!(
            "{} {} {operand}",
            qualified(dialect, &r.attr.table, &r.attr.attr),
            r.op.symbol()
        ));
    }
    (!conds.is_empty()).then(|| conds.join(" AND "))
}

fn having_clause(q: &QueryAst, dialect: &DialectDescriptor) -> Option<String> {
    q.having.as_ref().map(|h| {
        let agg = &q.aggregates[h.aggregate];
        let reference = if dialect.supports_having_alias {
            dialect.quote(&agg.alias)
        } else {
            format!(
                "SUM({})",
                qualified(dialect, &agg.measure.table, &agg.measure.attr)
            )
        };
        format!("{reference} {} {}", h.op.symbol(), h.threshold)
    })
}

/// Renders one plain `SELECT` block grouping by the masked attributes; a
/// fully masked-out grouping renders no `GROUP BY` (the grand total row).
fn render_branch(q: &QueryAst, dialect: &DialectDescriptor, mask: &[bool]) -> String {
    let mut sql = format!("SELECT {}", select_list(q, dialect, Some(mask)));
    sql.push_str(&from_where(q, dialect));
    let grouped: Vec<String> = q
        .select_attrs
        .iter()
        .zip(mask)
        .filter(|&(_, &keep)| keep)
        .map(|(a, _)| qualified(dialect, &a.table, &a.attr))
        .collect();
    if !grouped.is_empty() {
        sql.push_str(" GROUP BY ");
        sql.push_str(&grouped.join(", "));
    }
    if let Some(having) = having_clause(q, dialect) {
        sql.push_str(" HAVING ");
        sql.push_str(&having);
    }
    sql
}

fn from_where(q: &QueryAst, dialect: &DialectDescriptor) -> String {
    let tables: Vec<String> = q.tables.iter().map(|t| dialect.quote(t)).collect();
    let mut sql = format!(" FROM {}", tables.join(", "));
    if let Some(w) = where_clause(q, dialect) {
        sql.push_str(" WHERE ");
        sql.push_str(&w);
    }
    sql
}

/// Renders `q` as a single SQL statement (no trailing terminator).
pub fn render_sql(q: &QueryAst, dialect: &DialectDescriptor) -> Result<String, RenderError> {
    debug_assert!(q.validate().is_ok());
    let k = q.grouping.attrs().len();
    let native = match &q.grouping {
        Grouping::None | Grouping::Plain(_) => true,
        Grouping::Cube(_) => dialect.supports_cube,
        Grouping::Rollup(_) => dialect.supports_rollup,
    };

    if !native {
        // Expand the grouping operator into a union of plain groupings.
        let (construct, branches) = match &q.grouping {
            Grouping::Cube(_) => ("CUBE", 1usize.checked_shl(k as u32).unwrap_or(usize::MAX)),
            Grouping::Rollup(_) => ("ROLLUP", k + 1),
            _ => unreachable!("plain groupings are always native"),
        };
        if branches > MAX_EXPANSION_BRANCHES {
            return Err(RenderError::TooManyBranches {
                dialect: dialect.name.clone(),
                construct,
                branches,
            });
        }
        let masks: Vec<Vec<bool>> = match &q.grouping {
            Grouping::Cube(_) => (0..branches)
                .map(|b| {
                    let m = branches - 1 - b;
                    (0..k).map(|i| m & (1 << (k - 1 - i)) != 0).collect()
                })
                .collect(),
            Grouping::Rollup(_) => (0..branches)
                .map(|b| (0..k).map(|i| i < k - b).collect())
                .collect(),
            _ => unreachable!(),
        };
        let blocks: Vec<String> = masks
            .iter()
            .map(|mask| render_branch(q, dialect, mask))
            .collect();
        return Ok(blocks.join(" UNION ALL "));
    }

    let mut sql = format!("SELECT {}", select_list(q, dialect, None));
    sql.push_str(&from_where(q, dialect));
    match &q.grouping {
        Grouping::None => {}
        Grouping::Plain(attrs) | Grouping::Cube(attrs) | Grouping::Rollup(attrs) => {
            let list: Vec<String> = attrs
                .iter()
                .map(|a| qualified(dialect, &a.table, &a.attr))
                .collect();
            let clause = match &q.grouping {
                Grouping::Plain(_) => format!(" GROUP BY {}", list.join(", ")),
                Grouping::Cube(_) => format!(" GROUP BY CUBE({})", list.join(", ")),
                Grouping::Rollup(_) => format!(" GROUP BY ROLLUP({})", list.join(", ")),
                Grouping::None => unreachable!(),
            };
            sql.push_str(&clause);
        }
    }
    if let Some(having) = having_clause(q, dialect) {
        sql.push_str(" HAVING ");
        sql.push_str(&having);
    }
    Ok(sql)
}
