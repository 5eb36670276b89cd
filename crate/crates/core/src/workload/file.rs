//! Workload file format: saving and loading generated query sets.
//!
//! A workload file is self-describing plain text: a header recording the
//! seed and the shape parameters, then each query as a one-line comment
//! (ordinal, kind, drill depth) followed by its SQL on a single line,
//! terminated by `;`. SQL in the file is always the standard rendering
//! (native CUBE/ROLLUP, aliases in HAVING); executors re-render per target
//! dialect after loading, which is why the file is parsed back into the
//! structured form rather than replayed as text.
//!
//! The parser accepts exactly the canonical rendering. That keeps it an
//! inverse of the writer (load of a save is identity) while still reading
//! hand-tuned files that follow the same conventions; anything else fails
//! with the offending line number.

use super::ast::{
    Aggregate, CmpOp, Grouping, Having, JoinCond, Operand, QualifiedAttr, QueryAst, QueryKind,
    Restriction,
};
use super::gen::{Workload, WorkloadParams};
use super::render::render_sql;
use crate::dialect::DialectDescriptor;
use std::path::Path;
use thiserror::Error;

/// A defect in a workload file, located by line (0 for file-level issues).
#[derive(Debug, Error)]
#[error("workload file {origin}:{line}: {message}")]
pub struct WorkloadFileError {
    pub origin: String,
    pub line: usize,
    pub message: String,
}

fn fail(origin: &str, line: usize, message: impl Into<String>) -> WorkloadFileError {
    WorkloadFileError {
        origin: origin.to_string(),
        line,
        message: message.into(),
    }
}

/// Renders a workload to its file text.
pub fn render_workload(workload: &Workload) -> String {
    let dialect = DialectDescriptor::sql99();
    let p = &workload.params;
    let mut out = String::new();
    out.push_str(&format!("# SEED={}\n", workload.seed));
    let params: [(&str, String); 8] = [
        ("NB_Q", p.nb_q.to_string()),
        ("Q_AVG_NB_ATT", p.q_avg_nb_att.to_string()),
        ("AVG_NB_RESTR", p.avg_nb_restr.to_string()),
        ("PROB_OLAP", p.prob_olap.to_string()),
        ("AVG_NB_AGGREG", p.avg_nb_aggreg.to_string()),
        ("PROB_CUBE", p.prob_cube.to_string()),
        ("PROB_HAVING", p.prob_having.to_string()),
        ("AVG_NB_DD", p.avg_nb_dd.to_string()),
    ];
    for (key, value) in params {
        out.push_str(&format!("# PARAM {key}={value}\n"));
    }
    for (i, query) in workload.queries.iter().enumerate() {
        out.push_str(&format!(
            "-- QUERY {} kind={} depth={}\n",
            i + 1,
            query.kind,
            query.drill_depth
        ));
        let sql =
            render_sql(query, &dialect).expect("standard rendering never needs grouping expansion");
        out.push_str(&sql);
        out.push_str(";\n");
    }
    out
}

/// Writes a workload file.
pub fn save_workload(workload: &Workload, path: impl AsRef<Path>) -> Result<(), WorkloadFileError> {
    let path = path.as_ref();
    std::fs::write(path, render_workload(workload))
        .map_err(|e| fail(&path.display().to_string(), 0, e.to_string()))
}

/// Reads a workload file back into its structured form.
pub fn load_workload(path: impl AsRef<Path>) -> Result<Workload, WorkloadFileError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| fail(&origin, 0, e.to_string()))?;
    parse_workload(&text, &origin)
}

/// Parses workload file text; `origin` labels error locations.
pub fn parse_workload(text: &str, origin: &str) -> Result<Workload, WorkloadFileError> {
    let mut seed: Option<u64> = None;
    let mut params = WorkloadParams::default();
    let mut queries: Vec<QueryAst> = Vec::new();
    let mut pending: Option<(usize, QueryKind, u32)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# SEED=") {
            seed = Some(rest.trim().parse().map_err(|_| {
                fail(
                    origin,
                    line_no,
                    format!("SEED must be an integer, got {rest}"),
                )
            })?);
        } else if let Some(rest) = line.strip_prefix("# PARAM ") {
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| fail(origin, line_no, "PARAM lines read KEY=VALUE"))?;
            apply_param(&mut params, key.trim(), value.trim())
                .map_err(|message| fail(origin, line_no, message))?;
        } else if let Some(rest) = line.strip_prefix("-- QUERY ") {
            if pending.is_some() {
                return Err(fail(origin, line_no, "query header without SQL before it"));
            }
            let header =
                parse_query_header(rest).map_err(|message| fail(origin, line_no, message))?;
            if header.0 != queries.len() + 1 {
                return Err(fail(
                    origin,
                    line_no,
                    format!(
                        "query numbered {} but {} queries precede it",
                        header.0,
                        queries.len()
                    ),
                ));
            }
            pending = Some(header);
        } else if let Some((_, kind, depth)) = pending.take() {
            let query = parse_statement(line, kind, depth)
                .map_err(|message| fail(origin, line_no, message))?;
            query
                .validate()
                .map_err(|e| fail(origin, line_no, e.to_string()))?;
            queries.push(query);
        } else {
            return Err(fail(origin, line_no, format!("unexpected line: {line}")));
        }
    }

    if pending.is_some() {
        return Err(fail(
            origin,
            0,
            "file ends inside a query (header without SQL)",
        ));
    }
    let seed = seed.ok_or_else(|| fail(origin, 0, "missing # SEED= header"))?;
    Ok(Workload {
        seed,
        params,
        queries,
    })
}

fn apply_param(params: &mut WorkloadParams, key: &str, value: &str) -> Result<(), String> {
    fn float(key: &str, value: &str) -> Result<f64, String> {
        value
            .parse()
            .map_err(|_| format!("{key} must be a number, got {value}"))
    }
    match key {
        "NB_Q" => {
            params.nb_q = value
                .parse()
                .map_err(|_| format!("NB_Q must be a positive integer, got {value}"))?;
        }
        "Q_AVG_NB_ATT" => params.q_avg_nb_att = float(key, value)?,
        "AVG_NB_RESTR" => params.avg_nb_restr = float(key, value)?,
        "PROB_OLAP" => params.prob_olap = float(key, value)?,
        "AVG_NB_AGGREG" => params.avg_nb_aggreg = float(key, value)?,
        "PROB_CUBE" => params.prob_cube = float(key, value)?,
        "PROB_HAVING" => params.prob_having = float(key, value)?,
        "AVG_NB_DD" => params.avg_nb_dd = float(key, value)?,
        other => return Err(format!("unknown parameter {other}")),
    }
    Ok(())
}

/// Parses `N kind=K depth=D` from a query header.
fn parse_query_header(rest: &str) -> Result<(usize, QueryKind, u32), String> {
    let mut parts = rest.split_whitespace();
    let number: usize = parts
        .next()
        .and_then(|n| n.parse().ok())
        .ok_or("query header needs an ordinal")?;
    let kind = match parts.next() {
        Some("kind=OLAP") => QueryKind::Olap,
        Some("kind=EXTRACTION") => QueryKind::Extraction,
        other => return Err(format!("bad kind field {other:?}")),
    };
    let depth: u32 = parts
        .next()
        .and_then(|d| d.strip_prefix("depth="))
        .and_then(|d| d.parse().ok())
        .ok_or("bad depth field")?;
    if parts.next().is_some() {
        return Err("trailing tokens after depth".to_string());
    }
    Ok((number, kind, depth))
}

fn is_ident(s: &str) -> bool {
    let mut bytes = s.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_alphabetic() || b == b'_' => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn parse_qualified(s: &str) -> Result<QualifiedAttr, String> {
    let (table, attr) = s
        .split_once('.')
        .ok_or_else(|| format!("expected TABLE.ATTRIBUTE, got {s}"))?;
    if !is_ident(table) || !is_ident(attr) {
        return Err(format!("expected TABLE.ATTRIBUTE, got {s}"));
    }
    Ok(QualifiedAttr::new(table, attr))
}

/// Finds the leftmost comparison operator in a condition, longest match
/// winning at equal positions.
fn find_op(s: &str) -> Option<(usize, CmpOp)> {
    const OPS: [(&str, CmpOp); 6] = [
        (" <> ", CmpOp::Ne),
        (" <= ", CmpOp::Le),
        (" >= ", CmpOp::Ge),
        (" = ", CmpOp::Eq),
        (" < ", CmpOp::Lt),
        (" > ", CmpOp::Gt),
    ];
    let mut best: Option<(usize, usize, CmpOp)> = None;
    for (text, op) in OPS {
        if let Some(pos) = s.find(text) {
            let better = match best {
                None => true,
                Some((bp, bl, _)) => pos < bp || (pos == bp && text.len() > bl),
            };
            if better {
                best = Some((pos, text.len(), op));
            }
        }
    }
    best.map(|(pos, _, op)| (pos, op))
}

fn op_text_len(op: CmpOp) -> usize {
    op.symbol().len() + 2
}

/// Parses one canonical SQL statement into a query.
///
/// Only the writer's rendering is understood: comma-separated FROM,
/// `AND`-chained conditions, a single optional GROUP BY (plain or with one
/// grouping operator), and a HAVING over an alias or a `SUM(...)`
/// expression. Generated values never contain the clause keywords, so
/// plain substring segmentation is sound here.
fn parse_statement(line: &str, kind: QueryKind, depth: u32) -> Result<QueryAst, String> {
    let sql = line.strip_suffix(';').ok_or("SQL line must end with ';'")?;
    let body = sql
        .strip_prefix("SELECT ")
        .ok_or("statement must start with SELECT")?;
    let (select_part, mut rest) = body
        .split_once(" FROM ")
        .ok_or("statement has no FROM clause")?;

    let having_part = match rest.find(" HAVING ") {
        Some(i) => {
            let h = &rest[i + " HAVING ".len()..];
            rest = &rest[..i];
            Some(h)
        }
        None => None,
    };
    let group_part = match rest.find(" GROUP BY ") {
        Some(i) => {
            let g = &rest[i + " GROUP BY ".len()..];
            rest = &rest[..i];
            Some(g)
        }
        None => None,
    };
    let where_part = match rest.find(" WHERE ") {
        Some(i) => {
            let w = &rest[i + " WHERE ".len()..];
            rest = &rest[..i];
            Some(w)
        }
        None => None,
    };
    let from_part = rest;

    let mut select_attrs = Vec::new();
    let mut aggregates = Vec::new();
    for item in select_part.split(", ") {
        if let Some(inner) = item.strip_prefix("SUM(") {
            let (measure, alias) = inner
                .split_once(") AS ")
                .ok_or_else(|| format!("malformed aggregate {item}"))?;
            if !is_ident(alias) {
                return Err(format!("malformed aggregate alias {alias}"));
            }
            aggregates.push(Aggregate {
                measure: parse_qualified(measure)?,
                alias: alias.to_string(),
            });
        } else {
            if !aggregates.is_empty() {
                return Err("detail attributes must precede aggregates".to_string());
            }
            select_attrs.push(parse_qualified(item)?);
        }
    }

    let mut tables = Vec::new();
    for table in from_part.split(", ") {
        if !is_ident(table) {
            return Err(format!("bad table name {table}"));
        }
        tables.push(table.to_string());
    }

    let mut joins = Vec::new();
    let mut restrictions = Vec::new();
    if let Some(conds) = where_part {
        for cond in conds.split(" AND ") {
            let (pos, op) = find_op(cond).ok_or_else(|| format!("no operator in {cond}"))?;
            let lhs = parse_qualified(&cond[..pos])?;
            let rhs = &cond[pos + op_text_len(op)..];
            if let Some(inner) = rhs.strip_prefix('\'') {
                let inner = inner
                    .strip_suffix('\'')
                    .ok_or_else(|| format!("unterminated string in {cond}"))?;
                restrictions.push(Restriction {
                    attr: lhs,
                    op,
                    operand: Operand::Str(inner.replace("''", "'")),
                });
            } else if let Ok(num) = rhs.parse::<f64>() {
                restrictions.push(Restriction {
                    attr: lhs,
                    op,
                    operand: Operand::Num(num),
                });
            } else {
                let rhs = parse_qualified(rhs)?;
                if op != CmpOp::Eq {
                    return Err(format!("join conditions must use =, got {}", op.symbol()));
                }
                joins.push(JoinCond {
                    left: lhs,
                    right: rhs,
                });
            }
        }
    }

    let grouping = match group_part {
        None => Grouping::None,
        Some(g) => {
            let attr_list = |inner: &str| -> Result<Vec<QualifiedAttr>, String> {
                inner.split(", ").map(parse_qualified).collect()
            };
            if let Some(inner) = g.strip_prefix("CUBE(").and_then(|s| s.strip_suffix(')')) {
                Grouping::Cube(attr_list(inner)?)
            } else if let Some(inner) = g.strip_prefix("ROLLUP(").and_then(|s| s.strip_suffix(')'))
            {
                Grouping::Rollup(attr_list(inner)?)
            } else {
                Grouping::Plain(attr_list(g)?)
            }
        }
    };

    let having = match having_part {
        None => None,
        Some(h) => {
            let (pos, op) = find_op(h).ok_or_else(|| format!("no operator in HAVING {h}"))?;
            let reference = &h[..pos];
            let threshold: f64 = h[pos + op_text_len(op)..]
                .parse()
                .map_err(|_| format!("HAVING threshold must be a number in {h}"))?;
            let aggregate = if let Some(measure) = reference
                .strip_prefix("SUM(")
                .and_then(|s| s.strip_suffix(')'))
            {
                let measure = parse_qualified(measure)?;
                aggregates
                    .iter()
                    .position(|a| a.measure == measure)
                    .ok_or_else(|| format!("HAVING references unselected aggregate {reference}"))?
            } else {
                aggregates
                    .iter()
                    .position(|a| a.alias == reference)
                    .ok_or_else(|| format!("HAVING references unknown alias {reference}"))?
            };
            Some(Having {
                aggregate,
                op,
                threshold,
            })
        }
    };

    Ok(QueryAst {
        kind,
        drill_depth: depth,
        select_attrs,
        aggregates,
        tables,
        joins,
        restrictions,
        grouping,
        having,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_low_level, HighLevelParams};
    use crate::rng::{
        SeededRng, StringReferential, PURPOSE_PARAMS, PURPOSE_SCHEMA, PURPOSE_WORKLOAD,
    };
    use crate::schema::build_schema;
    use crate::workload::gen::generate_workload;

    fn default_workload(seed: u64) -> Workload {
        let high = HighLevelParams {
            sigma_ratio: 0.0,
            ..HighLevelParams::default()
        };
        let low = derive_low_level(&high, &mut SeededRng::new(1, PURPOSE_PARAMS, 0.0)).unwrap();
        let schema = build_schema(&low, &mut SeededRng::new(42, PURPOSE_SCHEMA, 0.0)).unwrap();
        let referential = StringReferential::new(seed);
        generate_workload(
            &WorkloadParams::default(),
            &schema,
            &mut SeededRng::new(seed, PURPOSE_WORKLOAD, 0.2),
            &referential,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn header_renders_seed_and_every_parameter() {
        let w = default_workload(42);
        let text = render_workload(&w);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# SEED=42"));
        assert_eq!(lines.next(), Some("# PARAM NB_Q=100"));
        assert_eq!(lines.next(), Some("# PARAM Q_AVG_NB_ATT=5"));
        assert_eq!(lines.next(), Some("# PARAM AVG_NB_RESTR=3"));
        assert_eq!(lines.next(), Some("# PARAM PROB_OLAP=0.9"));
        assert_eq!(lines.next(), Some("# PARAM AVG_NB_AGGREG=3"));
        assert_eq!(lines.next(), Some("# PARAM PROB_CUBE=0.3"));
        assert_eq!(lines.next(), Some("# PARAM PROB_HAVING=0.2"));
        assert_eq!(lines.next(), Some("# PARAM AVG_NB_DD=3"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("-- QUERY 1 kind="));
    }

    #[test]
    fn save_then_load_is_identity() {
        for seed in [0u64, 1, 7, 42, 99] {
            let w = default_workload(seed);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("workload.sql");
            save_workload(&w, &path).unwrap();
            let loaded = load_workload(&path).unwrap();
            assert_eq!(loaded, w, "round trip broke for seed {seed}");
        }
    }

    #[test]
    fn loaded_queries_carry_kind_and_depth() {
        let w = default_workload(3);
        let text = render_workload(&w);
        let loaded = parse_workload(&text, "test").unwrap();
        assert!(loaded.queries.iter().any(|q| q.drill_depth > 0));
        for (a, b) in w.queries.iter().zip(&loaded.queries) {
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.drill_depth, b.drill_depth);
        }
    }

    #[test]
    fn missing_seed_is_a_file_level_error() {
        let err = parse_workload("# PARAM NB_Q=5\n", "test").unwrap_err();
        assert_eq!(err.line, 0);
        assert!(err.message.contains("SEED"));
    }

    #[test]
    fn defects_are_reported_with_their_line() {
        let text = "# SEED=1\n# PARAM NB_KYU=5\n";
        let err = parse_workload(text, "test").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("NB_KYU"));

        let text = "# SEED=1\n-- QUERY 2 kind=OLAP depth=0\nSELECT A.B FROM A;\n";
        let err = parse_workload(text, "test").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("numbered 2"));

        let text = "# SEED=1\n-- QUERY 1 kind=OLAP depth=0\nSELECT A.B FROM A\n";
        let err = parse_workload(text, "test").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains(";"));

        // OLAP header over an aggregate-free statement breaks an invariant.
        let text = "# SEED=1\n-- QUERY 1 kind=OLAP depth=0\nSELECT A.B FROM A;\n";
        let err = parse_workload(text, "test").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("aggregate"));
    }

    #[test]
    fn hand_written_statements_parse_into_the_model() {
        let text = "# SEED=9\n\
                    -- QUERY 1 kind=OLAP depth=0\n\
                    SELECT D.X, SUM(F.M) AS AGG1 FROM F, D \
                    WHERE F.D_FK = D.D_PK AND D.X = 'X_ABC' AND F.M >= 10 \
                    GROUP BY ROLLUP(D.X) HAVING AGG1 >= 5;\n";
        let w = parse_workload(text, "test").unwrap();
        let q = &w.queries[0];
        assert_eq!(q.select_attrs, vec![QualifiedAttr::new("D", "X")]);
        assert_eq!(q.joins.len(), 1);
        assert_eq!(q.restrictions.len(), 2);
        assert_eq!(q.restrictions[1].op, CmpOp::Ge);
        assert_eq!(q.restrictions[1].operand, Operand::Num(10.0));
        assert!(matches!(q.grouping, Grouping::Rollup(_)));
        let h = q.having.as_ref().unwrap();
        assert_eq!(h.aggregate, 0);
        assert_eq!(h.threshold, 5.0);
    }
}
