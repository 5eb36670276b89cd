//! Workload generation: initial queries and their drill-down variants.

use super::ast::{
    Aggregate, CmpOp, Grouping, Having, JoinCond, Operand, QualifiedAttr, QueryAst, QueryKind,
    Restriction,
};
use crate::naming;
use crate::rng::{SeededRng, StringReferential};
use crate::schema::WarehouseSchema;
use thiserror::Error;

/// Workload shape parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadParams {
    /// Total number of queries, drill-down variants included.
    pub nb_q: usize,
    /// Average number of selected (detail) attributes per query.
    pub q_avg_nb_att: f64,
    /// Average number of restrictions per query.
    pub avg_nb_restr: f64,
    /// Probability that a query aggregates (OLAP) rather than extracts.
    pub prob_olap: f64,
    /// Average number of aggregates in an OLAP query.
    pub avg_nb_aggreg: f64,
    /// Probability that an OLAP query groups with CUBE instead of ROLLUP.
    pub prob_cube: f64,
    /// Probability that an OLAP query carries a HAVING filter.
    pub prob_having: f64,
    /// Average number of drill-down variants derived from each initial
    /// query.
    pub avg_nb_dd: f64,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        WorkloadParams {
            nb_q: 100,
            q_avg_nb_att: 5.0,
            avg_nb_restr: 3.0,
            prob_olap: 0.9,
            avg_nb_aggreg: 3.0,
            prob_cube: 0.3,
            prob_having: 0.2,
            avg_nb_dd: 3.0,
        }
    }
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<(), WorkloadParamError> {
        if self.nb_q == 0 {
            return Err(WorkloadParamError {
                name: "NB_Q",
                message: "must be at least 1".to_string(),
            });
        }
        let averages = [
            ("Q_AVG_NB_ATT", self.q_avg_nb_att),
            ("AVG_NB_RESTR", self.avg_nb_restr),
            ("AVG_NB_AGGREG", self.avg_nb_aggreg),
            ("AVG_NB_DD", self.avg_nb_dd),
        ];
        for (name, v) in averages {
            if !(v.is_finite() && v > 0.0) {
                return Err(WorkloadParamError {
                    name,
                    message: format!("must be a finite positive number, got {v}"),
                });
            }
        }
        let probabilities = [
            ("PROB_OLAP", self.prob_olap),
            ("PROB_CUBE", self.prob_cube),
            ("PROB_HAVING", self.prob_having),
        ];
        for (name, p) in probabilities {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(WorkloadParamError {
                    name,
                    message: format!("must be in [0, 1], got {p}"),
                });
            }
        }
        Ok(())
    }
}

/// A workload parameter outside its domain.
#[derive(Debug, Error)]
#[error("{name} {message}")]
pub struct WorkloadParamError {
    pub name: &'static str,
    pub message: String,
}

/// A generated workload with the inputs that reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub seed: u64,
    pub params: WorkloadParams,
    pub queries: Vec<QueryAst>,
}

/// Where the last attribute pick of an initial query landed; drill-downs
/// descend from here toward level 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrillCursor {
    /// 0-based dimension ordinal.
    pub dim: usize,
    /// 1-based hierarchy level of the last picked attribute.
    pub level: usize,
}

/// Builds one initial query and reports the drill cursor it ends on.
///
/// Attribute picks are skewed (bell curve) over the fact table's
/// dimensions, a uniform hierarchy level per pick, and a skewed member
/// within the level; each pick joins the fact table through every level up
/// to the picked one. Restrictions equate selected attributes with values
/// from the string referential. A query turns OLAP with probability
/// `prob_olap`, gaining `SUM` aggregates over skew-picked measures, a CUBE
/// (probability `prob_cube`) or ROLLUP grouping over the selected
/// attributes, and possibly a `HAVING` on one aggregate.
pub fn build_initial_query(
    params: &WorkloadParams,
    schema: &WarehouseSchema,
    rng: &mut SeededRng,
    referential: &StringReferential,
) -> (QueryAst, DrillCursor) {
    let fact = &schema.fact_tables[rng.gauss_index(schema.fact_tables.len())];
    let mut tables = vec![fact.table_name.clone()];
    let mut joins: Vec<JoinCond> = Vec::new();
    let mut select_attrs: Vec<QualifiedAttr> = Vec::new();
    // The fact table always references at least one dimension, so at least
    // one pick happens and the cursor is always set.
    let mut cursor = DrillCursor { dim: 0, level: 1 };

    let nb_att = rng.gauss_int(params.q_avg_nb_att);
    for _ in 0..nb_att {
        let slot = rng.gauss_index(fact.dim_refs.len());
        let dim = &schema.dimensions[fact.dim_refs[slot]];
        let level_no = rng.uniform_int(1, dim.depth() as u64) as usize;

        // Join the fact table to the picked level through the chain of
        // finer levels, reusing any hop already present.
        let mut from_table = fact.table_name.clone();
        for j in 1..=level_no {
            let level = dim.level(j);
            let cond = JoinCond {
                left: QualifiedAttr::new(&from_table, naming::foreign_key(&level.table_name)),
                right: QualifiedAttr::new(&level.table_name, &level.primary_key),
            };
            if !tables.contains(&level.table_name) {
                tables.push(level.table_name.clone());
            }
            if !joins.contains(&cond) {
                joins.push(cond);
            }
            from_table = level.table_name.clone();
        }

        let level = dim.level(level_no);
        let member = &level.members[rng.gauss_index(level.members.len())];
        let attr = QualifiedAttr::new(&level.table_name, member);
        if !select_attrs.contains(&attr) {
            select_attrs.push(attr);
        }
        cursor = DrillCursor {
            dim: dim.index,
            level: level_no,
        };
    }

    let nb_restr = rng.gauss_int(params.avg_nb_restr);
    let mut restrictions = Vec::with_capacity(nb_restr as usize);
    for _ in 0..nb_restr {
        let attr = select_attrs[rng.gauss_index(select_attrs.len())].clone();
        let value = referential.random_string(rng, &attr.attr);
        restrictions.push(Restriction {
            attr,
            op: CmpOp::Eq,
            operand: Operand::Str(value),
        });
    }

    let mut query = QueryAst {
        kind: QueryKind::Extraction,
        drill_depth: 0,
        select_attrs,
        aggregates: Vec::new(),
        tables,
        joins,
        restrictions,
        grouping: Grouping::None,
        having: None,
    };

    if rng.bernoulli(params.prob_olap) {
        query.kind = QueryKind::Olap;
        let nb_aggreg = rng.gauss_int(params.avg_nb_aggreg);
        for k in 1..=nb_aggreg {
            let measure = &fact.measures[rng.gauss_index(fact.measures.len())];
            query.aggregates.push(Aggregate {
                measure: QualifiedAttr::new(&fact.table_name, measure),
                alias: format!("AGG{k}"),
            });
        }
        query.grouping = if rng.bernoulli(params.prob_cube) {
            Grouping::Cube(query.select_attrs.clone())
        } else {
            Grouping::Rollup(query.select_attrs.clone())
        };
        if rng.bernoulli(params.prob_having) {
            query.having = Some(Having {
                aggregate: rng.gauss_index(query.aggregates.len()),
                op: CmpOp::Ge,
                threshold: rng.uniform_float(0.0, 100.0),
            });
        }
    }

    (query, cursor)
}

/// Derives drill-down variants of `initial`.
///
/// Each step clones the previous query and adds one not-yet-selected member
/// attribute from the next finer level under the cursor, extending both the
/// select list and the grouping list, so every variant strictly refines its
/// predecessor. The walk targets `avg_nb_dd` steps on average and stops
/// early at level 1 or when the finer level has no fresh attribute. No new
/// join is ever needed: the initial query already joined every level
/// between the fact table and the cursor.
pub fn derive_drilldowns(
    initial: &QueryAst,
    cursor: DrillCursor,
    params: &WorkloadParams,
    schema: &WarehouseSchema,
    rng: &mut SeededRng,
) -> Vec<QueryAst> {
    let steps = rng.gauss_int(params.avg_nb_dd);
    let mut variants = Vec::new();
    let mut prev = initial.clone();
    let mut level_no = cursor.level;
    let dim = &schema.dimensions[cursor.dim];

    for _ in 0..steps {
        if level_no <= 1 {
            break;
        }
        level_no -= 1;
        let level = dim.level(level_no);
        let candidates: Vec<QualifiedAttr> = level
            .members
            .iter()
            .map(|m| QualifiedAttr::new(&level.table_name, m))
            .filter(|a| !prev.select_attrs.contains(a))
            .collect();
        if candidates.is_empty() {
            break;
        }
        let attr = candidates[rng.gauss_index(candidates.len())].clone();

        let mut next = prev.clone();
        next.select_attrs.push(attr.clone());
        if let Some(grouped) = next.grouping.attrs_mut() {
            grouped.push(attr);
        }
        next.drill_depth += 1;
        variants.push(next.clone());
        prev = next;
    }
    variants
}

/// Generates a complete workload of `nb_q` queries: initial queries
/// interleaved with their drill-down variants, truncated at the requested
/// count. `seed` is recorded for the workload file header and must be the
/// seed `rng` was opened with.
pub fn generate_workload(
    params: &WorkloadParams,
    schema: &WarehouseSchema,
    rng: &mut SeededRng,
    referential: &StringReferential,
    seed: u64,
) -> Result<Workload, WorkloadParamError> {
    params.validate()?;
    let mut queries = Vec::with_capacity(params.nb_q);
    while queries.len() < params.nb_q {
        let (query, cursor) = build_initial_query(params, schema, rng, referential);
        queries.push(query);
        if queries.len() == params.nb_q {
            break;
        }
        let last = queries.len() - 1;
        for variant in derive_drilldowns(&queries[last], cursor, params, schema, rng) {
            if queries.len() == params.nb_q {
                break;
            }
            queries.push(variant);
        }
    }
    Ok(Workload {
        seed,
        params: params.clone(),
        queries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_low_level, HighLevelParams};
    use crate::rng::{PURPOSE_PARAMS, PURPOSE_SCHEMA, PURPOSE_WORKLOAD};
    use crate::schema::build_schema;

    fn default_schema() -> WarehouseSchema {
        let high = HighLevelParams {
            sigma_ratio: 0.0,
            ..HighLevelParams::default()
        };
        let low = derive_low_level(&high, &mut SeededRng::new(1, PURPOSE_PARAMS, 0.0)).unwrap();
        build_schema(&low, &mut SeededRng::new(42, PURPOSE_SCHEMA, 0.0)).unwrap()
    }

    fn workload_rng(seed: u64) -> SeededRng {
        SeededRng::new(seed, PURPOSE_WORKLOAD, 0.2)
    }

    #[test]
    fn defaults_match_the_documented_profile() {
        let p = WorkloadParams::default();
        assert_eq!(p.nb_q, 100);
        assert_eq!(p.q_avg_nb_att, 5.0);
        assert_eq!(p.avg_nb_restr, 3.0);
        assert_eq!(p.prob_olap, 0.9);
        assert_eq!(p.avg_nb_aggreg, 3.0);
        assert_eq!(p.prob_cube, 0.3);
        assert_eq!(p.prob_having, 0.2);
        assert_eq!(p.avg_nb_dd, 3.0);
        p.validate().unwrap();
    }

    #[test]
    fn out_of_domain_params_are_rejected() {
        let p = WorkloadParams {
            prob_olap: 1.5,
            ..WorkloadParams::default()
        };
        assert!(p.validate().is_err());
        let p = WorkloadParams {
            nb_q: 0,
            ..WorkloadParams::default()
        };
        assert!(p.validate().is_err());
        let p = WorkloadParams {
            q_avg_nb_att: 0.0,
            ..WorkloadParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn every_generated_query_validates() {
        let schema = default_schema();
        let params = WorkloadParams::default();
        let referential = StringReferential::new(1);
        for seed in 0..20 {
            let w = generate_workload(
                &params,
                &schema,
                &mut workload_rng(seed),
                &referential,
                seed,
            )
            .unwrap();
            assert_eq!(w.queries.len(), params.nb_q);
            for (i, q) in w.queries.iter().enumerate() {
                q.validate()
                    .unwrap_or_else(|e| panic!("seed {seed} query {i}: {e}"));
            }
        }
    }

    #[test]
    fn generation_is_reproducible_and_seed_sensitive() {
        let schema = default_schema();
        let params = WorkloadParams::default();
        let referential = StringReferential::new(1);
        let a = generate_workload(&params, &schema, &mut workload_rng(7), &referential, 7).unwrap();
        let b = generate_workload(&params, &schema, &mut workload_rng(7), &referential, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_workload(&params, &schema, &mut workload_rng(8), &referential, 8).unwrap();
        assert_ne!(a.queries, c.queries);
    }

    #[test]
    fn joins_chain_the_fact_table_to_every_selected_level() {
        let schema = default_schema();
        let params = WorkloadParams::default();
        let referential = StringReferential::new(2);
        let w = generate_workload(&params, &schema, &mut workload_rng(3), &referential, 3).unwrap();
        for q in &w.queries {
            assert_eq!(q.tables[0], "FT1");
            // Every non-fact table in FROM is the target of exactly one
            // join condition on its primary key.
            for t in &q.tables[1..] {
                let hits = q
                    .joins
                    .iter()
                    .filter(|j| j.right.table == *t && j.right.attr == format!("{t}_PK"))
                    .count();
                assert_eq!(hits, 1, "table {t} must be joined exactly once");
            }
            // Join left sides reference a table already in FROM.
            for j in &q.joins {
                assert!(q.tables.contains(&j.left.table));
            }
            // Restrictions predicate over selected attributes only.
            for r in &q.restrictions {
                assert!(q.select_attrs.contains(&r.attr));
                assert!(matches!(r.operand, Operand::Str(_)));
                assert_eq!(r.op, CmpOp::Eq);
            }
        }
    }

    #[test]
    fn drill_variants_strictly_grow_toward_finer_levels() {
        let schema = default_schema();
        let params = WorkloadParams::default();
        let referential = StringReferential::new(5);
        let mut rng = workload_rng(5);
        for _ in 0..50 {
            let (initial, cursor) = build_initial_query(&params, &schema, &mut rng, &referential);
            let variants = derive_drilldowns(&initial, cursor, &params, &schema, &mut rng);
            assert!(variants.len() <= cursor.level.saturating_sub(1));
            let mut prev = &initial;
            for (step, v) in variants.iter().enumerate() {
                assert_eq!(v.drill_depth, prev.drill_depth + 1);
                assert_eq!(v.select_attrs.len(), prev.select_attrs.len() + 1);
                assert_eq!(
                    &v.select_attrs[..prev.select_attrs.len()],
                    prev.select_attrs.as_slice()
                );
                let added = v.select_attrs.last().unwrap();
                let expected_level = cursor.level - 1 - step;
                assert_eq!(
                    added.table,
                    schema.dimensions[cursor.dim]
                        .level(expected_level)
                        .table_name
                );
                // The added attribute's table was already joined.
                assert!(v.tables.contains(&added.table));
                assert_eq!(v.joins, prev.joins);
                if v.grouping != Grouping::None {
                    assert_eq!(v.grouping.attrs(), v.select_attrs.as_slice());
                }
                v.validate().unwrap();
                prev = v;
            }
        }
    }

    #[test]
    fn kind_and_grouping_proportions_follow_their_probabilities() {
        let schema = default_schema();
        let params = WorkloadParams::default();
        let referential = StringReferential::new(9);
        let mut olap = 0u32;
        let mut cube = 0u32;
        let mut initial = 0u32;
        let mut rng = workload_rng(1);
        for _ in 0..2000 {
            let (q, _) = build_initial_query(&params, &schema, &mut rng, &referential);
            initial += 1;
            if q.kind == QueryKind::Olap {
                olap += 1;
                if matches!(q.grouping, Grouping::Cube(_)) {
                    cube += 1;
                }
            }
        }
        let olap_frac = olap as f64 / initial as f64;
        assert!(
            (olap_frac - 0.9).abs() < 0.03,
            "OLAP fraction drifted: {olap_frac}"
        );
        let cube_frac = cube as f64 / olap as f64;
        assert!(
            (cube_frac - 0.3).abs() < 0.04,
            "CUBE fraction drifted: {cube_frac}"
        );
    }
}
