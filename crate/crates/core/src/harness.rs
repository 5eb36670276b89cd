//! Benchmark protocol execution and response-time reporting.
//!
//! A complete measurement is a load test (DDL plus data generation) followed
//! by a performance test: one cold run of the workload on the freshly
//! loaded warehouse, then `repn` warm runs, each a refresh phase followed by
//! a full workload execution. Every phase and every query is timed with the
//! monotonic clock; nothing is flushed or warmed between runs, because the
//! cold/warm distinction is exactly what the protocol measures.
//!
//! Timings are atomic measurements. Summaries (sum, mean, min, max,
//! population standard deviation per series) are computed from them, and
//! the CSV output carries both, so any composite metric can be derived from
//! the file alone.

use crate::backend::{Backend, BackendError};
use crate::datagen::{load_warehouse, GenOptions, LoadError};
use crate::ddl::{emit_ddl, ConstraintMode, DdlError};
use crate::etl::{plan_refresh, refresh_dimensions, refresh_facts, EtlError, EtlParams};
use crate::rng::{SeededRng, StringReferential};
use crate::schema::{WarehouseSchema, WarehouseStats};
use crate::workload::{render_sql, RenderError, Workload};
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};
use thiserror::Error;

/// What to do when a workload query fails mid-run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailPolicy {
    /// Stop the performance test at the first failing query.
    #[default]
    Abort,
    /// Mark the query failed, keep its elapsed time, and continue.
    RecordAndContinue,
}

/// Protocol shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolParams {
    /// Number of warm runs after the cold one; zero means cold-only.
    pub repn: usize,
    pub fail_policy: FailPolicy,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            repn: 4,
            fail_policy: FailPolicy::Abort,
        }
    }
}

/// One query execution within one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTiming {
    /// Run ordinal; 0 is the cold run.
    pub run: usize,
    /// 1-based query ordinal within the workload.
    pub index: usize,
    pub duration: Duration,
    pub failed: bool,
}

/// Raw timings of one benchmark execution.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunTimings {
    /// Duration of the load test, when one ran in the same invocation.
    pub load_time: Option<Duration>,
    /// Workload wall times; index 0 is the cold run, so the length is
    /// `repn + 1`.
    pub etime: Vec<Duration>,
    /// Refresh wall times of the warm runs, length `repn`.
    pub rtime: Vec<Duration>,
    /// Refresh operation counts (inserts, modifications) per warm run.
    pub refresh_ops: Vec<(u64, u64)>,
    /// Per-query timings, grouped by run in execution order.
    pub query_timings: Vec<QueryTiming>,
}

/// Label of run `run` in reports: `cold`, then `warm1`, `warm2`, ...
pub fn run_label(run: usize) -> String {
    if run == 0 {
        "cold".to_string()
    } else {
        format!("warm{run}")
    }
}

/// Sum/mean/extrema/deviation of one series, in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub count: usize,
    pub global_ms: f64,
    pub avg_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    /// Population standard deviation (divisor `n`, not `n - 1`).
    pub stdev_ms: f64,
}

/// Computes series statistics; an empty series has none rather than zeros.
pub fn series_stats(series: &[Duration]) -> Option<SeriesStats> {
    if series.is_empty() {
        return None;
    }
    let ms: Vec<f64> = series.iter().map(|d| d.as_secs_f64() * 1000.0).collect();
    let global_ms: f64 = ms.iter().sum();
    let avg_ms = global_ms / ms.len() as f64;
    let min_ms = ms.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ms = ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let variance = ms.iter().map(|x| (x - avg_ms).powi(2)).sum::<f64>() / ms.len() as f64;
    Some(SeriesStats {
        count: ms.len(),
        global_ms,
        avg_ms,
        min_ms,
        max_ms,
        stdev_ms: variance.sqrt(),
    })
}

/// Per-series summaries of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    /// All workload executions (cold and warm).
    pub workload: Option<SeriesStats>,
    /// All refresh phases.
    pub refresh: Option<SeriesStats>,
    /// Per warm run, refresh plus workload time.
    pub combined: Option<SeriesStats>,
}

/// Summarizes raw timings. The combined series pairs each warm run's
/// refresh with its workload execution, so it is empty for cold-only runs.
pub fn summarize(timings: &RunTimings) -> MetricsSummary {
    let combined: Vec<Duration> = timings
        .rtime
        .iter()
        .zip(timings.etime.iter().skip(1))
        .map(|(&r, &e)| r + e)
        .collect();
    MetricsSummary {
        workload: series_stats(&timings.etime),
        refresh: series_stats(&timings.rtime),
        combined: series_stats(&combined),
    }
}

/// Renders a summary as an aligned text table for terminal output.
pub fn format_summary(summary: &MetricsSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>5} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "series", "count", "global_ms", "avg_ms", "min_ms", "max_ms", "stdev_ms"
    );
    let rows = [
        ("workload", &summary.workload),
        ("refresh", &summary.refresh),
        ("combined", &summary.combined),
    ];
    for (name, stats) in rows {
        match stats {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{:<10} {:>5} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>12.3}",
                    name, s.count, s.global_ms, s.avg_ms, s.min_ms, s.max_ms, s.stdev_ms
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{:<10} {:>5} {:>12} {:>12} {:>12} {:>12} {:>12}",
                    name, 0, "-", "-", "-", "-", "-"
                );
            }
        }
    }
    out
}

/// Protocol failures.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Ddl(#[from] DdlError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Etl(#[from] EtlError),
    #[error("query {index} of the {run} run failed: {message}")]
    QueryFailed {
        run: String,
        index: usize,
        message: String,
    },
}

/// Result of a load test.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub ddl_statements: usize,
    pub stats: WarehouseStats,
    /// Wall time of DDL plus data generation and loading.
    pub load_time: Duration,
}

/// Creates the warehouse tables and fills them with generated data, timing
/// the whole operation. The target database must not already hold the
/// benchmark tables; a leftover warehouse surfaces as a DDL failure at its
/// statement index (reset first to rerun).
pub fn run_load_test(
    schema: &WarehouseSchema,
    constraints: ConstraintMode,
    opts: &GenOptions,
    rng: &mut SeededRng,
    referential: &StringReferential,
    backend: &mut dyn Backend,
) -> Result<LoadOutcome, HarnessError> {
    let start = Instant::now();
    let statements = emit_ddl(schema, backend.dialect(), constraints)?;
    let ddl_statements = backend.execute_ddl(&statements)?;
    let report = load_warehouse(schema, rng, referential, opts, backend)?;
    Ok(LoadOutcome {
        ddl_statements,
        stats: report.stats,
        load_time: start.elapsed(),
    })
}

/// Executes the cold/warm measurement protocol.
///
/// The workload is rendered once for the backend's dialect, then run cold
/// (`etime[0]`). Each of the `repn` warm runs recomputes warehouse stats
/// (the warehouse grows as it is refreshed), plans and executes a refresh
/// (`rtime[i]`, operation counts in `refresh_ops`), and runs the workload
/// again (`etime[i]`). Query failures follow the fail policy; refresh
/// failures always abort, because a half-applied refresh would make every
/// later timing incomparable.
pub fn run_performance_test(
    workload: &Workload,
    etl: &EtlParams,
    protocol: &ProtocolParams,
    schema: &WarehouseSchema,
    referential: &StringReferential,
    backend: &mut dyn Backend,
    rng: &mut SeededRng,
) -> Result<RunTimings, HarnessError> {
    let sql: Vec<String> = workload
        .queries
        .iter()
        .map(|q| render_sql(q, backend.dialect()))
        .collect::<Result<_, _>>()?;

    let mut timings = RunTimings::default();
    run_workload_once(0, &sql, protocol.fail_policy, backend, &mut timings)?;

    for run in 1..=protocol.repn {
        let refresh_start = Instant::now();
        let stats = backend.warehouse_stats(schema)?;
        let plan = plan_refresh(etl, &stats, schema, rng);
        let dims = refresh_dimensions(&plan, schema, referential, backend, rng)?;
        let facts = refresh_facts(&plan, schema, backend, rng)?;
        timings.rtime.push(refresh_start.elapsed());
        timings
            .refresh_ops
            .push((dims.inserts + facts.inserts, dims.modifies + facts.modifies));

        run_workload_once(run, &sql, protocol.fail_policy, backend, &mut timings)?;
    }
    Ok(timings)
}

fn run_workload_once(
    run: usize,
    sql: &[String],
    policy: FailPolicy,
    backend: &mut dyn Backend,
    timings: &mut RunTimings,
) -> Result<(), HarnessError> {
    let start = Instant::now();
    for (i, statement) in sql.iter().enumerate() {
        let query_start = Instant::now();
        match backend.execute_timed(statement) {
            Ok(outcome) => timings.query_timings.push(QueryTiming {
                run,
                index: i + 1,
                duration: outcome.duration,
                failed: false,
            }),
            Err(e) => match policy {
                FailPolicy::Abort => {
                    return Err(HarnessError::QueryFailed {
                        run: run_label(run),
                        index: i + 1,
                        message: e.to_string(),
                    })
                }
                FailPolicy::RecordAndContinue => timings.query_timings.push(QueryTiming {
                    run,
                    index: i + 1,
                    duration: query_start.elapsed(),
                    failed: true,
                }),
            },
        }
    }
    timings.etime.push(start.elapsed());
    Ok(())
}

/// Rounds a duration to whole milliseconds for the CSV.
fn millis(d: Duration) -> u64 {
    ((d.as_micros() + 500) / 1000) as u64
}

/// Renders timings and summary as CSV text.
///
/// Measurement rows are `run,phase,kind,duration_ms`: the run label, a
/// phase of `workload`, `refresh`, or `query`, the query ordinal (`-` for
/// whole-phase rows), and whole milliseconds. Rows appear in protocol
/// order: each run's refresh (warm runs only), its workload total, then its
/// per-query breakdown. Everything else travels as `#` comment rows: the
/// deviation convention, the load time, per-run refresh operation counts,
/// failed-query markers, and the three series summaries.
pub fn render_csv(timings: &RunTimings, summary: &MetricsSummary) -> String {
    let mut out = String::new();
    out.push_str("run,phase,kind,duration_ms\n");
    out.push_str("# note,stdev=population\n");
    if let Some(load) = timings.load_time {
        let _ = writeln!(out, "# load,duration_ms={}", millis(load));
    }

    for run in 0..timings.etime.len() {
        let label = run_label(run);
        if run >= 1 {
            let _ = writeln!(out, "{label},refresh,-,{}", millis(timings.rtime[run - 1]));
        }
        let _ = writeln!(out, "{label},workload,-,{}", millis(timings.etime[run]));
        for q in timings.query_timings.iter().filter(|q| q.run == run) {
            let _ = writeln!(out, "{label},query,{},{}", q.index, millis(q.duration));
        }
    }

    for (i, &(inserts, modifies)) in timings.refresh_ops.iter().enumerate() {
        let _ = writeln!(
            out,
            "# refresh_ops,{},inserts={inserts},modifies={modifies}",
            run_label(i + 1)
        );
    }
    for q in timings.query_timings.iter().filter(|q| q.failed) {
        let _ = writeln!(out, "# failed,{},query={}", run_label(q.run), q.index);
    }

    let series = [
        ("workload", &summary.workload),
        ("refresh", &summary.refresh),
        ("combined", &summary.combined),
    ];
    for (name, stats) in series {
        match stats {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "# summary,{name},count={},global_ms={:.3},avg_ms={:.3},min_ms={:.3},\
                     max_ms={:.3},stdev_ms={:.3}",
                    s.count, s.global_ms, s.avg_ms, s.min_ms, s.max_ms, s.stdev_ms
                );
            }
            None => {
                let _ = writeln!(out, "# summary,{name},empty");
            }
        }
    }
    out
}

/// A defect in a timing CSV, located by line (0 for file-level issues).
#[derive(Debug, Error)]
#[error("timing CSV {origin}:{line}: {message}")]
pub struct CsvError {
    pub origin: String,
    pub line: usize,
    pub message: String,
}

fn csv_fail(origin: &str, line: usize, message: impl Into<String>) -> CsvError {
    CsvError {
        origin: origin.to_string(),
        line,
        message: message.into(),
    }
}

/// Writes the CSV produced by [`render_csv`] to a file.
pub fn write_csv(
    timings: &RunTimings,
    summary: &MetricsSummary,
    path: impl AsRef<Path>,
) -> Result<(), CsvError> {
    let path = path.as_ref();
    std::fs::write(path, render_csv(timings, summary))
        .map_err(|e| csv_fail(&path.display().to_string(), 0, e.to_string()))
}

/// Reads a timing CSV back.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(RunTimings, MetricsSummary), CsvError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| csv_fail(&origin, 0, e.to_string()))?;
    parse_csv(&text, &origin)
}

fn parse_run_label(label: &str) -> Option<usize> {
    if label == "cold" {
        return Some(0);
    }
    let n: usize = label.strip_prefix("warm")?.parse().ok()?;
    (n >= 1).then_some(n)
}

fn parse_series_line(rest: &str) -> Option<SeriesStats> {
    let mut stats = SeriesStats {
        count: 0,
        global_ms: 0.0,
        avg_ms: 0.0,
        min_ms: 0.0,
        max_ms: 0.0,
        stdev_ms: 0.0,
    };
    for field in rest.split(',') {
        let (key, value) = field.split_once('=')?;
        match key {
            "count" => stats.count = value.parse().ok()?,
            "global_ms" => stats.global_ms = value.parse().ok()?,
            "avg_ms" => stats.avg_ms = value.parse().ok()?,
            "min_ms" => stats.min_ms = value.parse().ok()?,
            "max_ms" => stats.max_ms = value.parse().ok()?,
            "stdev_ms" => stats.stdev_ms = value.parse().ok()?,
            _ => return None,
        }
    }
    Some(stats)
}

/// Parses timing CSV text back into timings and summary; the inverse of
/// [`render_csv`] at millisecond resolution.
pub fn parse_csv(text: &str, origin: &str) -> Result<(RunTimings, MetricsSummary), CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "run,phase,kind,duration_ms")) => {}
        Some((_, other)) => {
            return Err(csv_fail(origin, 1, format!("unexpected header {other:?}")))
        }
        None => return Err(csv_fail(origin, 0, "the file is empty")),
    }

    let mut timings = RunTimings::default();
    let mut failed: Vec<(usize, usize)> = Vec::new();
    let mut refresh_ops: Vec<(usize, u64, u64)> = Vec::new();
    let mut summary = MetricsSummary {
        workload: None,
        refresh: None,
        combined: None,
    };

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix("# ") {
            if let Some(rest) = comment.strip_prefix("load,duration_ms=") {
                let ms: u64 = rest.parse().map_err(|_| {
                    csv_fail(origin, line_no, format!("bad load duration {rest:?}"))
                })?;
                timings.load_time = Some(Duration::from_millis(ms));
            } else if let Some(rest) = comment.strip_prefix("refresh_ops,") {
                let parts: Vec<&str> = rest.split(',').collect();
                let parsed = (|| {
                    let [label, ins, modi] = parts.as_slice() else {
                        return None;
                    };
                    let run = parse_run_label(label)?;
                    let inserts = ins.strip_prefix("inserts=")?.parse().ok()?;
                    let modifies = modi.strip_prefix("modifies=")?.parse().ok()?;
                    Some((run, inserts, modifies))
                })();
                match parsed {
                    Some(entry) => refresh_ops.push(entry),
                    None => {
                        return Err(csv_fail(
                            origin,
                            line_no,
                            format!("malformed refresh_ops row {rest:?}"),
                        ))
                    }
                }
            } else if let Some(rest) = comment.strip_prefix("failed,") {
                let parsed = (|| {
                    let (label, query) = rest.split_once(',')?;
                    let run = parse_run_label(label)?;
                    let index = query.strip_prefix("query=")?.parse().ok()?;
                    Some((run, index))
                })();
                match parsed {
                    Some(entry) => failed.push(entry),
                    None => {
                        return Err(csv_fail(
                            origin,
                            line_no,
                            format!("malformed failed-query row {rest:?}"),
                        ))
                    }
                }
            } else if let Some(rest) = comment.strip_prefix("summary,") {
                let (name, body) = rest.split_once(',').unwrap_or((rest, ""));
                let stats = if body == "empty" {
                    None
                } else {
                    Some(parse_series_line(body).ok_or_else(|| {
                        csv_fail(origin, line_no, format!("malformed summary row {rest:?}"))
                    })?)
                };
                match name {
                    "workload" => summary.workload = stats,
                    "refresh" => summary.refresh = stats,
                    "combined" => summary.combined = stats,
                    other => {
                        return Err(csv_fail(
                            origin,
                            line_no,
                            format!("unknown summary series {other:?}"),
                        ))
                    }
                }
            }
            // Other comments (the stdev note) carry no data.
            continue;
        }

        let fields: Vec<&str> = line.split(',').collect();
        let [label, phase, kind, duration] = fields.as_slice() else {
            return Err(csv_fail(
                origin,
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        };
        let run = parse_run_label(label)
            .ok_or_else(|| csv_fail(origin, line_no, format!("unknown run label {label:?}")))?;
        let ms: u64 = duration
            .parse()
            .map_err(|_| csv_fail(origin, line_no, format!("bad duration {duration:?}")))?;
        let duration = Duration::from_millis(ms);
        match (*phase, *kind) {
            ("workload", "-") => {
                if run != timings.etime.len() {
                    return Err(csv_fail(
                        origin,
                        line_no,
                        format!("workload row for run {run} arrived out of order"),
                    ));
                }
                timings.etime.push(duration);
            }
            ("refresh", "-") => {
                if run == 0 || run != timings.rtime.len() + 1 {
                    return Err(csv_fail(
                        origin,
                        line_no,
                        format!("refresh row for run {run} arrived out of order"),
                    ));
                }
                timings.rtime.push(duration);
            }
            ("query", ordinal) => {
                let index: usize = ordinal.parse().map_err(|_| {
                    csv_fail(origin, line_no, format!("bad query ordinal {ordinal:?}"))
                })?;
                timings.query_timings.push(QueryTiming {
                    run,
                    index,
                    duration,
                    failed: false,
                });
            }
            (other, _) => {
                return Err(csv_fail(
                    origin,
                    line_no,
                    format!("unknown phase {other:?}"),
                ));
            }
        }
    }

    if timings.etime.len() != timings.rtime.len() + 1 {
        return Err(csv_fail(
            origin,
            0,
            format!(
                "{} workload rows cannot pair with {} refresh rows",
                timings.etime.len(),
                timings.rtime.len()
            ),
        ));
    }
    timings.refresh_ops = vec![(0, 0); timings.rtime.len()];
    for (run, inserts, modifies) in refresh_ops {
        let slot = timings
            .refresh_ops
            .get_mut(run.wrapping_sub(1))
            .ok_or_else(|| csv_fail(origin, 0, format!("refresh_ops for unknown run {run}")))?;
        *slot = (inserts, modifies);
    }
    for (run, index) in failed {
        let timing = timings
            .query_timings
            .iter_mut()
            .find(|q| q.run == run && q.index == index)
            .ok_or_else(|| {
                csv_fail(
                    origin,
                    0,
                    format!("failed marker for missing query {index} of run {run}"),
                )
            })?;
        timing.failed = true;
    }
    Ok((timings, summary))
}
