//! Benchmark configuration files.
//!
//! A run is configured by a flat `KEY=VALUE` file covering warehouse
//! averages, workload composition, refresh rates, and protocol settings.
//! Blank lines and `#` comment lines are ignored; keys are uppercase and
//! every key has a default, so the empty file is a valid configuration.
//!
//! A second, optional file format pins the complete low-level parameter
//! set, one value per schema slot (`NB_DIM(2)`, `NB_ATT(1,3)`, ...). It
//! bypasses the parameter-derivation step entirely, which is the way to
//! reproduce one exact warehouse rather than a statistical family.

use crate::etl::EtlParams;
use crate::params::{HighLevelParams, LowLevelParams};
use crate::workload::WorkloadParams;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Everything a benchmark invocation needs besides the target database.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub high: HighLevelParams,
    pub workload: WorkloadParams,
    pub etl: EtlParams,
    /// Warm runs in the measurement protocol.
    pub repn: usize,
    /// Master seed for every generation stage.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            high: HighLevelParams::default(),
            workload: WorkloadParams::default(),
            etl: EtlParams::default(),
            repn: 4,
            seed: 0,
        }
    }
}

/// A defect in a configuration file, located by line (0 for whole-file
/// issues such as cross-key validation).
#[derive(Debug, Error)]
#[error("config {origin}:{line}: {message}")]
pub struct ConfigError {
    pub origin: String,
    pub line: usize,
    pub message: String,
}

fn fail(origin: &str, line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        origin: origin.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_number<T: std::str::FromStr>(
    origin: &str,
    line: usize,
    key: &str,
    value: &str,
    expected: &str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| {
        fail(
            origin,
            line,
            format!("{key} expects {expected}, got {value:?}"),
        )
    })
}

/// Keys that are fixed complements of another key. Accepting both would
/// invite contradictory files, so these are rejected with a pointer to the
/// key that actually exists.
const DERIVED_KEYS: [(&str, &str); 4] = [
    ("PROB_EXTRACT", "PROB_OLAP"),
    ("PROB_ROLLUP", "PROB_CUBE"),
    ("FRR", "DRR"),
    ("MR", "IR"),
];

/// Parses configuration text. Unset keys keep their defaults; the combined
/// result is validated as a whole before it is returned.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(fail(
                origin,
                line_no,
                format!("expected KEY=VALUE, got {line:?}"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if let Some((_, actual)) = DERIVED_KEYS.iter().find(|&&(k, _)| k == key) {
            return Err(fail(
                origin,
                line_no,
                format!("{key} is derived from {actual}; set {actual} instead"),
            ));
        }
        let float = |target: &mut f64| -> Result<(), ConfigError> {
            *target = parse_number(origin, line_no, key, value, "a number")?;
            Ok(())
        };
        match key {
            "NB_FT" => float(&mut config.high.avg_nb_ft)?,
            "AVG_NB_DIM" => float(&mut config.high.avg_nb_dim)?,
            "AVG_TOT_NB_DIM" => float(&mut config.high.avg_tot_nb_dim)?,
            "AVG_NB_MEAS" => float(&mut config.high.avg_nb_meas)?,
            "AVG_DENSITY" => float(&mut config.high.avg_density)?,
            "AVG_NB_LEVELS" => float(&mut config.high.avg_nb_levels)?,
            "AVG_NB_ATT" => float(&mut config.high.avg_nb_att)?,
            "AVG_HHLEVEL_SIZE" => float(&mut config.high.avg_hhlevel_size)?,
            "DIM_SFACTOR" => float(&mut config.high.dim_sfactor)?,
            "SIGMA_RATIO" => float(&mut config.high.sigma_ratio)?,
            "NB_Q" => {
                config.workload.nb_q =
                    parse_number(origin, line_no, key, value, "a non-negative integer")?;
            }
            "Q_AVG_NB_ATT" => float(&mut config.workload.q_avg_nb_att)?,
            "AVG_NB_RESTR" => float(&mut config.workload.avg_nb_restr)?,
            "PROB_OLAP" => float(&mut config.workload.prob_olap)?,
            "AVG_NB_AGGREG" => float(&mut config.workload.avg_nb_aggreg)?,
            "PROB_CUBE" => float(&mut config.workload.prob_cube)?,
            "PROB_HAVING" => float(&mut config.workload.prob_having)?,
            "AVG_NB_DD" => float(&mut config.workload.avg_nb_dd)?,
            "GRR" => float(&mut config.etl.grr)?,
            "DRR" => float(&mut config.etl.drr)?,
            "IR" => float(&mut config.etl.ir)?,
            "REPN" => {
                config.repn = parse_number(origin, line_no, key, value, "a non-negative integer")?;
            }
            "SEED" => {
                config.seed = parse_number(origin, line_no, key, value, "a non-negative integer")?;
            }
            other => return Err(fail(origin, line_no, format!("unknown key {other:?}"))),
        }
    }
    config
        .high
        .validate()
        .map_err(|e| fail(origin, 0, e.to_string()))?;
    config
        .workload
        .validate()
        .map_err(|e| fail(origin, 0, e.to_string()))?;
    config
        .etl
        .validate()
        .map_err(|e| fail(origin, 0, e.to_string()))?;
    Ok(config)
}

/// Renders a configuration as text that [`parse_config`] reads back.
pub fn render_config(config: &RunConfig) -> String {
    let mut out = String::new();
    let h = &config.high;
    let w = &config.workload;
    let e = &config.etl;
    let pairs: [(&str, String); 23] = [
        ("NB_FT", h.avg_nb_ft.to_string()),
        ("AVG_NB_DIM", h.avg_nb_dim.to_string()),
        ("AVG_TOT_NB_DIM", h.avg_tot_nb_dim.to_string()),
        ("AVG_NB_MEAS", h.avg_nb_meas.to_string()),
        ("AVG_DENSITY", h.avg_density.to_string()),
        ("AVG_NB_LEVELS", h.avg_nb_levels.to_string()),
        ("AVG_NB_ATT", h.avg_nb_att.to_string()),
        ("AVG_HHLEVEL_SIZE", h.avg_hhlevel_size.to_string()),
        ("DIM_SFACTOR", h.dim_sfactor.to_string()),
        ("NB_Q", w.nb_q.to_string()),
        ("Q_AVG_NB_ATT", w.q_avg_nb_att.to_string()),
        ("AVG_NB_RESTR", w.avg_nb_restr.to_string()),
        ("PROB_OLAP", w.prob_olap.to_string()),
        ("AVG_NB_AGGREG", w.avg_nb_aggreg.to_string()),
        ("PROB_CUBE", w.prob_cube.to_string()),
        ("PROB_HAVING", w.prob_having.to_string()),
        ("AVG_NB_DD", w.avg_nb_dd.to_string()),
        ("GRR", e.grr.to_string()),
        ("DRR", e.drr.to_string()),
        ("IR", e.ir.to_string()),
        ("REPN", config.repn.to_string()),
        ("SEED", config.seed.to_string()),
        ("SIGMA_RATIO", h.sigma_ratio.to_string()),
    ];
    for (key, value) in pairs {
        let _ = writeln!(out, "{key}={value}");
    }
    out
}

/// Reads a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| fail(&origin, 0, e.to_string()))?;
    parse_config(&text, &origin)
}

/// One parsed low-level entry: where it appeared and what it said.
struct Entry {
    line: usize,
    value: String,
}

/// Indexed key collections of a low-level file, keyed by their 1-based
/// index tuples.
#[derive(Default)]
struct LowLevelEntries {
    nb_ft: Option<Entry>,
    tot_nb_dim: Option<Entry>,
    nb_dim: BTreeMap<usize, Entry>,
    nb_meas: BTreeMap<usize, Entry>,
    density: BTreeMap<usize, Entry>,
    nb_levels: BTreeMap<usize, Entry>,
    nb_att: BTreeMap<(usize, usize), Entry>,
    hhlevel_size: BTreeMap<usize, Entry>,
    dim_sfactor: BTreeMap<usize, Entry>,
}

/// Splits `NAME(1,2)` into the name and its indices; a bare `NAME` has
/// none.
fn split_key(key: &str) -> Option<(&str, Vec<usize>)> {
    match key.split_once('(') {
        None => Some((key, vec![])),
        Some((name, rest)) => {
            let args = rest.strip_suffix(')')?;
            let indices = args
                .split(',')
                .map(|a| a.trim().parse::<usize>().ok().filter(|&i| i >= 1))
                .collect::<Option<Vec<usize>>>()?;
            Some((name, indices))
        }
    }
}

fn take_indexed(
    map: &mut BTreeMap<usize, Entry>,
    origin: &str,
    key: &str,
    count: usize,
    what: &str,
) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::with_capacity(count);
    for i in 1..=count {
        let entry = map
            .remove(&i)
            .ok_or_else(|| fail(origin, 0, format!("{key}({i}) is missing")))?;
        out.push(entry);
    }
    if let Some((&i, entry)) = map.iter().next() {
        return Err(fail(
            origin,
            entry.line,
            format!("{key}({i}) is out of range; there are only {count} {what}"),
        ));
    }
    Ok(out)
}

fn parse_entry<T: std::str::FromStr>(
    origin: &str,
    key: String,
    entry: &Entry,
    expected: &str,
) -> Result<T, ConfigError> {
    parse_number(origin, entry.line, &key, &entry.value, expected)
}

/// Parses a complete low-level parameter file. Every slot must be present
/// exactly once; the assembled set is validated before it is returned.
pub fn parse_low_level(text: &str, origin: &str) -> Result<LowLevelParams, ConfigError> {
    let mut entries = LowLevelEntries::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(fail(
                origin,
                line_no,
                format!("expected KEY=VALUE, got {line:?}"),
            ));
        };
        let key = key.trim();
        let entry = Entry {
            line: line_no,
            value: value.trim().to_string(),
        };
        let Some((name, indices)) = split_key(key) else {
            return Err(fail(origin, line_no, format!("malformed key {key:?}")));
        };
        let dup = match (name, indices.as_slice()) {
            ("NB_FT", []) => entries.nb_ft.replace(entry).is_some(),
            ("TOT_NB_DIM", []) => entries.tot_nb_dim.replace(entry).is_some(),
            ("NB_DIM", &[i]) => entries.nb_dim.insert(i, entry).is_some(),
            ("NB_MEAS", &[i]) => entries.nb_meas.insert(i, entry).is_some(),
            ("DENSITY", &[i]) => entries.density.insert(i, entry).is_some(),
            ("NB_LEVELS", &[d]) => entries.nb_levels.insert(d, entry).is_some(),
            ("NB_ATT", &[d, h]) => entries.nb_att.insert((d, h), entry).is_some(),
            ("HHLEVEL_SIZE", &[d]) => entries.hhlevel_size.insert(d, entry).is_some(),
            ("DIM_SFACTOR", &[d]) => entries.dim_sfactor.insert(d, entry).is_some(),
            _ => return Err(fail(origin, line_no, format!("unknown key {key:?}"))),
        };
        if dup {
            return Err(fail(origin, line_no, format!("{key} appears twice")));
        }
    }

    let nb_ft: usize = match &entries.nb_ft {
        Some(e) => parse_entry(origin, "NB_FT".into(), e, "a positive integer")?,
        None => return Err(fail(origin, 0, "NB_FT is missing")),
    };
    let tot_nb_dim: usize = match &entries.tot_nb_dim {
        Some(e) => parse_entry(origin, "TOT_NB_DIM".into(), e, "a positive integer")?,
        None => return Err(fail(origin, 0, "TOT_NB_DIM is missing")),
    };

    let mut low = LowLevelParams {
        nb_ft,
        tot_nb_dim,
        nb_dim: vec![],
        nb_meas: vec![],
        density: vec![],
        nb_levels: vec![],
        nb_att: vec![],
        hhlevel_size: vec![],
        dim_sfactor: vec![],
    };

    for e in take_indexed(&mut entries.nb_dim, origin, "NB_DIM", nb_ft, "fact tables")? {
        low.nb_dim.push(parse_entry(
            origin,
            "NB_DIM".into(),
            &e,
            "a positive integer",
        )?);
    }
    for e in take_indexed(
        &mut entries.nb_meas,
        origin,
        "NB_MEAS",
        nb_ft,
        "fact tables",
    )? {
        low.nb_meas.push(parse_entry(
            origin,
            "NB_MEAS".into(),
            &e,
            "a positive integer",
        )?);
    }
    for e in take_indexed(
        &mut entries.density,
        origin,
        "DENSITY",
        nb_ft,
        "fact tables",
    )? {
        low.density
            .push(parse_entry(origin, "DENSITY".into(), &e, "a number")?);
    }
    for e in take_indexed(
        &mut entries.nb_levels,
        origin,
        "NB_LEVELS",
        tot_nb_dim,
        "dimensions",
    )? {
        low.nb_levels.push(parse_entry(
            origin,
            "NB_LEVELS".into(),
            &e,
            "a positive integer",
        )?);
    }
    for e in take_indexed(
        &mut entries.hhlevel_size,
        origin,
        "HHLEVEL_SIZE",
        tot_nb_dim,
        "dimensions",
    )? {
        low.hhlevel_size.push(parse_entry(
            origin,
            "HHLEVEL_SIZE".into(),
            &e,
            "a positive integer",
        )?);
    }
    for e in take_indexed(
        &mut entries.dim_sfactor,
        origin,
        "DIM_SFACTOR",
        tot_nb_dim,
        "dimensions",
    )? {
        low.dim_sfactor
            .push(parse_entry(origin, "DIM_SFACTOR".into(), &e, "a number")?);
    }

    for (d, &levels) in low.nb_levels.iter().enumerate() {
        let mut atts = Vec::with_capacity(levels);
        for h in 1..=levels {
            let entry = entries
                .nb_att
                .remove(&(d + 1, h))
                .ok_or_else(|| fail(origin, 0, format!("NB_ATT({},{h}) is missing", d + 1)))?;
            atts.push(parse_entry(
                origin,
                format!("NB_ATT({},{h})", d + 1),
                &entry,
                "a non-negative integer",
            )?);
        }
        low.nb_att.push(atts);
    }
    if let Some((&(d, h), entry)) = entries.nb_att.iter().next() {
        return Err(fail(
            origin,
            entry.line,
            format!("NB_ATT({d},{h}) does not match any dimension level"),
        ));
    }

    low.validate().map_err(|e| fail(origin, 0, e.to_string()))?;
    Ok(low)
}

/// Renders a low-level parameter set as text [`parse_low_level`] reads
/// back.
pub fn render_low_level(low: &LowLevelParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NB_FT={}", low.nb_ft);
    let _ = writeln!(out, "TOT_NB_DIM={}", low.tot_nb_dim);
    for (i, v) in low.nb_dim.iter().enumerate() {
        let _ = writeln!(out, "NB_DIM({})={v}", i + 1);
    }
    for (i, v) in low.nb_meas.iter().enumerate() {
        let _ = writeln!(out, "NB_MEAS({})={v}", i + 1);
    }
    for (i, v) in low.density.iter().enumerate() {
        let _ = writeln!(out, "DENSITY({})={v}", i + 1);
    }
    for (d, v) in low.nb_levels.iter().enumerate() {
        let _ = writeln!(out, "NB_LEVELS({})={v}", d + 1);
    }
    for (d, atts) in low.nb_att.iter().enumerate() {
        for (h, v) in atts.iter().enumerate() {
            let _ = writeln!(out, "NB_ATT({},{})={v}", d + 1, h + 1);
        }
    }
    for (d, v) in low.hhlevel_size.iter().enumerate() {
        let _ = writeln!(out, "HHLEVEL_SIZE({})={v}", d + 1);
    }
    for (d, v) in low.dim_sfactor.iter().enumerate() {
        let _ = writeln!(out, "DIM_SFACTOR({})={v}", d + 1);
    }
    out
}

/// Reads a low-level parameter file.
pub fn load_low_level(path: impl AsRef<Path>) -> Result<LowLevelParams, ConfigError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| fail(&origin, 0, e.to_string()))?;
    parse_low_level(&text, &origin)
}
