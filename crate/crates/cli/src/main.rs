//! Command-line front end for the warehouse benchmark.
//!
//! The pipeline is split into composable commands: `estimate` sizes a
//! configuration without touching a database, `load` creates and fills the
//! warehouse,
//! `workload` writes the query set to a file, `run` executes the cold/warm
//! measurement protocol, and `reset` drops the benchmark tables. Every
//! command that generates anything takes the same configuration and seed,
//! so artifacts produced in separate invocations agree with each other.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! database errors, 3 when the database is not in the state the command
//! requires (for example `run` before `load`).

use clap::{Args, Parser, Subcommand};
use dwbench_core::backend::{connect, Backend, BackendConfig};
use dwbench_core::config::{load_config, load_low_level, RunConfig};
use dwbench_core::datagen::GenOptions;
use dwbench_core::ddl::ConstraintMode;
use dwbench_core::etl::EtlParams;
use dwbench_core::harness::{
    format_summary, run_label, run_load_test, run_performance_test, summarize, write_csv,
    FailPolicy, HarnessError, ProtocolParams, RunTimings,
};
use dwbench_core::params::{derive_low_level, estimate_size, LowLevelParams, SizeReport};
use dwbench_core::rng::{
    SeededRng, StringReferential, PURPOSE_DATA, PURPOSE_ETL, PURPOSE_PARAMS, PURPOSE_SCHEMA,
    PURPOSE_WORKLOAD,
};
use dwbench_core::schema::{build_schema, WarehouseSchema};
use dwbench_core::workload::{generate_workload, load_workload, save_workload, Workload};
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dwbench",
    version,
    about = "Synthetic data-warehouse benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the expected size of the configured warehouse without
    /// touching any database.
    Estimate(EstimateArgs),
    /// Create the warehouse tables and fill them with generated data.
    Load(LoadArgs),
    /// Generate the query workload and write it to a file.
    Workload(WorkloadArgs),
    /// Execute the measurement protocol against a loaded warehouse.
    Run(RunArgs),
    /// Drop the benchmark tables, leaving everything else in place.
    Reset(ResetArgs),
}

/// Parameters shared by every generating command.
#[derive(Args)]
struct ParamArgs {
    /// Configuration file (KEY=VALUE); defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Complete low-level parameter file; skips derivation from averages.
    #[arg(long, value_name = "PATH")]
    low_level: Option<PathBuf>,

    /// Master seed; overrides SEED from the configuration file.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

/// Target database coordinates.
#[derive(Args)]
struct DbArgs {
    /// Database to use: a file path, ":memory:", or an engine URI.
    #[arg(long, value_name = "URI")]
    db: String,

    /// SQL dialect override for DDL and query rendering.
    #[arg(long, value_name = "NAME")]
    dialect: Option<String>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct LoadArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    db: DbArgs,

    /// Drop leftover benchmark tables before loading.
    #[arg(long)]
    force_reset: bool,
}

#[derive(Args)]
struct WorkloadArgs {
    #[command(flatten)]
    params: ParamArgs,

    /// File to write the workload to.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    db: DbArgs,

    /// Workload file to execute (and to write when generating).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Generate a fresh workload instead of reading one from --out.
    #[arg(long)]
    new_workload: bool,

    /// File to write the timing CSV to.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Warm runs to execute; overrides REPN from the configuration.
    #[arg(long, value_name = "N")]
    repn: Option<usize>,

    /// Record failing queries and keep going instead of aborting.
    #[arg(long)]
    continue_on_error: bool,
}

#[derive(Args)]
struct ResetArgs {
    #[command(flatten)]
    db: DbArgs,
}

/// A command failure with its process exit code.
enum CliError {
    /// Bad arguments or configuration (exit 1).
    Usage(String),
    /// The database engine failed or refused the operation (exit 2).
    Backend(String),
    /// The database is not in the state the command requires (exit 3).
    Precondition(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Backend(_) => 2,
            CliError::Precondition(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Backend(m) | CliError::Precondition(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn db_err(e: impl std::fmt::Display) -> CliError {
    CliError::Backend(e.to_string())
}

fn harness_err(e: HarnessError) -> CliError {
    match e {
        HarnessError::Ddl(inner) => CliError::Usage(inner.to_string()),
        HarnessError::Render(inner) => CliError::Usage(inner.to_string()),
        other => CliError::Backend(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Load(args) => cmd_load(&args),
        Command::Workload(args) => cmd_workload(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Reset(args) => cmd_reset(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Loads the configuration and expands it to a full low-level set, either
/// by derivation or from an explicit low-level file.
fn resolve_params(args: &ParamArgs) -> Result<(RunConfig, LowLevelParams), CliError> {
    let mut config = match &args.config {
        Some(path) => load_config(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let low = match &args.low_level {
        Some(path) => load_low_level(path).map_err(usage)?,
        None => {
            let mut rng = stage_rng(&config, PURPOSE_PARAMS);
            derive_low_level(&config.high, &mut rng).map_err(usage)?
        }
    };
    Ok((config, low))
}

fn stage_rng(config: &RunConfig, purpose: &str) -> SeededRng {
    SeededRng::new(config.seed, purpose, config.high.sigma_ratio)
}

fn resolve_schema(args: &ParamArgs) -> Result<(RunConfig, WarehouseSchema), CliError> {
    let (config, low) = resolve_params(args)?;
    let schema = build_schema(&low, &mut stage_rng(&config, PURPOSE_SCHEMA)).map_err(usage)?;
    Ok((config, schema))
}

fn open_backend(args: &DbArgs) -> Result<Box<dyn Backend>, CliError> {
    let config = BackendConfig::parse(&args.db, args.dialect.as_deref()).map_err(usage)?;
    connect(&config).map_err(db_err)
}

/// Schema tables that already exist in the database.
fn existing_warehouse_tables(
    backend: &mut dyn Backend,
    schema: &WarehouseSchema,
) -> Result<Vec<String>, CliError> {
    let present: BTreeSet<String> = backend.list_tables().map_err(db_err)?.into_iter().collect();
    Ok(schema
        .all_table_names()
        .into_iter()
        .filter(|t| present.contains(t))
        .collect())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let (_, low) = resolve_params(&args.params)?;
    match estimate_size(&low) {
        SizeReport::Estimate(est) => {
            println!("{:<12} {:>16} {:>12}", "table", "rows", "MiB");
            for t in &est.tables {
                println!(
                    "{:<12} {:>16.0} {:>12.2}",
                    t.table,
                    t.rows,
                    t.bytes / (1024.0 * 1024.0)
                );
            }
            println!(
                "{:<12} {:>16.0} {:>12.2}",
                "total",
                est.total_rows,
                est.total_mib()
            );
            Ok(())
        }
        SizeReport::TooLarge { table } => Err(CliError::Usage(format!(
            "the estimated size of {table} overflows; shrink the configuration"
        ))),
    }
}

fn cmd_load(args: &LoadArgs) -> Result<(), CliError> {
    let (config, schema) = resolve_schema(&args.params)?;
    let mut backend = open_backend(&args.db)?;

    let existing = existing_warehouse_tables(&mut *backend, &schema)?;
    if !existing.is_empty() {
        if args.force_reset {
            let dropped = backend.reset_warehouse().map_err(db_err)?;
            println!("dropped {dropped} leftover table(s)");
        } else {
            return Err(CliError::Precondition(format!(
                "the database already holds {} benchmark table(s); \
                 pass --force-reset to rebuild",
                existing.len()
            )));
        }
    }

    let referential = StringReferential::new(config.seed);
    let outcome = run_load_test(
        &schema,
        ConstraintMode::Declared,
        &GenOptions::default(),
        &mut stage_rng(&config, PURPOSE_DATA),
        &referential,
        &mut *backend,
    )
    .map_err(harness_err)?;

    println!("{:<12} {:>12}", "table", "rows");
    for (table, rows) in &outcome.stats.table_counts {
        println!("{table:<12} {rows:>12}");
    }
    println!("{:<12} {:>12}", "total", outcome.stats.global_size);
    println!(
        "loaded {} tables in {:.3} s",
        outcome.stats.table_counts.len(),
        outcome.load_time.as_secs_f64()
    );
    Ok(())
}

fn cmd_workload(args: &WorkloadArgs) -> Result<(), CliError> {
    let (config, schema) = resolve_schema(&args.params)?;
    let referential = StringReferential::new(config.seed);
    let workload = generate_workload(
        &config.workload,
        &schema,
        &mut stage_rng(&config, PURPOSE_WORKLOAD),
        &referential,
        config.seed,
    )
    .map_err(usage)?;
    save_workload(&workload, &args.out).map_err(usage)?;
    println!(
        "wrote {} queries to {}",
        workload.queries.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let (config, schema) = resolve_schema(&args.params)?;
    let mut backend = open_backend(&args.db)?;

    let table_names = schema.all_table_names();
    let existing = existing_warehouse_tables(&mut *backend, &schema)?;
    if existing.len() < table_names.len() {
        return Err(CliError::Precondition(format!(
            "{} of {} warehouse tables are missing; run `dwbench load` first",
            table_names.len() - existing.len(),
            table_names.len()
        )));
    }

    let referential = StringReferential::new(config.seed);
    let workload = acquire_workload(args, &config, &schema, &referential)?;

    let protocol = ProtocolParams {
        repn: args.repn.unwrap_or(config.repn),
        fail_policy: if args.continue_on_error {
            FailPolicy::RecordAndContinue
        } else {
            FailPolicy::Abort
        },
    };
    let stats = backend.warehouse_stats(&schema).map_err(db_err)?;
    print_recap(
        args,
        &config,
        &workload,
        &protocol,
        stats.global_size,
        &*backend,
    );

    let timings = run_performance_test(
        &workload,
        &config.etl,
        &protocol,
        &schema,
        &referential,
        &mut *backend,
        &mut stage_rng(&config, PURPOSE_ETL),
    )
    .map_err(harness_err)?;

    let summary = summarize(&timings);
    println!();
    print_run_table(&timings);
    println!();
    print!("{}", format_summary(&summary));
    if let Some(path) = &args.csv {
        write_csv(&timings, &summary, path).map_err(usage)?;
        println!("timings written to {}", path.display());
    }
    Ok(())
}

fn acquire_workload(
    args: &RunArgs,
    config: &RunConfig,
    schema: &WarehouseSchema,
    referential: &StringReferential,
) -> Result<Workload, CliError> {
    if args.new_workload {
        let workload = generate_workload(
            &config.workload,
            schema,
            &mut stage_rng(config, PURPOSE_WORKLOAD),
            referential,
            config.seed,
        )
        .map_err(usage)?;
        if let Some(path) = &args.out {
            save_workload(&workload, path).map_err(usage)?;
            println!(
                "wrote {} queries to {}",
                workload.queries.len(),
                path.display()
            );
        }
        Ok(workload)
    } else {
        let path = args.out.as_ref().ok_or_else(|| {
            CliError::Usage(
                "--out names the workload file to execute; \
                 pass --new-workload to generate one instead"
                    .to_string(),
            )
        })?;
        load_workload(path).map_err(usage)
    }
}

fn print_recap(
    args: &RunArgs,
    config: &RunConfig,
    workload: &Workload,
    protocol: &ProtocolParams,
    total_rows: u64,
    backend: &dyn Backend,
) {
    let etl: &EtlParams = &config.etl;
    println!(
        "target   : {} (dialect {})",
        args.db.db,
        backend.dialect().name
    );
    println!("warehouse: {total_rows} rows");
    println!(
        "workload : {} queries (seed {})",
        workload.queries.len(),
        workload.seed
    );
    println!(
        "protocol : 1 cold + {} warm run(s), grr={} drr={} ir={}, {}",
        protocol.repn,
        etl.grr,
        etl.drr,
        etl.ir,
        match protocol.fail_policy {
            FailPolicy::Abort => "abort on failure",
            FailPolicy::RecordAndContinue => "continue on failure",
        }
    );
}

fn print_run_table(timings: &RunTimings) {
    println!("{:<8} {:>12} {:>12}", "run", "refresh_ms", "workload_ms");
    for (run, etime) in timings.etime.iter().enumerate() {
        let refresh = match run {
            0 => "-".to_string(),
            n => format!("{:.3}", timings.rtime[n - 1].as_secs_f64() * 1000.0),
        };
        println!(
            "{:<8} {:>12} {:>12.3}",
            run_label(run),
            refresh,
            etime.as_secs_f64() * 1000.0
        );
    }
}

fn cmd_reset(args: &ResetArgs) -> Result<(), CliError> {
    let mut backend = open_backend(&args.db)?;
    let dropped = backend.reset_warehouse().map_err(db_err)?;
    println!("dropped {dropped} table(s)");
    Ok(())
}
