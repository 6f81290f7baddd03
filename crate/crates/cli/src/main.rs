//! `claw`: conformalized locally adaptive weighting from the command line.

mod config;
mod error;
mod input;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use claw_core::aggregate::{integrate, EvaluePanel};
use claw_core::semisup::semisup_claw_run;
use claw_core::sim::{replicate, Family, GeneratorSpec, Method, ReplicationSummary, StudyConfig};
use claw_core::{claw_run, Dataset};
use serde::Serialize;

use crate::config::{resolve_seed, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report::{fmt_f64, write_json, write_units, RunReport, SplitManifest, VERSION};

#[derive(Debug, Parser)]
#[command(
    name = "claw",
    version,
    about = "Covariate-adaptive multiple testing with calibration data"
)]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run CLAW on a CSV with columns t, t_cal and s (or s1..sd).
    Run(RunArgs),
    /// Semi-supervised CLAW: calibration values come from a labeled null pool.
    Semisup {
        #[command(flatten)]
        common: RunArgs,
        /// Single-column CSV of null statistics, at least m + 2 values.
        #[arg(long)]
        null_pool: PathBuf,
    },
    /// Replicate a simulation design and summarize FDR and power per method.
    Simulate(SimulateArgs),
    /// Average e-values across sources and apply e-BH.
    Aggregate(AggregateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON configuration; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides CLAW_SEED and the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    setting: u8,
    /// Swept parameter as `name=value` or a bare value.
    #[arg(long)]
    param: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated method names.
    #[arg(long, default_value = "claw,bh", value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Base CLAW configuration (alpha is taken from --alpha).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Summary CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON copy of the summary.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    /// CSV with one row per hypothesis and one column per source.
    #[arg(long)]
    panel: PathBuf,
    /// Comma-separated positive source weights (default: all 1).
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    alpha: f64,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let workers = usize::from(cli.workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Flag(format!("--workers: {e}")))?;
    pool.install(|| match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Semisup { common, null_pool } => cmd_semisup(&common, &null_pool),
        Command::Simulate(args) => cmd_simulate(&args, workers),
        Command::Aggregate(args) => cmd_aggregate(&args),
    })
}

fn prepare(args: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    cfg.claw.seed = resolve_seed(args.seed, cfg.claw.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> CliResult<()> {
    let cfg = prepare(args)?;
    let data = input::read_dataset(&args.input, true)?;
    let f0 = cfg.null_model()?;
    let run = claw_run(data.clone(), f0.as_ref(), &cfg.claw)?;
    write_units(&args.out.join("report.csv"), &data, &run)?;
    write_json(
        &args.out.join("report.json"),
        &RunReport::new("run", &cfg, &run),
    )?;
    println!("rejected {} of {}", run.decision.rejected.len(), data.m());
    Ok(())
}

fn cmd_semisup(args: &RunArgs, pool_path: &Path) -> CliResult<()> {
    let cfg = prepare(args)?;
    let data = input::read_dataset(&args.input, false)?;
    let pool = input::read_column(pool_path)?;
    let pool_size = pool.len();
    let out = semisup_claw_run(
        data.clone().with_null_pool(pool),
        &cfg.claw,
        cfg.semisup_options(),
    )?;
    let mut used = Dataset::new(data.units);
    for (unit, &c) in used.units.iter_mut().zip(&out.split.calibration) {
        unit.t_cal = c;
    }
    write_units(&args.out.join("report.csv"), &used, &out.run)?;
    let mut report = RunReport::new("semisup", &cfg, &out.run);
    report.null_split = Some(SplitManifest::new(&out.split, pool_size));
    write_json(&args.out.join("report.json"), &report)?;
    println!(
        "rejected {} of {}",
        out.run.decision.rejected.len(),
        used.m()
    );
    Ok(())
}

fn parse_param(spec_name: &str, raw: &str) -> CliResult<f64> {
    let (name, value) = match raw.split_once('=') {
        Some((n, v)) => (Some(n.trim()), v.trim()),
        None => (None, raw.trim()),
    };
    if let Some(n) = name {
        if !n.eq_ignore_ascii_case(spec_name) {
            return Err(CliError::Flag(format!(
                "--param: this setting sweeps `{spec_name}`, not `{n}`"
            )));
        }
    }
    value
        .parse()
        .map_err(|_| CliError::Flag(format!("--param: `{value}` is not a number")))
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    command: &'static str,
    version: &'static str,
    seed: u64,
    config: &'a StudyConfig,
    summary: &'a ReplicationSummary,
}

fn cmd_simulate(args: &SimulateArgs, workers: usize) -> CliResult<()> {
    let family: Family = args.family.parse()?;
    let mut spec = GeneratorSpec::new(family, args.setting, 0.0);
    spec.param = parse_param(spec.param_name(), &args.param)?;
    let methods = args
        .methods
        .iter()
        .map(|m| m.trim().parse::<Method>())
        .collect::<Result<Vec<_>, _>>()?;
    let base = RunConfig::load(args.config.as_deref())?;
    let seed = resolve_seed(args.seed, base.claw.seed)?;
    let study = StudyConfig {
        claw: base.claw.clone().with_alpha(args.alpha),
        semisup: base.semisup_options(),
        ..StudyConfig::default()
    };
    study.claw.validate()?;
    let summary = replicate(spec, &methods, &study, args.reps as usize, seed, workers)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::io(&args.out, std::io::Error::other(e));
    w.write_record([
        "family",
        "setting",
        "param_name",
        "param",
        "alpha",
        "n_reps",
        "master_seed",
        "method",
        "fdr",
        "fdr_se",
        "ap",
        "ap_se",
        "mfdr",
        "mean_rejections",
    ])
    .map_err(csv_err)?;
    for s in &summary.methods {
        w.write_record([
            family.to_string(),
            spec.setting.to_string(),
            spec.param_name().to_string(),
            fmt_f64(spec.param),
            fmt_f64(summary.alpha),
            summary.n_reps.to_string(),
            seed.to_string(),
            s.method.name().to_string(),
            fmt_f64(s.fdr),
            fmt_f64(s.fdr_se),
            fmt_f64(s.ap),
            fmt_f64(s.ap_se),
            fmt_f64(s.mfdr),
            fmt_f64(s.mean_rejections),
        ])
        .map_err(csv_err)?;
        println!(
            "{:<18} FDR {:.4} (se {:.4})  AP {:.4} (se {:.4})  mean |R| {:.1}",
            s.method.name(),
            s.fdr,
            s.fdr_se,
            s.ap,
            s.ap_se,
            s.mean_rejections
        );
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(&args.out, e.into_error()))?;
    std::fs::write(&args.out, bytes).map_err(|e| CliError::io(&args.out, e))?;
    if let Some(path) = &args.json {
        let report = SimulateReport {
            command: "simulate",
            version: VERSION,
            seed,
            config: &study,
            summary: &summary,
        };
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AggregateReport<'a> {
    command: &'static str,
    version: &'static str,
    alpha: f64,
    weights: &'a [f64],
    m: usize,
    evalues: &'a [f64],
    n_rejected: usize,
    rejected: &'a [usize],
}

fn cmd_aggregate(args: &AggregateArgs) -> CliResult<()> {
    if !(args.alpha > 0.0 && args.alpha <= 1.0) {
        return Err(CliError::Flag(format!(
            "--alpha {} not in (0, 1]",
            args.alpha
        )));
    }
    let rows = input::read_panel(&args.panel)?;
    let weights = args
        .weights
        .clone()
        .unwrap_or_else(|| vec![1.0; rows.len()]);
    let panel = EvaluePanel::new(rows, weights.clone())?;
    let result = integrate(&panel, args.alpha);
    let report = AggregateReport {
        command: "aggregate",
        version: VERSION,
        alpha: args.alpha,
        weights: &weights,
        m: panel.m(),
        evalues: &result.evalues,
        n_rejected: result.rejected.len(),
        rejected: &result.rejected,
    };
    match &args.out {
        Some(path) => write_json(path, &report),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
    }
}
