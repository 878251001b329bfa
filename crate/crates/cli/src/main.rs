mod config;
mod plot;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::Value;

use tlshrink::harness::{
    check_table, emit_report, estimate_method, read_report, run_experiment, sample_method,
    table_plan, wide_table, write_draws, ExperimentPlan, Table, TableOptions,
};
use tlshrink::simgen::{
    export_scenario, gen_replication, import_scenario, write_scenario, ScenarioConfig,
};
use tlshrink::RngStream;

use config::{apply_overrides, merge, read_json, take_schema_version, EstimateConfig};

/// Two-stage transfer-learning estimators and their simulation harness.
#[derive(Parser)]
#[command(name = "tlshrink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. hs.iterations=2000.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one scenario (truth and sample means) and write it as CSV.
    Simulate(Common),
    /// Apply one method to a scenario file and print the estimate as JSON.
    Estimate(Common),
    /// Write the posterior draws of a sampler method as CSV.
    Sample(Common),
    /// Run one of the simulation tables at desk scale.
    Reproduce(Reproduce),
    /// Plot MSE against p for each method from a long-format report.
    Report {
        /// Report written by `reproduce --long`.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Directory for the SVG files.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Reproduce {
    /// t1 .. t5
    table: Table,
    #[command(flatten)]
    common: Common,
    /// Replications per cell (at least 50; default 200)
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads; output does not depend on it
    #[arg(long)]
    workers: Option<usize>,
    /// Skip grid rows with p above this.
    #[arg(long)]
    max_p: Option<usize>,
    /// Sampler iterations per chain (burn-in is a fifth).
    #[arg(long)]
    iterations: Option<usize>,
    /// Also write the long-format report with provenance here.
    #[arg(long, value_name = "PATH")]
    long: Option<PathBuf>,
    /// Evaluate the table's expected patterns; exit 3 if any fails.
    #[arg(long)]
    check: bool,
}

const MIN_REPS: usize = 50;

enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) => 2,
            Self::Check(_) => 3,
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn config_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

// Library errors split into bad input (1) and numerical failures (2).
fn lib_err(e: tlshrink::Error) -> Failure {
    use tlshrink::Error as E;
    match e {
        E::InvalidInput(_) | E::LengthMismatch(..) | E::Io(_) | E::Csv(_) | E::Json(_) => {
            config_err(e)
        }
        _ => Failure::Numerical(e.into()),
    }
}

fn decode<T: DeserializeOwned>(v: Value, what: &str) -> Outcome<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        config_err(anyhow!("{what}: field `{path}`: {}", e.into_inner()))
    })
}

fn load(common: &Common) -> Outcome<Value> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| config_err(anyhow!("--config is required")))?;
    let mut v = read_json(path).map_err(config_err)?;
    take_schema_version(&mut v).map_err(config_err)?;
    apply_overrides(&mut v, &common.overrides).map_err(config_err)?;
    Ok(v)
}

fn output(path: Option<&Path>) -> Outcome<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .map_err(config_err)?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn simulate(common: &Common) -> Outcome<()> {
    let mut v = load(common)?;
    let file_seed = v.as_object_mut().and_then(|o| o.remove("seed"));
    let seed = match (common.seed, file_seed) {
        (Some(s), _) => s,
        (None, Some(s)) => s
            .as_u64()
            .ok_or_else(|| config_err(anyhow!("seed must be a nonnegative integer")))?,
        (None, None) => 0,
    };
    let cfg: ScenarioConfig = decode(v, "scenario config")?;
    let (truth, stats) = gen_replication(&cfg, &RngStream::new(seed, 0)).map_err(lib_err)?;
    match &common.out {
        Some(p) => export_scenario(p, &cfg, &truth, &stats).map_err(lib_err),
        None => write_scenario(std::io::stdout().lock(), &cfg, &truth, &stats).map_err(lib_err),
    }
}

fn estimate_config(common: &Common) -> Outcome<(EstimateConfig, tlshrink::SufficientStats)> {
    let mut v = load(common)?;
    if let Some(s) = common.seed {
        v["seed"] = s.into();
    }
    let mut cfg: EstimateConfig = decode(v, "estimate config")?;
    if cfg.scenario.is_relative() {
        if let Some(dir) = common.config.as_deref().and_then(Path::parent) {
            cfg.scenario = dir.join(&cfg.scenario);
        }
    }
    let (_, _, stats) = import_scenario(&cfg.scenario).map_err(lib_err)?;
    Ok((cfg, stats))
}

fn estimate(common: &Common) -> Outcome<()> {
    let (cfg, stats) = estimate_config(common)?;
    let settings = cfg.settings();
    let est = estimate_method(&settings, &cfg.method, &stats, RngStream::new(cfg.seed, 0))
        .map_err(lib_err)?;
    let mut out = output(common.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &est).map_err(config_err)?;
    writeln!(out).and_then(|_| out.flush()).map_err(config_err)
}

fn sample(common: &Common) -> Outcome<()> {
    let (cfg, stats) = estimate_config(common)?;
    let settings = cfg.settings();
    let draws = sample_method(&settings, &cfg.method, &stats, RngStream::new(cfg.seed, 0))
        .map_err(lib_err)?;
    let mut out = output(common.out.as_deref())?;
    write_draws(&mut out, &draws).map_err(lib_err)?;
    out.flush().map_err(config_err)
}

fn reproduce(args: &Reproduce) -> Outcome<()> {
    let c = &args.common;
    let opts = TableOptions {
        replications: args.reps.unwrap_or(TableOptions::default().replications),
        seed: c.seed.unwrap_or(0),
        max_p: args.max_p,
        iterations: args.iterations,
        workers: args.workers,
    };
    let mut v = serde_json::to_value(table_plan(args.table, &opts)).map_err(config_err)?;
    if let Some(path) = &c.config {
        let mut patch = read_json(path).map_err(config_err)?;
        take_schema_version(&mut patch).map_err(config_err)?;
        merge(&mut v, patch);
        // Flags given on the command line win over the file.
        let explicit = table_plan(args.table, &opts);
        for (flag, key, value) in [
            (
                c.seed.is_some(),
                "seed",
                serde_json::to_value(explicit.seed),
            ),
            (
                args.reps.is_some(),
                "replications",
                serde_json::to_value(explicit.replications),
            ),
            (
                args.workers.is_some(),
                "workers",
                serde_json::to_value(explicit.workers),
            ),
            (
                args.iterations.is_some(),
                "hs",
                serde_json::to_value(&explicit.hs),
            ),
            (
                args.iterations.is_some(),
                "pcp",
                serde_json::to_value(&explicit.pcp),
            ),
        ] {
            if flag {
                v[key] = value.map_err(config_err)?;
            }
        }
    }
    apply_overrides(&mut v, &c.overrides).map_err(config_err)?;
    let mut plan: ExperimentPlan = decode(v, "experiment plan")?;
    if let Some(m) = args.max_p {
        plan.scenarios.retain(|s| s.p <= m);
    }
    if plan.replications < MIN_REPS {
        return Err(config_err(anyhow!(
            "reproduce needs at least {MIN_REPS} replications, got {}",
            plan.replications
        )));
    }
    let rows = run_experiment(&plan).map_err(lib_err)?;
    if let Some(path) = &args.long {
        emit_report(&rows, path, plan.seed).map_err(lib_err)?;
    }
    let wide = wide_table(&rows);
    let mut out = output(c.out.as_deref())?;
    wide.write_csv(&mut out).map_err(lib_err)?;
    out.flush().map_err(config_err)?;

    let failed: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            r.error
                .as_ref()
                .map(|e| format!("p={} n2={} {}: {e}", r.p, r.n2, r.method))
        })
        .collect();
    if !failed.is_empty() {
        return Err(Failure::Numerical(anyhow!(
            "{} cell(s) failed:\n{}",
            failed.len(),
            failed.join("\n")
        )));
    }
    if args.check {
        let checks = check_table(args.table, &wide);
        for ck in &checks {
            let tag = if ck.passed { "PASS" } else { "FAIL" };
            eprintln!(
                "{tag} {}{}",
                ck.name,
                if ck.detail.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", ck.detail)
                }
            );
        }
        let bad = checks.iter().filter(|c| !c.passed).count();
        if bad > 0 {
            return Err(Failure::Check(format!(
                "{bad} of {} table check(s) failed",
                checks.len()
            )));
        }
    }
    Ok(())
}

fn report(input: &Path, out: &Path) -> Outcome<()> {
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))
        .map_err(config_err)?;
    let rows = read_report(&text).map_err(lib_err)?;
    if rows.is_empty() {
        return Err(config_err(anyhow!("{} has no data rows", input.display())));
    }
    for path in plot::plot_report(&rows, out).map_err(config_err)? {
        println!("{}", path.display());
    }
    Ok(())
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
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Estimate(c) => estimate(c),
        Command::Sample(c) => sample(c),
        Command::Reproduce(r) => reproduce(r),
        Command::Report { input, out } => report(input, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(e) => eprintln!("error: {e:#}"),
                Failure::Numerical(e) => eprintln!("numerical failure: {e:#}"),
                Failure::Check(msg) => eprintln!("check failed: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
