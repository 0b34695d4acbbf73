//! Command-line front end: `generate`, `run` and `bench`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 divergence, 4
//! persistence-of-excitation failure, 1 anything else.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::load_config;
use crate::error::{Error, Result};
use crate::experiment::{
    bench_products, default_bench_sizes, emit_trace, generate_dataset, loglog_slope, run_with_dataset,
    write_bench_csv, BenchSize, Dataset, ExperimentConfig, Manifest, MANIFEST_FILE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_PERSISTENCE: i32 = 4;

pub const TRACE_FILE: &str = "trace.csv";
pub const BENCH_FILE: &str = "bench.csv";

#[derive(Debug, Parser)]
#[command(name = "odeepc", version, about = "Online data-enabled predictive control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a random plant and a persistently exciting dataset.
    Generate(CommonArgs),
    /// Run the controller in closed loop and write its trace.
    Run(RunArgs),
    /// Time FFT against dense Hankel products.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Complete configuration file; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Base seed; the four streams are derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Start from the small profile instead of the full-size defaults.
    #[arg(long)]
    pub small: bool,
    /// `key=value` or `section.key=value`; repeatable, applied last.
    #[arg(long = "override", value_name = "K=V")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = ["odeepc", "gradient-deepc"])]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
        Error::Divergence { .. } | Error::PlantDivergence(_) => EXIT_DIVERGENCE,
        Error::NotPersistentlyExciting { .. } | Error::GenerationFailed { .. } => EXIT_PERSISTENCE,
        _ => EXIT_OTHER,
    }
}

fn config_for(args: &CommonArgs, extra: &[String]) -> Result<ExperimentConfig> {
    let mut overrides = args.overrides.clone();
    overrides.extend_from_slice(extra);
    load_config(args.config.as_deref(), args.small, args.seed, &overrides)
}

fn generate(args: &CommonArgs) -> Result<i32> {
    let cfg = config_for(args, &[])?;
    let dataset = generate_dataset(&cfg)?;
    dataset.write(&args.out, &cfg)?;
    println!(
        "dataset T={} rank {}/{} after {} attempt(s) -> {}",
        cfg.dataset_len(),
        dataset.persistence.rank,
        dataset.persistence.rows,
        dataset.attempts,
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn load_or_generate(cfg: &ExperimentConfig, dir: &Path) -> Result<Dataset> {
    if Dataset::exists(dir) {
        let dataset = Dataset::read(dir, cfg.t_tot())?;
        if dataset.inputs.dim() != cfg.plant.inputs || dataset.outputs.dim() != cfg.plant.outputs {
            return Err(Error::Config(format!(
                "dataset in {} does not match the configured dimensions",
                dir.display()
            )));
        }
        Ok(dataset)
    } else {
        let dataset = generate_dataset(cfg)?;
        dataset.write(dir, cfg)?;
        Ok(dataset)
    }
}

fn run(args: &RunArgs) -> Result<i32> {
    let extra: Vec<String> = args.mode.iter().map(|m| format!("controller.mode={m}")).collect();
    let cfg = config_for(&args.common, &extra)?;
    let dir = &args.common.out;
    std::fs::create_dir_all(dir)?;
    let dataset = load_or_generate(&cfg, dir)?;
    let outcome = run_with_dataset(&cfg, &dataset)?;
    let manifest = outcome.manifest(&cfg, &dataset);
    emit_trace(&outcome.trace, dir.join(TRACE_FILE), &manifest)?;
    manifest.write(dir.join(MANIFEST_FILE))?;
    let last = outcome.trace.records.last();
    println!(
        "{} alpha={:.3e} iterations={} final cost={:.3e} violation={:.3e}",
        cfg.controller.mode,
        outcome.alpha,
        outcome.trace.len(),
        last.map_or(f64::NAN, |r| r.cost),
        last.map_or(f64::NAN, |r| r.violation),
    );
    match outcome.halted {
        None => Ok(EXIT_OK),
        Some(e) => {
            eprintln!("run halted: {e}");
            Ok(exit_code(&e))
        }
    }
}

fn bench(args: &BenchArgs) -> Result<i32> {
    let cfg = config_for(&args.common, &[])?;
    let mut sizes: Vec<BenchSize> = default_bench_sizes()
        .into_iter()
        .filter(|s| s.d == 1 && (!args.common.small || s.depth <= 1 << 12))
        .collect();
    sizes.push(BenchSize {
        d: cfg.plant.inputs + cfg.plant.outputs,
        depth: cfg.t_tot(),
        kappa: cfg.controller.kappa,
    });
    let rows = bench_products(&sizes, args.trials, cfg.seeds.excitation)?;
    std::fs::create_dir_all(&args.common.out)?;
    write_bench_csv(&rows, args.common.out.join(BENCH_FILE))?;
    Manifest::new("bench", &cfg).write(args.common.out.join(MANIFEST_FILE))?;
    for r in &rows {
        let speedup = r.speedup().map_or("-".into(), |s| format!("{s:.2}x"));
        println!(
            "d={:<3} L={:<6} kappa={:<6} fast={:.4} ms dense={} speedup={}",
            r.d,
            r.depth,
            r.kappa,
            r.fast_ms,
            r.dense_ms.map_or("-".into(), |d| format!("{d:.4} ms")),
            speedup
        );
    }
    let scalar: Vec<_> = rows.iter().filter(|r| r.d == 1).collect();
    if scalar.len() >= 2 {
        let x: Vec<f64> = scalar.iter().map(|r| r.depth as f64).collect();
        let y: Vec<f64> = scalar.iter().map(|r| r.fast_ms).collect();
        println!("fast-path log-log slope {:.3}", loglog_slope(&x, &y));
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

