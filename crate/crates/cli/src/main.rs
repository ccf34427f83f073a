//! Command-line front end: validate scenarios, run single traces, run
//! batches and sweeps, and export causation traces and plot-ready data.
//!
//! Outputs are written atomically and are byte-identical for identical
//! invocations, independent of `--jobs`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use faircam_core::analytics::{self, SweepFactor};
use faircam_core::causation;
use faircam_core::engine;
use faircam_core::report;
use faircam_core::{validate_scenario, Scenario};

#[derive(Parser)]
#[command(name = "faircam", version, about = "Agent-based FAIR-CAM control-physiology simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Horizon override in ticks (hours).
    #[arg(long)]
    horizon: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario for structural errors and warnings.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run one seeded simulation and print a summary.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the full causation trace JSON.
        #[arg(long)]
        export_trace: bool,
    },
    /// Run one seed and export the full causation trace (shorthand for
    /// `run --export-trace`).
    Trace {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo batch over a seed list.
    Batch {
        #[command(flatten)]
        common: CommonArgs,
        /// Seed range `a..b` (inclusive) or explicit list `1,2,3`.
        #[arg(long)]
        seeds: String,
        /// Worker threads for parallel seeds (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Per-iteration table format.
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
    },
    /// One-factor-at-a-time sweep with common random numbers.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        seeds: String,
        /// Swept factor: budget_hours | extrinsic_rate.
        #[arg(long)]
        factor: String,
        /// Comma-separated levels, e.g. `2,5,10,20,40,80,160`.
        #[arg(long)]
        levels: String,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            // Validation problems exit 1; runtime failures exit 2.
            if e.is::<ValidationFailed>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Validate { scenario } => {
            let s = match load_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(ExitCode::from(1));
                }
            };
            let report = validate_scenario(&s);
            print!("{report}");
            if report.is_runnable() {
                println!(
                    "scenario '{}': {} agents, {} edges, horizon {} ticks",
                    s.name,
                    s.agents.len(),
                    s.edges.len(),
                    s.horizon_ticks
                );
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Run { common, seed, export_trace } => {
            run_single(&common, seed, export_trace)
        }
        Command::Trace { common, seed } => run_single(&common, seed, true),
        Command::Batch { common, seeds, jobs, format } => {
            let s = load_validated(&common.scenario)?;
            let seeds = parse_seeds(&seeds)?;
            let batch = with_jobs(jobs, || {
                analytics::run_batch(&s, &seeds, common.horizon)
            })?;
            if format == "json" {
                report::write_atomic(
                    &common.out.join("batch_iterations.json"),
                    &report::to_json_pretty(&batch.iterations),
                )?;
            } else {
                report::write_atomic(
                    &common.out.join("batch_iterations.csv"),
                    &report::iterations_csv(&batch),
                )?;
            }
            report::write_atomic(
                &common.out.join("batch_summary.json"),
                &report::batch_summary_json(&batch),
            )?;
            report::write_atomic(&common.out.join("loss_cdf.csv"), &report::loss_cdf_csv(&batch))?;
            report::write_atomic(
                &common.out.join("loss_exceedance.csv"),
                &report::loss_exceedance_csv(&batch),
            )?;
            report::write_atomic(
                &common.out.join("queue_depth_bands.csv"),
                &report::queue_depth_bands_csv(&batch),
            )?;
            report::write_atomic(&common.out.join("funnel.csv"), &report::funnel_csv(&batch))?;
            report::write_atomic(
                &common.out.join("divergence.csv"),
                &report::divergence_csv(&batch),
            )?;
            let a = &batch.aggregates;
            println!(
                "batch '{}': n={} mean_ale=${:.2} median=${:.2} p99=${:.2} breach_fraction={:.4}",
                batch.scenario_name, batch.n, a.ale.mean, a.ale.median, a.ale.p99, a.ale.breach_fraction,
            );
            println!("outputs in {}", common.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { common, seeds, factor, levels, jobs } => {
            let s = load_validated(&common.scenario)?;
            let seeds = parse_seeds(&seeds)?;
            let factor = SweepFactor::parse(&factor)?;
            let levels = parse_levels(&levels)?;
            let swept = with_jobs(jobs, || {
                analytics::sweep(&s, factor, &levels, &seeds, common.horizon)
            })?;
            report::write_atomic(&common.out.join("sweep.csv"), &report::sweep_csv(&swept))?;
            report::write_atomic(&common.out.join("sweep.json"), &report::sweep_json(&swept))?;
            for level in &swept {
                let a = &level.batch.aggregates;
                println!(
                    "level {:>8}: mean_ale=${:.2} breach_fraction={:.4} median_divergence={:.2}pp",
                    level.level, a.ale.mean, a.ale.breach_fraction, a.median_lec_divergence_pp,
                );
            }
            println!("outputs in {}", common.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_single(
    common: &CommonArgs,
    seed: u64,
    export_trace: bool,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let s = load_validated(&common.scenario)?;
    let compiled = engine::compile(&s)?;
    let out = engine::Engine::new(&compiled, seed, common.horizon).run();
    let analysis = causation::analyze(&out.ledger, &compiled, out.horizon);
    let c = &out.counters;
    println!(
        "run '{}' seed {} horizon {}: contacts={} avoided={} deterred={} resisted={} breaches={}",
        out.scenario_name, out.seed, out.horizon, c.contacts, c.avoided, c.deterred, c.resisted, c.breaches,
    );
    println!(
        "  variance_events={} detected={} losses={} total_loss=${:.2}",
        c.variance_events, c.detected_variance, c.loss_events, c.total_loss,
    );
    println!(
        "  ledger_events={} cascade_windows={} completeness={}/{}",
        out.ledger.len(),
        analysis.cascade_windows.len(),
        analysis.completeness.passed,
        analysis.completeness.passed + analysis.completeness.failed.len(),
    );
    if export_trace {
        let path = common.out.join(format!("trace_seed{seed}.json"));
        report::write_atomic(&path, &report::trace_json(&out, &analysis))?;
        println!("trace written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn load_scenario(path: &Path) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Scenario::from_json(&text).map_err(|e| e.to_string())
}

/// Load and validate; validation errors are a distinct failure class
/// (exit 1) handled by the caller via this error type.
fn load_validated(path: &Path) -> Result<Scenario, Box<dyn std::error::Error>> {
    let s = load_scenario(path).map_err(ValidationFailed)?;
    let report = validate_scenario(&s);
    if !report.is_runnable() {
        return Err(Box::new(ValidationFailed(report.to_string())));
    }
    Ok(s)
}

#[derive(Debug)]
struct ValidationFailed(String);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ValidationFailed {}

fn with_jobs<T, E>(jobs: Option<usize>, f: impl FnOnce() -> Result<T, E> + Send) -> Result<T, E>
where
    T: Send,
    E: Send,
{
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}

/// `a..b` inclusive ranges and explicit comma lists.
fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range '{spec}'"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range '{spec}'"))?;
        if b < a {
            return Err(format!("empty seed range '{spec}'"));
        }
        return Ok((a..=b).collect());
    }
    let seeds: Result<Vec<u64>, _> = spec.split(',').map(|t| t.trim().parse::<u64>()).collect();
    let seeds = seeds.map_err(|_| format!("bad seed list '{spec}'"))?;
    if seeds.is_empty() {
        return Err("seed list is empty".to_string());
    }
    Ok(seeds)
}

fn parse_levels(spec: &str) -> Result<Vec<f64>, String> {
    let levels: Result<Vec<f64>, _> = spec.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let levels = levels.map_err(|_| format!("bad levels '{spec}'"))?;
    if levels.is_empty() {
        return Err("levels list is empty".to_string());
    }
    Ok(levels)
}
