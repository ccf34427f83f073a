//! CSV and JSON export for batches, sweeps and causation traces.
//!
//! All files are written atomically (temp-then-rename) and all content is
//! deterministic for a fixed input: identical invocations produce
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::analytics::{BatchResult, SweepLevel};
use crate::causation::TraceAnalysis;
use crate::engine::RunOutput;

/// Column header for the per-iteration metrics CSV.
pub const ITERATION_CSV_HEADER: &str = "seed,total_loss,breaches,contacts,avoided,deterred,\
resisted,variance_events,detected_variance,loss_events,cascade_windows,mean_queue_depth";

/// Write `content` to `path` atomically: a crash never leaves a partial
/// file at the final name.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let tmp = path.with_extension(match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{ext}.tmp"),
        None => "tmp".to_string(),
    });
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// Per-iteration metrics as CSV, rows in seed-list order.
pub fn iterations_csv(batch: &BatchResult) -> String {
    let mut out = String::new();
    out.push_str(ITERATION_CSV_HEADER);
    out.push('\n');
    for m in &batch.iterations {
        let _ = writeln!(
            out,
            "{},{:.2},{},{},{},{},{},{},{},{},{},{:.6}",
            m.seed,
            m.total_loss,
            m.breach_count,
            m.contact_count,
            m.avoided_count,
            m.deterred_count,
            m.resisted_count,
            m.variance_event_count,
            m.detected_variance_count,
            m.loss_event_count,
            m.cascade_window_count,
            m.mean_queue_depth(),
        );
    }
    out
}

/// Batch aggregate document (excludes the per-iteration rows, which live in
/// the CSV).
#[derive(Serialize)]
struct BatchSummaryDoc<'a> {
    scenario_name: &'a str,
    n: usize,
    horizon: u64,
    aggregates: &'a crate::analytics::BatchAggregates,
}

pub fn batch_summary_json(batch: &BatchResult) -> String {
    to_json_pretty(&BatchSummaryDoc {
        scenario_name: &batch.scenario_name,
        n: batch.n,
        horizon: batch.horizon,
        aggregates: &batch.aggregates,
    })
}

/// Loss CDF over per-iteration losses: `loss,cumulative_probability`.
pub fn loss_cdf_csv(batch: &BatchResult) -> String {
    let mut losses: Vec<f64> = batch.iterations.iter().map(|m| m.total_loss).collect();
    losses.sort_by(f64::total_cmp);
    let n = losses.len() as f64;
    let mut out = String::from("loss,cumulative_probability\n");
    for (i, loss) in losses.iter().enumerate() {
        let _ = writeln!(out, "{loss:.2},{:.6}", (i + 1) as f64 / n);
    }
    out
}

/// Loss exceedance curve: `loss,exceedance_probability`.
pub fn loss_exceedance_csv(batch: &BatchResult) -> String {
    let mut losses: Vec<f64> = batch.iterations.iter().map(|m| m.total_loss).collect();
    losses.sort_by(f64::total_cmp);
    let n = losses.len() as f64;
    let mut out = String::from("loss,exceedance_probability\n");
    for (i, loss) in losses.iter().enumerate() {
        let _ = writeln!(out, "{loss:.2},{:.6}", 1.0 - (i + 1) as f64 / n);
    }
    out
}

/// Monthly queue-depth percentile bands: `month,p5,p50,p95,mean`.
pub fn queue_depth_bands_csv(batch: &BatchResult) -> String {
    let mut out = String::from("month,p5,p50,p95,mean\n");
    for b in &batch.aggregates.queue_depth_bands {
        let _ = writeln!(out, "{},{:.6},{:.6},{:.6},{:.6}", b.month, b.p5, b.p50, b.p95, b.mean);
    }
    out
}

/// Threat-funnel stage counts: `stage,mean_count`.
pub fn funnel_csv(batch: &BatchResult) -> String {
    let a = &batch.aggregates;
    let mut out = String::from("stage,mean_count\n");
    let _ = writeln!(out, "contacts,{:.4}", a.mean_contacts);
    let _ = writeln!(out, "avoided,{:.4}", a.mean_avoided);
    let _ = writeln!(out, "deterred,{:.4}", a.mean_deterred);
    let _ = writeln!(out, "resisted,{:.4}", a.mean_resisted);
    let _ = writeln!(out, "breached,{:.4}", a.mean_breaches);
    out
}

/// Per-control divergence table: `control_id,analytical,emergent,divergence_pp`.
pub fn divergence_csv(batch: &BatchResult) -> String {
    let mut out = String::from("control_id,analytical_opeff,emergent_opeff,divergence_pp\n");
    for d in &batch.aggregates.per_control_divergence {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.4}",
            d.control_id, d.analytical, d.emergent_mean, d.divergence_pp
        );
    }
    out
}

/// Sweep summary CSV: one row per level.
pub fn sweep_csv(levels: &[SweepLevel]) -> String {
    let mut out = String::from(
        "level,mean_ale,median_ale,p95_ale,p99_ale,max_ale,breach_fraction,mean_breaches,\
median_lec_divergence_pp,cascade_prevalence\n",
    );
    for l in levels {
        let a = &l.batch.aggregates;
        let _ = writeln!(
            out,
            "{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.6},{:.4},{:.4},{:.6}",
            l.level,
            a.ale.mean,
            a.ale.median,
            a.ale.p95,
            a.ale.p99,
            a.ale.max,
            a.ale.breach_fraction,
            a.mean_breaches,
            a.median_lec_divergence_pp,
            a.cascade_prevalence,
        );
    }
    out
}

#[derive(Serialize)]
struct SweepLevelDoc<'a> {
    level: f64,
    scenario_name: &'a str,
    n: usize,
    aggregates: &'a crate::analytics::BatchAggregates,
}

pub fn sweep_json(levels: &[SweepLevel]) -> String {
    let docs: Vec<SweepLevelDoc> = levels
        .iter()
        .map(|l| SweepLevelDoc {
            level: l.level,
            scenario_name: &l.batch.scenario_name,
            n: l.batch.n,
            aggregates: &l.batch.aggregates,
        })
        .collect();
    to_json_pretty(&docs)
}

/// One self-contained trace document per run: the ledger plus the full
/// causation analysis.
#[derive(Serialize)]
pub struct TraceDocument<'a> {
    pub scenario_name: &'a str,
    pub seed: u64,
    pub horizon: u64,
    pub counters: &'a crate::engine::RunCounters,
    pub ledger: &'a crate::ledger::EventLedger,
    pub chains: &'a [crate::causation::CausationChain],
    pub cascade_windows: &'a [crate::causation::CascadeWindow],
    pub linchpins: &'a [crate::causation::LinchpinEntry],
    pub completeness: &'a crate::causation::CompletenessReport,
}

pub fn trace_json(run: &RunOutput, analysis: &TraceAnalysis) -> String {
    to_json_pretty(&TraceDocument {
        scenario_name: &run.scenario_name,
        seed: run.seed,
        horizon: run.horizon,
        counters: &run.counters,
        ledger: &run.ledger,
        chains: &analysis.chains,
        cascade_windows: &analysis.cascade_windows,
        linchpins: &analysis.linchpins,
        completeness: &analysis.completeness,
    })
}
