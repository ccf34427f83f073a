//! Monte Carlo ensemble execution and statistics: emergent-vs-analytical
//! operational efficacy divergence, ALE summaries, factor sweeps, bootstrap
//! confidence intervals, paired-seed comparisons and convergence
//! diagnostics.
//!
//! Batches are embarrassingly parallel across seeds. Aggregation folds
//! results in seed order, so a batch is deterministic for a fixed seed list
//! regardless of thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::causation;
use crate::engine::{self, Compiled, ControlDomain, RunOutput};
use crate::scenario::Scenario;
use crate::stochastic::RngStream;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("paired batches must share an identical seed list")]
    SeedMismatch,
    #[error("unknown sweep factor '{0}'")]
    UnknownFactor(String),
}

// ============================================================================
// Per-iteration metrics
// ============================================================================

#[derive(Debug, Clone, Serialize)]
pub struct ControlIterationStats {
    pub ticks_normal: u64,
    pub ticks_variant: u64,
    pub ticks_remediating: u64,
    pub time_weighted_opeff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationMetrics {
    pub seed: u64,
    pub total_loss: f64,
    pub breach_count: u64,
    pub contact_count: u64,
    pub avoided_count: u64,
    pub deterred_count: u64,
    pub resisted_count: u64,
    pub variance_event_count: u64,
    pub detected_variance_count: u64,
    pub loss_event_count: u64,
    pub per_control: BTreeMap<String, ControlIterationStats>,
    /// Time-averaged queue depth per 730-tick month.
    pub queue_depth_series: Vec<f64>,
    pub cascade_window_count: u64,
    pub cascade_window_hours: f64,
    pub completeness_passed: usize,
    pub completeness_failed: usize,
}

impl IterationMetrics {
    pub fn from_run(out: &RunOutput, analysis: &causation::TraceAnalysis) -> Self {
        let per_control = out
            .control_stats
            .iter()
            .map(|c| {
                (
                    c.control_id.clone(),
                    ControlIterationStats {
                        ticks_normal: c.ticks_normal,
                        ticks_variant: c.ticks_variant,
                        ticks_remediating: c.ticks_remediating,
                        time_weighted_opeff: c.time_weighted_opeff,
                    },
                )
            })
            .collect();
        IterationMetrics {
            seed: out.seed,
            total_loss: out.counters.total_loss,
            breach_count: out.counters.breaches,
            contact_count: out.counters.contacts,
            avoided_count: out.counters.avoided,
            deterred_count: out.counters.deterred,
            resisted_count: out.counters.resisted,
            variance_event_count: out.counters.variance_events,
            detected_variance_count: out.counters.detected_variance,
            loss_event_count: out.counters.loss_events,
            per_control,
            queue_depth_series: out.queue_depth_monthly.clone(),
            cascade_window_count: analysis.cascade_windows.len() as u64,
            cascade_window_hours: analysis
                .cascade_windows
                .iter()
                .map(|w| (w.end_tick - w.start_tick) as f64)
                .sum(),
            completeness_passed: analysis.completeness.passed,
            completeness_failed: analysis.completeness.failed.len(),
        }
    }

    pub fn mean_queue_depth(&self) -> f64 {
        if self.queue_depth_series.is_empty() {
            0.0
        } else {
            self.queue_depth_series.iter().sum::<f64>() / self.queue_depth_series.len() as f64
        }
    }
}

// ============================================================================
// Batch results
// ============================================================================

#[derive(Debug, Clone, Serialize)]
pub struct AleSummary {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
    /// Fraction of iterations with at least one breach.
    pub breach_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlDivergence {
    pub control_id: String,
    pub analytical: f64,
    pub emergent_mean: f64,
    /// Emergent minus analytical, in percentage points.
    pub divergence_pp: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueueDepthBand {
    pub month: usize,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchAggregates {
    pub ale: AleSummary,
    pub mean_breaches: f64,
    pub mean_contacts: f64,
    pub mean_avoided: f64,
    pub mean_deterred: f64,
    pub mean_resisted: f64,
    pub mean_variance_events: f64,
    pub mean_detected_variance: f64,
    pub per_control_divergence: Vec<ControlDivergence>,
    /// Median divergence over LECs with analytical OpEff strictly in (0,1).
    pub median_lec_divergence_pp: f64,
    pub queue_depth_bands: Vec<QueueDepthBand>,
    /// Fraction of iterations with at least one cascade window.
    pub cascade_prevalence: f64,
    pub mean_cascade_windows: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchResult {
    pub scenario_name: String,
    pub n: usize,
    pub horizon: u64,
    pub iterations: Vec<IterationMetrics>,
    pub aggregates: BatchAggregates,
}

/// One independent engine run per seed; deterministic for a fixed seed list
/// regardless of parallelism (results are reduced in seed-list order).
pub fn run_batch(
    scenario: &Scenario,
    seeds: &[u64],
    horizon: Option<u64>,
) -> Result<BatchResult, AnalyticsError> {
    let compiled = engine::compile(scenario)?;
    let iterations: Vec<IterationMetrics> = seeds
        .par_iter()
        .map(|&seed| {
            let out = engine::Engine::new(&compiled, seed, horizon).run();
            let analysis = causation::analyze(&out.ledger, &compiled, out.horizon);
            IterationMetrics::from_run(&out, &analysis)
        })
        .collect();
    let aggregates = aggregate(&compiled, &iterations)?;
    Ok(BatchResult {
        scenario_name: scenario.name.clone(),
        n: iterations.len(),
        horizon: horizon.unwrap_or(scenario.horizon_ticks),
        iterations,
        aggregates,
    })
}

/// Recompute batch aggregates from stored per-iteration metrics. Feeding a
/// batch's own iterations back in reproduces its aggregates exactly: no
/// aggregate is free-floating.
pub fn recompute_aggregates(
    scenario: &Scenario,
    iterations: &[IterationMetrics],
) -> Result<BatchAggregates, AnalyticsError> {
    let compiled = engine::compile(scenario)?;
    aggregate(&compiled, iterations)
}

fn aggregate(
    compiled: &Compiled,
    iterations: &[IterationMetrics],
) -> Result<BatchAggregates, AnalyticsError> {
    if iterations.is_empty() {
        return Err(AnalyticsError::EmptyBatch);
    }
    let n = iterations.len() as f64;
    let mean = |f: &dyn Fn(&IterationMetrics) -> f64| -> f64 {
        iterations.iter().map(f).sum::<f64>() / n
    };

    let losses: Vec<f64> = iterations.iter().map(|m| m.total_loss).collect();
    let breach_fraction =
        iterations.iter().filter(|m| m.breach_count > 0).count() as f64 / n;
    let ale = ale_summary_with_fraction(&losses, breach_fraction)?;

    let per_control_divergence = divergence_per_control(compiled, iterations);
    let median_lec_divergence_pp = median_lec_divergence(compiled, &per_control_divergence);

    let months = iterations.iter().map(|m| m.queue_depth_series.len()).max().unwrap_or(0);
    let mut queue_depth_bands = Vec::with_capacity(months);
    for month in 0..months {
        let mut depths: Vec<f64> = iterations
            .iter()
            .map(|m| m.queue_depth_series.get(month).copied().unwrap_or(0.0))
            .collect();
        depths.sort_by(f64::total_cmp);
        queue_depth_bands.push(QueueDepthBand {
            month,
            p5: nearest_rank(&depths, 0.05),
            p50: nearest_rank(&depths, 0.50),
            p95: nearest_rank(&depths, 0.95),
            mean: depths.iter().sum::<f64>() / depths.len() as f64,
        });
    }

    Ok(BatchAggregates {
        ale,
        mean_breaches: mean(&|m| m.breach_count as f64),
        mean_contacts: mean(&|m| m.contact_count as f64),
        mean_avoided: mean(&|m| m.avoided_count as f64),
        mean_deterred: mean(&|m| m.deterred_count as f64),
        mean_resisted: mean(&|m| m.resisted_count as f64),
        mean_variance_events: mean(&|m| m.variance_event_count as f64),
        mean_detected_variance: mean(&|m| m.detected_variance_count as f64),
        per_control_divergence,
        median_lec_divergence_pp,
        queue_depth_bands,
        cascade_prevalence: iterations.iter().filter(|m| m.cascade_window_count > 0).count() as f64
            / n,
        mean_cascade_windows: mean(&|m| m.cascade_window_count as f64),
    })
}

// ============================================================================
// Emergent vs analytical divergence
// ============================================================================

/// Analytical stationary reliability: MTBF / (MTBF + expected episode),
/// with MTBF the mean of the change-frequency distribution and the episode
/// the expected detect + queue + repair duration under an unconstrained
/// budget (queue wait zero).
fn analytical_reliability(compiled: &Compiled, control: usize) -> f64 {
    let def = &compiled.controls[control];
    let mtbf = def.change_frequency_dist.mean();
    // Expected detection delay: best monitoring VMC, assumed healthy.
    // Sweeps at mean interval I succeeding with probability p give an
    // expected flag time of I * (1/p - 1/2).
    let detect = def
        .monitored_by
        .iter()
        .filter_map(|&v| compiled.controls[v].vmc.as_ref().filter(|x| x.is_monitoring))
        .map(|view| {
            let interval = view.sweep_interval_dist.mean();
            if view.detection_probability <= 0.0 {
                f64::INFINITY
            } else {
                interval * (1.0 / view.detection_probability - 0.5)
            }
        })
        .fold(f64::INFINITY, f64::min);
    let repair = def.cost_hours * compiled.budget.culture_duration_multiplier
        + compiled.budget.backtrack_delay_hours;
    // An unmonitored control never recovers; cap the episode at the horizon.
    let episode = (detect + repair).min(compiled.horizon_ticks as f64);
    mtbf / (mtbf + episode)
}

/// Emergent-vs-analytical operational efficacy for a finished batch:
/// per-control rows plus the median divergence across fractional-efficacy
/// LECs, in percentage points.
pub fn emergent_opeff_divergence(
    batch: &BatchResult,
    scenario: &Scenario,
) -> Result<(Vec<ControlDivergence>, f64), AnalyticsError> {
    let compiled = engine::compile(scenario)?;
    let rows = divergence_per_control(&compiled, &batch.iterations);
    let median = median_lec_divergence(&compiled, &rows);
    Ok((rows, median))
}

/// Analytical OpEff per control (Cov = 1, distribution means) next to the
/// emergent mean of per-iteration time-weighted OpEff.
pub fn divergence_per_control(
    compiled: &Compiled,
    iterations: &[IterationMetrics],
) -> Vec<ControlDivergence> {
    let n = iterations.len().max(1) as f64;
    compiled
        .controls
        .iter()
        .enumerate()
        .map(|(ci, def)| {
            let int_eff = def.intended_efficacy_dist.mean();
            let var_eff = if def.is_binary { 0.0 } else { int_eff / 2.0 };
            let rel = analytical_reliability(compiled, ci);
            let analytical = engine::analytical_opeff(1.0, rel, int_eff, var_eff);
            let emergent_mean = iterations
                .iter()
                .map(|m| m.per_control.get(&def.id).map_or(0.0, |c| c.time_weighted_opeff))
                .sum::<f64>()
                / n;
            ControlDivergence {
                control_id: def.id.clone(),
                analytical,
                emergent_mean,
                divergence_pp: (emergent_mean - analytical) * 100.0,
            }
        })
        .collect()
}

/// Median divergence across fractional-efficacy LECs (analytical strictly
/// inside (0,1)); VMCs and DSCs are excluded.
pub fn median_lec_divergence(compiled: &Compiled, divergences: &[ControlDivergence]) -> f64 {
    let mut values: Vec<f64> = divergences
        .iter()
        .filter(|d| {
            compiled
                .control_index(&d.control_id)
                .map(|ci| matches!(compiled.controls[ci].domain, ControlDomain::Lec(_)))
                .unwrap_or(false)
                && d.analytical > 0.0
                && d.analytical < 1.0
        })
        .map(|d| d.divergence_pp)
        .collect();
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    median_sorted(&values)
}

// ============================================================================
// Summary statistics
// ============================================================================

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        // Midpoint convention for even n.
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Nearest-rank percentile on a sorted slice: the ceil(q*n)-th order
/// statistic.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// ALE distribution summary: nearest-rank percentiles, midpoint median.
pub fn ale_summary(losses: &[f64], breach_fraction: f64) -> Result<AleSummary, AnalyticsError> {
    ale_summary_with_fraction(losses, breach_fraction)
}

fn ale_summary_with_fraction(
    losses: &[f64],
    breach_fraction: f64,
) -> Result<AleSummary, AnalyticsError> {
    if losses.is_empty() {
        return Err(AnalyticsError::EmptyBatch);
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(AleSummary {
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median: median_sorted(&sorted),
        p95: nearest_rank(&sorted, 0.95),
        p99: nearest_rank(&sorted, 0.99),
        max: *sorted.last().unwrap(),
        breach_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Median,
}

fn eval_statistic(stat: Statistic, values: &mut [f64]) -> f64 {
    match stat {
        Statistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Statistic::Median => {
            values.sort_by(f64::total_cmp);
            median_sorted(values)
        }
    }
}

/// Percentile-method nonparametric bootstrap confidence interval, seeded
/// and deterministic.
pub fn bootstrap_ci(
    samples: &[f64],
    statistic: Statistic,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), AnalyticsError> {
    if samples.len() < 2 {
        return Err(AnalyticsError::TooFewSamples(samples.len()));
    }
    let mut rng = RngStream::new(seed, "bootstrap");
    let mut stats = Vec::with_capacity(resamples);
    let mut resample = vec![0.0; samples.len()];
    for _ in 0..resamples {
        for slot in resample.iter_mut() {
            *slot = samples[rng.pick_index(samples.len())];
        }
        stats.push(eval_statistic(statistic, &mut resample));
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((nearest_rank(&stats, alpha), nearest_rank(&stats, 1.0 - alpha)))
}

#[derive(Debug, Clone, Serialize)]
pub struct PairedDelta {
    pub delta_mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Which per-iteration metric a paired comparison runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairedMetric {
    TotalLoss,
    Breaches,
    MeanQueueDepth,
}

fn metric_value(metric: PairedMetric, m: &IterationMetrics) -> f64 {
    match metric {
        PairedMetric::TotalLoss => m.total_loss,
        PairedMetric::Breaches => m.breach_count as f64,
        PairedMetric::MeanQueueDepth => m.mean_queue_depth(),
    }
}

/// Paired-seed comparison: per-seed differences (b - a) bootstrapped as one
/// sample.
pub fn paired_delta(
    batch_a: &BatchResult,
    batch_b: &BatchResult,
    metric: PairedMetric,
    resamples: usize,
    seed: u64,
) -> Result<PairedDelta, AnalyticsError> {
    let seeds_a: Vec<u64> = batch_a.iterations.iter().map(|m| m.seed).collect();
    let seeds_b: Vec<u64> = batch_b.iterations.iter().map(|m| m.seed).collect();
    if seeds_a != seeds_b {
        return Err(AnalyticsError::SeedMismatch);
    }
    let diffs: Vec<f64> = batch_a
        .iterations
        .iter()
        .zip(&batch_b.iterations)
        .map(|(a, b)| metric_value(metric, b) - metric_value(metric, a))
        .collect();
    let delta_mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let (ci_lo, ci_hi) = bootstrap_ci(&diffs, Statistic::Mean, resamples, 0.95, seed)?;
    Ok(PairedDelta { delta_mean, ci_lo, ci_hi })
}

// ============================================================================
// Sweeps
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFactor {
    BudgetHours,
    ExtrinsicRate,
}

impl SweepFactor {
    pub fn parse(name: &str) -> Result<Self, AnalyticsError> {
        match name {
            "budget_hours" => Ok(SweepFactor::BudgetHours),
            "extrinsic_rate" => Ok(SweepFactor::ExtrinsicRate),
            other => Err(AnalyticsError::UnknownFactor(other.to_string())),
        }
    }
}

/// Clone the scenario with one factor overridden.
pub fn apply_factor(scenario: &Scenario, factor: SweepFactor, level: f64) -> Scenario {
    let mut s = scenario.clone();
    match factor {
        SweepFactor::BudgetHours => s.budget_policy.hours_per_month = level,
        SweepFactor::ExtrinsicRate => s.variance_policy.extrinsic_rate_per_year = level,
    }
    s
}

#[derive(Debug, Serialize)]
pub struct SweepLevel {
    pub level: f64,
    pub batch: BatchResult,
}

/// One-factor-at-a-time sweep with common random numbers: the same seed
/// list at every level, only the swept factor differing.
pub fn sweep(
    scenario: &Scenario,
    factor: SweepFactor,
    levels: &[f64],
    seeds: &[u64],
    horizon: Option<u64>,
) -> Result<Vec<SweepLevel>, AnalyticsError> {
    levels
        .iter()
        .map(|&level| {
            let overridden = apply_factor(scenario, factor, level);
            run_batch(&overridden, seeds, horizon).map(|batch| SweepLevel { level, batch })
        })
        .collect()
}

// ============================================================================
// Convergence
// ============================================================================

#[derive(Debug, Clone, Serialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub cv_of_mean_ale: f64,
}

/// Coefficient of variation of mean ALE on growing prefixes, estimated by
/// bootstrap.
pub fn convergence_cv(
    losses_in_seed_order: &[f64],
    prefix_sizes: &[usize],
    resamples: usize,
    seed: u64,
) -> Vec<ConvergencePoint> {
    let mut points = Vec::new();
    for &n in prefix_sizes {
        let n = n.min(losses_in_seed_order.len());
        if n < 2 {
            continue;
        }
        let prefix = &losses_in_seed_order[..n];
        let mut rng = RngStream::new(seed, "convergence");
        let mut means = Vec::with_capacity(resamples);
        for _ in 0..resamples {
            let mut sum = 0.0;
            for _ in 0..n {
                sum += prefix[rng.pick_index(n)];
            }
            means.push(sum / n as f64);
        }
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / means.len() as f64;
        let cv = if m.abs() < f64::EPSILON { 0.0 } else { var.sqrt() / m.abs() };
        points.push(ConvergencePoint { n, cv_of_mean_ale: cv });
    }
    points
}

/// Spearman rank correlation; ties get midranks.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let mut ranks = vec![0.0; vals.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && vals[idx[j + 1]] == vals[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let mx = rx.iter().sum::<f64>() / n as f64;
    let my = ry.iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..n {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
