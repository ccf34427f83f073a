//! Single-run simulation engine: the nine-step hourly tick pipeline over
//! runtime control state.
//!
//! Each tick executes, in order: (1) personnel behavior update (inert in
//! this version), (2) OpEx accrual, (3) extrinsic variance, (4) intrinsic
//! variance including monthly personnel checks, (5) VMC detection sweeps,
//! (6) realization of pending losses, (7) remediation completion and queue
//! starts, (8) threat contact processing, (9) metrics collection.
//! Remediation precedes contacts so a control completing repair in tick t
//! contributes its intended efficacy to contacts resolved in the same tick.
//!
//! A run is strictly single-threaded over its mutable state; batches run
//! many engines in parallel with no shared mutable state.

mod compiled;
mod queue;

pub use compiled::{compile, Compiled, ControlDef, ControlDomain, TechAssetDef};
pub use queue::{QueueItem, RemediationQueue};

use serde::Serialize;

use crate::ledger::{
    EventId, EventKind, EventLedger, EventPayload, PathControlSnapshot, VarianceSource,
};
use crate::scenario::{
    ActorType, AssetKind, BudgetCadence, ControlType, Scenario, ScenarioError,
};
use crate::stochastic::RngStream;

/// Months are 730 ticks and quarters 2190 (8760 / 12): uniform cycles keep
/// budget arithmetic deterministic.
pub const TICKS_PER_MONTH: u64 = 730;
pub const TICKS_PER_QUARTER: u64 = 2190;

// ============================================================================
// Pure control-physiology formulas
// ============================================================================

/// Operational efficacy: `Cov * [(Rel * IntEff) + ((1 - Rel) * VarEff)]`.
pub fn analytical_opeff(cov: f64, rel: f64, int_eff: f64, var_eff: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&cov));
    debug_assert!((0.0..=1.0).contains(&rel));
    cov * ((rel * int_eff) + ((1.0 - rel) * var_eff))
}

/// Defense-in-depth susceptibility `S = prod(1 - OpEff_i)`.
///
/// An empty roster yields S = 1 (certain breach); any perfect control
/// yields S = 0 (breach impossible).
pub fn combined_susceptibility(op_effs: &[f64]) -> f64 {
    op_effs.iter().fold(1.0, |s, e| s * (1.0 - e))
}

/// `RS = 1 - S` over the given operational efficacies.
pub fn resistance_strength(op_effs: &[f64]) -> f64 {
    1.0 - combined_susceptibility(op_effs)
}

/// Breach-detection AND-gate over the three detection subfunctions.
///
/// The indicator is true iff every subfunction has at least one LEC in
/// non-variant-zero operational condition; the success probability is the
/// product of per-subfunction pass-through probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionGate {
    pub indicator: bool,
    pub probability: f64,
}

pub fn breach_detection_gate(
    visibility: &[f64],
    monitoring: &[f64],
    recognition: &[f64],
) -> DetectionGate {
    let operational = |effs: &[f64]| effs.iter().any(|&e| e > 0.0);
    let pass_through = |effs: &[f64]| 1.0 - effs.iter().filter(|&&e| e > 0.0).fold(1.0, |p, &e| p * (1.0 - e));
    let indicator = operational(visibility) && operational(monitoring) && operational(recognition);
    let probability = if indicator {
        pass_through(visibility) * pass_through(monitoring) * pass_through(recognition)
    } else {
        0.0
    };
    DetectionGate { indicator, probability }
}

// ============================================================================
// Runtime state
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Normal,
    Variant,
    Remediating,
}

/// Runtime state of one LEC/VMC/DSC.
#[derive(Debug, Clone)]
pub struct ControlState {
    pub lifecycle: Lifecycle,
    /// Set-and-hold intended efficacy: sampled at initialization and
    /// re-sampled after each remediation.
    pub intended_efficacy: f64,
    /// Valid only while variant or remediating.
    pub variant_efficacy: f64,
    pub next_change_tick: u64,
    pub variant_since_tick: Option<u64>,
    pub detected_at_tick: Option<u64>,
    pub remediation_started_tick: Option<u64>,
    pub remediation_hours_remaining: f64,
    pub queued: bool,
    last_variance_event: Option<EventId>,
    last_variance_source: Option<VarianceSource>,
    last_detection_event: Option<EventId>,
    last_start_event: Option<EventId>,
    // Per-run tallies.
    pub ticks_normal: u64,
    pub ticks_variant: u64,
    pub ticks_remediating: u64,
    pub opeff_sum: f64,
}

impl ControlState {
    /// Current operational efficacy: intended while normal, variant-state
    /// efficacy otherwise.
    pub fn operational_efficacy(&self) -> f64 {
        match self.lifecycle {
            Lifecycle::Normal => self.intended_efficacy,
            _ => self.variant_efficacy,
        }
    }
}

/// One completed variance episode, decomposed per the four additive time
/// components. `variant_hours` equals their sum to within one tick.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceEpisode {
    pub control_id: String,
    pub variant_since_tick: u64,
    pub detected_at_tick: u64,
    pub remediation_start_tick: u64,
    pub completed_tick: u64,
    pub t_detect_hours: f64,
    pub t_queue_hours: f64,
    pub t_remediation_hours: f64,
    pub t_backtrack_hours: f64,
}

impl VarianceEpisode {
    pub fn variant_hours(&self) -> f64 {
        (self.completed_tick - self.variant_since_tick) as f64
    }

    pub fn component_sum(&self) -> f64 {
        self.t_detect_hours + self.t_queue_hours + self.t_remediation_hours + self.t_backtrack_hours
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunCounters {
    pub contacts: u64,
    pub avoided: u64,
    pub deterred: u64,
    pub resisted: u64,
    pub breaches: u64,
    pub detected_breaches: u64,
    pub variance_events: u64,
    pub detected_variance: u64,
    pub loss_events: u64,
    pub total_loss: f64,
    pub opex_ticks: u64,
}

/// Per-control roll-up for analytics.
#[derive(Debug, Clone, Serialize)]
pub struct ControlRunStats {
    pub control_id: String,
    pub ticks_normal: u64,
    pub ticks_variant: u64,
    pub ticks_remediating: u64,
    pub time_weighted_opeff: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub scenario_name: String,
    pub seed: u64,
    pub horizon: u64,
    pub ledger: EventLedger,
    pub episodes: Vec<VarianceEpisode>,
    pub counters: RunCounters,
    pub control_stats: Vec<ControlRunStats>,
    /// Time-averaged remediation queue depth per 730-tick month.
    pub queue_depth_monthly: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactStage {
    Avoided,
    Deterred,
    Resisted,
    Breached,
}

struct PendingLoss {
    resolve_tick: u64,
    breach_event: EventId,
    target: usize,
    detected: bool,
    dwell_hours: f64,
    containment_hours: f64,
    recovery_hours: f64,
}

/// Result of the five-dimension personnel alignment assessment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    pub dims_passed: u8,
    pub misaligned: bool,
    pub efficacy_multiplier: f64,
}

impl AlignmentResult {
    pub const ALIGNED: AlignmentResult =
        AlignmentResult { dims_passed: 5, misaligned: false, efficacy_multiplier: 1.0 };
}

// ============================================================================
// Engine
// ============================================================================

pub struct Engine<'c> {
    c: &'c Compiled,
    seed: u64,
    horizon: u64,
    now: u64,
    states: Vec<ControlState>,
    queue: RemediationQueue,
    ledger: EventLedger,
    episodes: Vec<VarianceEpisode>,
    counters: RunCounters,
    pending_losses: Vec<PendingLoss>,
    next_extrinsic: Option<u64>,
    next_contact: Vec<Option<u64>>,
    next_sweep: Vec<Option<u64>>,
    ctrl_streams: Vec<RngStream>,
    sweep_streams: Vec<Option<RngStream>>,
    ts_streams: Vec<RngStream>,
    person_streams: Vec<RngStream>,
    extrinsic_stream: RngStream,
    loss_stream: RngStream,
    queue_depth_sum: Vec<f64>,
    queue_depth_ticks: Vec<u64>,
}

impl<'c> Engine<'c> {
    pub fn new(c: &'c Compiled, seed: u64, horizon_override: Option<u64>) -> Self {
        let horizon = horizon_override.unwrap_or(c.horizon_ticks);
        let mut ctrl_streams = Vec::with_capacity(c.controls.len());
        let mut sweep_streams = Vec::with_capacity(c.controls.len());
        let mut states = Vec::with_capacity(c.controls.len());
        let mut next_sweep = Vec::with_capacity(c.controls.len());

        for def in &c.controls {
            let mut stream = RngStream::new(seed, &format!("variance/{}", def.id));
            let intended = stream.sample_beta_pert(&def.intended_efficacy_dist);
            let change_in = stream.sample_beta_pert(&def.change_frequency_dist).ceil().max(1.0);
            states.push(ControlState {
                lifecycle: Lifecycle::Normal,
                intended_efficacy: intended,
                variant_efficacy: 0.0,
                next_change_tick: change_in as u64,
                variant_since_tick: None,
                detected_at_tick: None,
                remediation_started_tick: None,
                remediation_hours_remaining: 0.0,
                queued: false,
                last_variance_event: None,
                last_variance_source: None,
                last_detection_event: None,
                last_start_event: None,
                ticks_normal: 0,
                ticks_variant: 0,
                ticks_remediating: 0,
                opeff_sum: 0.0,
            });
            ctrl_streams.push(stream);

            match &def.vmc {
                Some(v) if v.is_monitoring => {
                    let mut s = RngStream::new(seed, &format!("sweeps/{}", def.id));
                    let first = s.sample_beta_pert(&v.sweep_interval_dist).ceil().max(1.0) as u64;
                    sweep_streams.push(Some(s));
                    next_sweep.push(Some(first));
                }
                _ => {
                    sweep_streams.push(None);
                    next_sweep.push(None);
                }
            }
        }

        let mut ts_streams = Vec::with_capacity(c.threat_sources.len());
        let mut next_contact = Vec::with_capacity(c.threat_sources.len());
        for ts in &c.threat_sources {
            let mut s = RngStream::new(seed, &format!("contacts/{}", ts.id));
            next_contact.push(s.next_poisson_arrival(ts.decl.contact_rate_per_year, 0));
            ts_streams.push(s);
        }

        let person_streams = c
            .personnel
            .iter()
            .map(|p| RngStream::new(seed, &format!("alignment/{}", p.id)))
            .collect();

        let mut extrinsic_stream = RngStream::new(seed, "extrinsic");
        let next_extrinsic =
            extrinsic_stream.next_poisson_arrival(c.variance.extrinsic_rate_per_year, 0);

        let months = (horizon as usize).div_ceil(TICKS_PER_MONTH as usize).max(1);

        Self {
            c,
            seed,
            horizon,
            now: 0,
            states,
            queue: RemediationQueue::new(),
            ledger: EventLedger::new(),
            episodes: Vec::new(),
            counters: RunCounters::default(),
            pending_losses: Vec::new(),
            next_extrinsic,
            next_contact,
            next_sweep,
            ctrl_streams,
            sweep_streams,
            ts_streams,
            person_streams,
            extrinsic_stream,
            loss_stream: RngStream::new(seed, "loss"),
            queue_depth_sum: vec![0.0; months],
            queue_depth_ticks: vec![0; months],
        }
    }

    pub fn state(&self, control: usize) -> &ControlState {
        &self.states[control]
    }

    pub fn queue(&self) -> &RemediationQueue {
        &self.queue
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Run the full horizon and consume the engine.
    pub fn run(mut self) -> RunOutput {
        while self.now < self.horizon {
            self.tick();
        }
        self.flush_pending_losses();
        self.finish()
    }

    /// Execute one tick of the nine-step pipeline.
    pub fn tick(&mut self) {
        debug_assert!(self.now < self.horizon);
        // Step 1: personnel behavior update. Dynamic personnel (propensity,
        // contagion, event shocks) is out of scope; reserved, inert.
        // Step 2: OpEx accrual.
        self.counters.opex_ticks += 1;

        // Step 3: extrinsic variance.
        if self.next_extrinsic == Some(self.now) {
            self.apply_extrinsic_shock();
            self.next_extrinsic = self
                .extrinsic_stream
                .next_poisson_arrival(self.c.variance.extrinsic_rate_per_year, self.now);
        }

        // Step 4: intrinsic variance, plus monthly personnel-driven checks.
        for ci in 0..self.states.len() {
            if self.states[ci].lifecycle == Lifecycle::Normal
                && self.now >= self.states[ci].next_change_tick
            {
                self.attempt_intrinsic_variance(ci);
            }
        }
        if self.c.flags.intrinsic_irregular_enabled
            && self.now > 0
            && self.now.is_multiple_of(TICKS_PER_MONTH)
        {
            self.personnel_variance_checks();
        }

        // Step 5: VMC detection sweeps.
        for ci in 0..self.states.len() {
            if self.next_sweep[ci] == Some(self.now)
                || matches!(self.next_sweep[ci], Some(t) if t < self.now)
            {
                self.run_vmc_sweep(ci);
            }
        }

        // Step 6: realize pending losses.
        self.realize_due_losses();

        // Step 7: remediation completion + queue starts.
        self.process_remediation();

        // Step 8: threat contacts.
        for ts in 0..self.c.threat_sources.len() {
            if self.next_contact[ts] == Some(self.now) {
                self.resolve_contact(ts);
                let rate = self.c.threat_sources[ts].decl.contact_rate_per_year;
                self.next_contact[ts] = self.ts_streams[ts].next_poisson_arrival(rate, self.now);
            }
        }

        // Step 9: metrics collection.
        for st in &mut self.states {
            match st.lifecycle {
                Lifecycle::Normal => st.ticks_normal += 1,
                Lifecycle::Variant => st.ticks_variant += 1,
                Lifecycle::Remediating => st.ticks_remediating += 1,
            }
            st.opeff_sum += st.operational_efficacy();
        }
        let month = (self.now / TICKS_PER_MONTH) as usize;
        self.queue_depth_sum[month] += self.queue.len() as f64;
        self.queue_depth_ticks[month] += 1;

        self.now += 1;
    }

    fn finish(self) -> RunOutput {
        let control_stats = self
            .c
            .controls
            .iter()
            .zip(&self.states)
            .map(|(def, st)| ControlRunStats {
                control_id: def.id.clone(),
                ticks_normal: st.ticks_normal,
                ticks_variant: st.ticks_variant,
                ticks_remediating: st.ticks_remediating,
                time_weighted_opeff: if self.horizon > 0 {
                    st.opeff_sum / self.horizon as f64
                } else {
                    0.0
                },
            })
            .collect();
        let queue_depth_monthly = self
            .queue_depth_sum
            .iter()
            .zip(&self.queue_depth_ticks)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        RunOutput {
            scenario_name: self.c.name.clone(),
            seed: self.seed,
            horizon: self.horizon,
            ledger: self.ledger,
            episodes: self.episodes,
            counters: self.counters,
            control_stats,
            queue_depth_monthly,
        }
    }

    // ------------------------------------------------------------------
    // Variance
    // ------------------------------------------------------------------

    fn current_eff(&self, ci: usize) -> f64 {
        self.states[ci].operational_efficacy()
    }

    /// Gate-facing efficacy: operational efficacy, degraded by the
    /// operator's alignment multiplier for human-actor controls when DSC
    /// alignment is enabled.
    fn gate_eff(&mut self, ci: usize) -> f64 {
        let base = self.current_eff(ci);
        if !self.c.flags.dsc_alignment_enabled
            || self.c.controls[ci].actor_type != ActorType::Human
        {
            return base;
        }
        match self.c.controls[ci].operator {
            Some(p) => base * self.evaluate_dsc_alignment(p).efficacy_multiplier,
            None => base,
        }
    }

    /// Five independent Bernoulli trials, one per alignment dimension, with
    /// pass probabilities pooled pass-through from the influencing DSCs.
    /// A no-op returning aligned when the feature flag is off.
    pub fn evaluate_dsc_alignment(&mut self, person: usize) -> AlignmentResult {
        if !self.c.flags.dsc_alignment_enabled {
            return AlignmentResult::ALIGNED;
        }
        let dscs = &self.c.personnel[person].influencing_dscs;
        let mut dims_passed = 0u8;
        for dim in crate::scenario::ALL_DIMENSIONS {
            let mut covered = false;
            let mut fail = 1.0;
            for &d in dscs {
                if self.c.controls[d].dsc_dimensions.contains(&dim) {
                    covered = true;
                    fail *= 1.0 - self.states[d].operational_efficacy();
                }
            }
            // An uncovered dimension is neutral: nothing to misalign against.
            let p_pass = if covered { 1.0 - fail } else { 1.0 };
            if self.person_streams[person].sample_bernoulli(p_pass) {
                dims_passed += 1;
            }
        }
        AlignmentResult {
            dims_passed,
            misaligned: dims_passed < 5,
            efficacy_multiplier: f64::from(dims_passed) / 5.0,
        }
    }

    /// Transition a normal control into variant state: binary controls fail
    /// to zero efficacy, continuous ones to Uniform(0, IntEff).
    fn make_variant(&mut self, ci: usize, source: VarianceSource, cause_links: Vec<EventId>) -> EventId {
        let def = &self.c.controls[ci];
        debug_assert_eq!(self.states[ci].lifecycle, Lifecycle::Normal);
        let var_eff = if def.is_binary {
            0.0
        } else {
            let int_eff = self.states[ci].intended_efficacy;
            self.ctrl_streams[ci].sample_uniform(0.0, int_eff)
        };
        let st = &mut self.states[ci];
        st.lifecycle = Lifecycle::Variant;
        st.variant_efficacy = var_eff;
        st.variant_since_tick = Some(self.now);
        st.detected_at_tick = None;
        st.remediation_started_tick = None;
        st.last_variance_source = Some(source);
        self.counters.variance_events += 1;
        let id = self.ledger.append(
            self.now,
            EventKind::Variance,
            vec![def.id.clone()],
            cause_links,
            EventPayload::Variance {
                control_id: def.id.clone(),
                source,
                intended_efficacy: self.states[ci].intended_efficacy,
                variant_efficacy: var_eff,
            },
        );
        self.states[ci].last_variance_event = Some(id);
        id
    }

    /// Drift-timer variance attempt: prevention VMCs linked to the control
    /// each run a Bernoulli check against their current operational
    /// efficacy; any success blocks the event. The drift timer is resampled
    /// either way.
    fn attempt_intrinsic_variance(&mut self, ci: usize) {
        let mut blocked = false;
        for pi in 0..self.c.controls[ci].prevention_vmcs.len() {
            let vmc = self.c.controls[ci].prevention_vmcs[pi];
            let eff = self.current_eff(vmc);
            if self.ctrl_streams[ci].sample_bernoulli(eff) {
                blocked = true;
                break;
            }
        }
        let next_in = self.ctrl_streams[ci]
            .sample_beta_pert(&self.c.controls[ci].change_frequency_dist)
            .ceil()
            .max(1.0) as u64;
        self.states[ci].next_change_tick = self.now + next_in;
        if !blocked {
            self.make_variant(ci, VarianceSource::IntrinsicRegular, Vec::new());
        }
    }

    /// Threat-landscape shock: every software-based control in normal state
    /// becomes variant at once, bypassing all prevention gates. VMCs and
    /// DSCs are included only when the scenario opts in.
    fn apply_extrinsic_shock(&mut self) {
        let affected: Vec<usize> = (0..self.states.len())
            .filter(|&ci| {
                let def = &self.c.controls[ci];
                def.is_software_based
                    && self.states[ci].lifecycle == Lifecycle::Normal
                    && (matches!(def.domain, ControlDomain::Lec(_))
                        || self.c.flags.extrinsic_affects_detection_controls)
            })
            .collect();
        let shock_id = self.ledger.append(
            self.now,
            EventKind::ExtrinsicShock,
            affected.iter().map(|&ci| self.c.controls[ci].id.clone()).collect(),
            Vec::new(),
            EventPayload::ExtrinsicShock {
                affected_controls: affected.iter().map(|&ci| self.c.controls[ci].id.clone()).collect(),
            },
        );
        for ci in affected {
            self.make_variant(ci, VarianceSource::Extrinsic, vec![shock_id]);
        }
    }

    /// Monthly personnel-driven variance: a misaligned admin degrades each
    /// control they operate with probability (1 - efficacy multiplier),
    /// gated by reduce_variance_probability VMCs.
    fn personnel_variance_checks(&mut self) {
        for p in 0..self.c.personnel.len() {
            if !self.c.personnel[p].has_admin || self.c.personnel[p].operates.is_empty() {
                continue;
            }
            let alignment = self.evaluate_dsc_alignment(p);
            if !alignment.misaligned {
                continue;
            }
            let degrade_p = 1.0 - alignment.efficacy_multiplier;
            for oi in 0..self.c.personnel[p].operates.len() {
                let ci = self.c.personnel[p].operates[oi];
                if self.states[ci].lifecycle != Lifecycle::Normal {
                    continue;
                }
                if !self.person_streams[p].sample_bernoulli(degrade_p) {
                    continue;
                }
                let mut blocked = false;
                for vi in 0..self.c.controls[ci].variance_probability_vmcs.len() {
                    let vmc = self.c.controls[ci].variance_probability_vmcs[vi];
                    let eff = self.current_eff(vmc);
                    if self.ctrl_streams[ci].sample_bernoulli(eff) {
                        blocked = true;
                        break;
                    }
                }
                if !blocked {
                    self.make_variant(ci, VarianceSource::IntrinsicIrregular, Vec::new());
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // VMC sweeps and remediation
    // ------------------------------------------------------------------

    /// Monolithic variance-detection sweep: a healthy VMC detects all
    /// variant monitored controls with its configured probability, or none.
    /// A variant VMC sweeps but detects nothing.
    fn run_vmc_sweep(&mut self, vmc: usize) {
        let view = self.c.controls[vmc].vmc.as_ref().expect("sweeping agent is a VMC");
        let interval = {
            let stream = self.sweep_streams[vmc].as_mut().expect("monitoring VMC has a stream");
            stream.sample_beta_pert(&view.sweep_interval_dist).ceil().max(1.0) as u64
        };
        self.next_sweep[vmc] = Some(self.now + interval);

        let operational = self.states[vmc].lifecycle == Lifecycle::Normal;
        let succeeded = if operational {
            let p = view.detection_probability;
            self.sweep_streams[vmc].as_mut().unwrap().sample_bernoulli(p)
        } else {
            false
        };

        let monitored = view.monitored.clone();
        let vmc_id = self.c.controls[vmc].id.clone();
        let sweep_id = self.ledger.append(
            self.now,
            EventKind::Sweep,
            vec![vmc_id.clone()],
            Vec::new(),
            EventPayload::Sweep {
                vmc_id: vmc_id.clone(),
                succeeded,
                detections: 0,
                vmc_operational: operational,
            },
        );

        if !succeeded {
            return;
        }
        let mut detections = 0u32;
        for ci in monitored {
            if self.states[ci].lifecycle == Lifecycle::Variant
                && self.states[ci].detected_at_tick.is_none()
            {
                self.states[ci].detected_at_tick = Some(self.now);
                let undetected_hours =
                    (self.now - self.states[ci].variant_since_tick.unwrap()) as f64;
                let cause = self.states[ci].last_variance_event.into_iter().chain([sweep_id]).collect();
                let det_id = self.ledger.append(
                    self.now,
                    EventKind::Detection,
                    vec![vmc_id.clone(), self.c.controls[ci].id.clone()],
                    cause,
                    EventPayload::Detection {
                        vmc_id: vmc_id.clone(),
                        control_id: self.c.controls[ci].id.clone(),
                        undetected_hours,
                    },
                );
                self.states[ci].last_detection_event = Some(det_id);
                self.enqueue_for_remediation(ci);
                self.counters.detected_variance += 1;
                detections += 1;
            }
        }
        // Record the final detection count on the sweep event.
        if let Some(ev) = self.ledger.events.get_mut(sweep_id as usize - 1) {
            if let EventPayload::Sweep { detections: d, .. } = &mut ev.payload {
                *d = detections;
            }
        }
    }

    fn enqueue_for_remediation(&mut self, ci: usize) {
        debug_assert!(!self.states[ci].queued);
        let def = &self.c.controls[ci];
        let key = self.c.strategy_key(ci).key(self.states[ci].intended_efficacy);
        self.queue.insert(QueueItem {
            control: ci,
            enqueued_tick: self.now,
            priority_tier: def.tier,
            strategy_key: key,
            cost_hours: def.cost_hours,
        });
        self.states[ci].queued = true;
    }

    /// Budget-cycle accounting, in-flight repair progress, completions and
    /// new starts, in that order.
    fn process_remediation(&mut self) {
        // Advance repairs started in earlier ticks.
        for ci in 0..self.states.len() {
            if self.states[ci].lifecycle == Lifecycle::Remediating {
                self.states[ci].remediation_hours_remaining -= 1.0;
                if self.states[ci].remediation_hours_remaining <= 1e-9 {
                    self.complete_remediation(ci);
                }
            }
        }

        // Budget-cycle boundary.
        match self.c.budget.cadence {
            BudgetCadence::MonthlyReset => {
                if self.now.is_multiple_of(TICKS_PER_MONTH) {
                    self.queue.reset_budget(self.c.budget.hours_per_month, self.now);
                }
            }
            BudgetCadence::QuarterlyPooling => {
                if self.now.is_multiple_of(TICKS_PER_QUARTER) {
                    self.queue.reset_budget(3.0 * self.c.budget.hours_per_month, self.now);
                }
            }
            BudgetCadence::ContinuousAccrual => {
                let per_tick = self.c.budget.hours_per_month / TICKS_PER_MONTH as f64;
                self.queue.accrue(per_tick, 3.0 * self.c.budget.hours_per_month);
            }
        }

        // Starts, in queue order. Stop at the first unaffordable item; an
        // item blocked by a variant implementing VMC holds its whole tier
        // (no overtaking within the tier), later tiers may proceed.
        let mut i = 0;
        let mut blocked_tier: Option<u8> = None;
        while i < self.queue.items().len() {
            let item = self.queue.items()[i].clone();
            if blocked_tier == Some(item.priority_tier) {
                i += 1;
                continue;
            }
            if self.queue.budget_remaining_hours() < item.cost_hours {
                break;
            }
            let implements_blocked = self.c.controls[item.control]
                .implements_vmcs
                .iter()
                .any(|&v| self.states[v].lifecycle != Lifecycle::Normal);
            if implements_blocked {
                blocked_tier = Some(item.priority_tier);
                i += 1;
                continue;
            }
            self.queue.start(i, item.cost_hours);
            self.start_remediation(item.control, item.cost_hours);
        }
    }

    fn start_remediation(&mut self, ci: usize, cost_hours: f64) {
        let duration = cost_hours * self.c.budget.culture_duration_multiplier
            + self.c.budget.backtrack_delay_hours;
        let queue_wait =
            (self.now - self.states[ci].detected_at_tick.expect("queued item was detected")) as f64;
        let st = &mut self.states[ci];
        st.lifecycle = Lifecycle::Remediating;
        st.remediation_started_tick = Some(self.now);
        st.remediation_hours_remaining = duration;
        st.queued = false;
        let cause: Vec<EventId> = st.last_detection_event.into_iter().collect();
        let id = self.ledger.append(
            self.now,
            EventKind::RemediationStart,
            vec![self.c.controls[ci].id.clone()],
            cause,
            EventPayload::RemediationStart {
                control_id: self.c.controls[ci].id.clone(),
                cost_hours,
                duration_hours: duration,
                queue_wait_hours: queue_wait,
            },
        );
        self.states[ci].last_start_event = Some(id);
    }

    fn complete_remediation(&mut self, ci: usize) {
        let def = &self.c.controls[ci];
        let since = self.states[ci].variant_since_tick.expect("remediating control was variant");
        let detected = self.states[ci].detected_at_tick.expect("remediating control was detected");
        let started = self.states[ci].remediation_started_tick.expect("remediation had started");
        self.episodes.push(VarianceEpisode {
            control_id: def.id.clone(),
            variant_since_tick: since,
            detected_at_tick: detected,
            remediation_start_tick: started,
            completed_tick: self.now,
            t_detect_hours: (detected - since) as f64,
            t_queue_hours: (started - detected) as f64,
            t_remediation_hours: def.cost_hours * self.c.budget.culture_duration_multiplier,
            t_backtrack_hours: self.c.budget.backtrack_delay_hours,
        });

        // Return to intended state with a fresh set-and-hold efficacy and a
        // fresh drift timer.
        let new_intended = self.ctrl_streams[ci].sample_beta_pert(&def.intended_efficacy_dist);
        let next_in =
            self.ctrl_streams[ci].sample_beta_pert(&def.change_frequency_dist).ceil().max(1.0) as u64;
        let variant_hours = (self.now - since) as f64;
        let cause: Vec<EventId> = self.states[ci].last_start_event.into_iter().collect();
        let st = &mut self.states[ci];
        st.lifecycle = Lifecycle::Normal;
        st.intended_efficacy = new_intended;
        st.variant_efficacy = 0.0;
        st.next_change_tick = self.now + next_in;
        st.variant_since_tick = None;
        st.detected_at_tick = None;
        st.remediation_started_tick = None;
        st.remediation_hours_remaining = 0.0;
        st.last_variance_event = None;
        st.last_variance_source = None;
        st.last_detection_event = None;
        st.last_start_event = None;
        self.ledger.append(
            self.now,
            EventKind::RemediationComplete,
            vec![def.id.clone()],
            cause,
            EventPayload::RemediationComplete {
                control_id: def.id.clone(),
                new_intended_efficacy: new_intended,
                variant_hours,
            },
        );
    }

    // ------------------------------------------------------------------
    // Contacts, breaches, losses
    // ------------------------------------------------------------------

    /// Full contact pipeline: targeting, avoidance, deterrence, resistance,
    /// then breach mechanics.
    fn resolve_contact(&mut self, ts: usize) -> ContactStage {
        self.counters.contacts += 1;
        let targets = &self.c.threat_sources[ts].targets;
        let target = targets[self.ts_streams[ts].pick_index(targets.len())];
        let tcap = {
            let dist = self.c.threat_sources[ts].decl.sophistication_dist;
            self.ts_streams[ts].sample_beta_pert(&dist)
        };

        // Avoidance: the contact never lands if any avoidance control
        // protecting the target out-powers the threat.
        let avoidance = self.c.tech_assets[target].roster.avoidance.clone();
        let avoided = avoidance.iter().any(|&ci| self.gate_eff(ci) > tcap);
        if avoided {
            self.counters.avoided += 1;
            return ContactStage::Avoided;
        }

        // Deterrence: only threats that exercise choice can be deterred;
        // deterrence controls drive the probability of action toward zero.
        if self.c.threat_sources[ts].decl.exercises_choice {
            let deterrence = self.c.tech_assets[target].roster.deterrence.clone();
            let effs: Vec<f64> = deterrence.iter().map(|&ci| self.gate_eff(ci)).collect();
            let deterrence_strength = resistance_strength(&effs);
            let act_p =
                self.c.threat_sources[ts].decl.probability_of_action * (1.0 - deterrence_strength);
            if !self.ts_streams[ts].sample_bernoulli(act_p) {
                self.counters.deterred += 1;
                return ContactStage::Deterred;
            }
        }

        // Resistance: breach iff TCap exceeds combined RS.
        let resistance = self.c.tech_assets[target].roster.resistance.clone();
        let effs: Vec<f64> = resistance.iter().map(|&ci| self.gate_eff(ci)).collect();
        let rs = resistance_strength(&effs);
        if tcap <= rs {
            self.counters.resisted += 1;
            return ContactStage::Resisted;
        }

        self.record_breach(ts, target, tcap, rs);
        ContactStage::Breached
    }

    fn snapshot_control(&self, ci: usize) -> PathControlSnapshot {
        let st = &self.states[ci];
        let def = &self.c.controls[ci];
        let control_type = match def.domain {
            ControlDomain::Lec(t) => t,
            // Snapshots are only taken for LEC protection paths.
            _ => ControlType::Resistance,
        };
        PathControlSnapshot {
            control_id: def.id.clone(),
            control_type,
            intended_efficacy: st.intended_efficacy,
            operational_efficacy: st.operational_efficacy(),
            variant: st.lifecycle != Lifecycle::Normal,
            variance_event_id: if st.lifecycle != Lifecycle::Normal { st.last_variance_event } else { None },
            variance_source: if st.lifecycle != Lifecycle::Normal { st.last_variance_source } else { None },
            variant_since_tick: st.variant_since_tick,
            detected_at_tick: st.detected_at_tick,
            queued: st.queued,
        }
    }

    fn record_breach(&mut self, ts: usize, target: usize, tcap: f64, rs: f64) {
        self.counters.breaches += 1;
        let roster = self.c.tech_assets[target].roster.clone();

        // Breach detection: V AND M AND R over the asset's detection LECs.
        let effs = |list: &[usize], s: &Self| -> Vec<f64> {
            list.iter().map(|&ci| s.current_eff(ci)).collect()
        };
        let gate = breach_detection_gate(
            &effs(&roster.visibility, self),
            &effs(&roster.monitoring, self),
            &effs(&roster.recognition, self),
        );
        let detected = gate.indicator && self.ts_streams[ts].sample_bernoulli(gate.probability);
        if detected {
            self.counters.detected_breaches += 1;
        }

        // Dwell: detected breaches are flagged at breach time; undetected
        // ones sit for the configured dwell, shortened by healthy threat
        // intel on this source.
        let dwell_hours = if detected {
            0.0
        } else {
            let mut dwell = self.c.variance.undetected_dwell_hours;
            let intel_healthy = self.c.threat_sources[ts]
                .intel_vmcs
                .iter()
                .any(|&v| self.states[v].lifecycle == Lifecycle::Normal);
            if intel_healthy {
                dwell *= self.c.variance.intel_dwell_multiplier;
            }
            dwell
        };

        // Undetected breaches bypass the entire response pipeline.
        let (containment_hours, recovery_hours) = if detected {
            let sample_duration = |s: &mut Self, list: &[usize], default: f64| -> f64 {
                for &ci in list {
                    if let Some(dist) = s.c.controls[ci].duration_hours_dist {
                        return s.ts_streams[ts].sample_beta_pert(&dist).max(0.0);
                    }
                }
                default
            };
            let containment = sample_duration(self, &roster.containment, 8.0);
            let recovery = sample_duration(self, &roster.resilience, 24.0);
            (containment, recovery)
        } else {
            (0.0, 0.0)
        };

        let path_controls: Vec<PathControlSnapshot> =
            roster.resistance.iter().map(|&ci| self.snapshot_control(ci)).collect();
        let variant_detection_controls: Vec<PathControlSnapshot> = roster
            .visibility
            .iter()
            .chain(&roster.monitoring)
            .chain(&roster.recognition)
            .filter(|&&ci| self.states[ci].lifecycle != Lifecycle::Normal)
            .map(|&ci| self.snapshot_control(ci))
            .collect();

        let cause_links: Vec<EventId> = path_controls
            .iter()
            .chain(&variant_detection_controls)
            .filter_map(|snap| snap.variance_event_id)
            .collect();

        let affected: Vec<String> = self.c.tech_assets[target]
            .hosted_bas
            .iter()
            .map(|&b| self.c.business_assets[b].id.clone())
            .collect();

        let breach_id = self.ledger.append(
            self.now,
            EventKind::Breach,
            vec![self.c.threat_sources[ts].id.clone(), self.c.tech_assets[target].id.clone()],
            cause_links,
            EventPayload::Breach {
                threat_source_id: self.c.threat_sources[ts].id.clone(),
                target_tech_asset: self.c.tech_assets[target].id.clone(),
                tcap,
                combined_rs: rs,
                detected,
                dwell_hours,
                containment_hours,
                recovery_hours,
                affected_business_assets: affected,
                path_controls,
                variant_detection_controls,
                budget_remaining_hours: self.queue.budget_remaining_hours(),
            },
        );

        let outage = dwell_hours + containment_hours + recovery_hours;
        self.pending_losses.push(PendingLoss {
            resolve_tick: self.now + outage.ceil() as u64,
            breach_event: breach_id,
            target,
            detected,
            dwell_hours,
            containment_hours,
            recovery_hours,
        });
        // Keep realization order deterministic: by due tick, then breach id.
        self.pending_losses.sort_by_key(|p| (p.resolve_tick, p.breach_event));
    }

    fn realize_due_losses(&mut self) {
        while let Some(first) = self.pending_losses.first() {
            if first.resolve_tick > self.now {
                break;
            }
            let pending = self.pending_losses.remove(0);
            self.realize_loss(&pending);
        }
    }

    /// Gross loss per affected business asset (lognormal for information
    /// assets, outage-table for process assets), reduced to net only when
    /// the breach was detected, then split primary/secondary by SLEF.
    fn realize_loss(&mut self, pending: &PendingLoss) {
        let outage_hours = pending.dwell_hours + pending.containment_hours + pending.recovery_hours;
        let mut per_asset: Vec<(String, f64)> = Vec::new();
        let mut gross = 0.0;
        for &b in &self.c.tech_assets[pending.target].hosted_bas {
            let ba = &self.c.business_assets[b];
            let amount = match ba.kind {
                AssetKind::Information => {
                    let p = ba.lognormal.expect("information asset has lognormal params");
                    self.loss_stream.sample_lognormal(p.mu, p.sigma)
                }
                AssetKind::Process => self.c.loss_model.outage_cost(outage_hours),
            };
            gross += amount;
            per_asset.push((ba.id.clone(), amount));
        }

        let net = if pending.detected {
            let roster = &self.c.tech_assets[pending.target].roster;
            let reduction: f64 = roster
                .containment
                .iter()
                .chain(&roster.loss_minimization)
                .map(|&ci| 1.0 - self.states[ci].operational_efficacy())
                .product();
            gross * reduction
        } else {
            gross
        };

        let slef_triggered = self.loss_stream.sample_bernoulli(self.c.loss_model.slef);
        let secondary = if slef_triggered { net * self.c.loss_model.secondary_loss_fraction } else { 0.0 };
        let primary = net - secondary;

        self.counters.loss_events += 1;
        self.counters.total_loss += net;
        self.ledger.append(
            self.now,
            EventKind::Loss,
            vec![self.c.tech_assets[pending.target].id.clone()],
            vec![pending.breach_event],
            EventPayload::Loss {
                breach_event_id: pending.breach_event,
                gross_loss: gross,
                net_loss: net,
                primary_loss: primary,
                secondary_loss: secondary,
                slef_triggered,
                detected: pending.detected,
                outage_hours,
                per_asset,
            },
        );
    }

    /// Losses still pending at the horizon are realized so every breach in
    /// the run carries a loss event.
    fn flush_pending_losses(&mut self) {
        while !self.pending_losses.is_empty() {
            let pending = self.pending_losses.remove(0);
            self.realize_loss(&pending);
        }
    }
}

/// Compile and run a scenario for one seed.
pub fn run_simulation(
    scenario: &Scenario,
    seed: u64,
    horizon_override: Option<u64>,
) -> Result<RunOutput, ScenarioError> {
    let compiled = compile(scenario)?;
    Ok(Engine::new(&compiled, seed, horizon_override).run())
}
