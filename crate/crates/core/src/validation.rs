//! Structural validation of scenarios before simulation.
//!
//! Validation is pure: it never mutates the scenario. Errors make a
//! scenario non-runnable; warnings flag suspicious-but-legal structure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::scenario::{
    edge_endpoints_legal, AgentParams, AssetKind, ControlType, EdgeType, Scenario, VmcFunction,
};

#[derive(Debug, Clone, Serialize)]
pub struct ValidationIssue {
    /// Dotted path of the offending element, e.g. `edges[3]` or `agents.fw`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
    pub warnings: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_runnable(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ValidationIssue { path: path.into(), message: message.into() });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(ValidationIssue { path: path.into(), message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        if self.errors.is_empty() && self.warnings.is_empty() {
            writeln!(f, "ok")?;
        }
        Ok(())
    }
}

fn check_unit_interval(report: &mut ValidationReport, path: &str, name: &str, v: f64) {
    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
        report.error(path, format!("{name} must lie in [0,1], got {v}"));
    }
}

fn check_pert(
    report: &mut ValidationReport,
    path: &str,
    name: &str,
    p: &crate::stochastic::PertParams,
    unit_interval: bool,
) {
    if !p.is_ordered() {
        report.error(path, format!("{name} must satisfy min <= mode <= max, got {p:?}"));
        return;
    }
    if unit_interval && (p.min < 0.0 || p.max > 1.0) {
        report.error(path, format!("{name} must lie in [0,1], got {p:?}"));
    }
}

/// Validate a parsed scenario. The returned report's `errors` list is empty
/// iff the scenario is runnable.
pub fn validate_scenario(scenario: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();

    if scenario.horizon_ticks < 1 {
        report.error("horizon_ticks", "horizon must be at least one tick");
    }

    // Agent identifiers unique; index by id for endpoint checks.
    let mut by_id: BTreeMap<&str, &AgentParams> = BTreeMap::new();
    for (i, agent) in scenario.agents.iter().enumerate() {
        if agent.id.is_empty() {
            report.error(format!("agents[{i}]"), "agent id must be non-empty");
        }
        if by_id.insert(agent.id.as_str(), &agent.params).is_some() {
            report.error(format!("agents[{i}]"), format!("duplicate agent id '{}'", agent.id));
        }
    }

    for agent in &scenario.agents {
        let path = format!("agents.{}", agent.id);
        match &agent.params {
            AgentParams::Lec(lec) => {
                check_pert(&mut report, &path, "intended_efficacy_dist", &lec.intended_efficacy_dist, true);
                check_pert(&mut report, &path, "change_frequency_dist", &lec.change_frequency_dist, false);
                if lec.change_frequency_dist.min <= 0.0 {
                    report.error(&path, "change_frequency_dist min must be > 0");
                }
                if let Some(d) = &lec.duration_hours_dist {
                    check_pert(&mut report, &path, "duration_hours_dist", d, false);
                }
            }
            AgentParams::Vmc(vmc) => {
                check_unit_interval(&mut report, &path, "detection_probability", vmc.detection_probability);
                check_pert(&mut report, &path, "efficacy_dist", &vmc.efficacy_dist, true);
                check_pert(&mut report, &path, "sweep_interval_dist", &vmc.sweep_interval_dist, false);
                check_pert(&mut report, &path, "change_frequency_dist", &vmc.change_frequency_dist, false);
                if vmc.change_frequency_dist.min <= 0.0 {
                    report.error(&path, "change_frequency_dist min must be > 0");
                }
                if vmc.sweep_interval_dist.min <= 0.0 {
                    report.error(&path, "sweep_interval_dist min must be > 0");
                }
                if vmc.functions.is_empty() {
                    report.error(&path, "vmc must declare at least one function");
                }
            }
            AgentParams::Dsc(dsc) => {
                check_pert(&mut report, &path, "efficacy_dist", &dsc.efficacy_dist, true);
                if dsc.dimensions.is_empty() {
                    report.error(&path, "dsc must cover at least one alignment dimension");
                }
            }
            AgentParams::ThreatSource(ts) => {
                if ts.contact_rate_per_year < 0.0 {
                    report.error(&path, "contact_rate_per_year must be nonnegative");
                }
                check_pert(&mut report, &path, "sophistication_dist", &ts.sophistication_dist, true);
                check_unit_interval(&mut report, &path, "probability_of_action", ts.probability_of_action);
                if ts.target_asset_ids.is_empty() {
                    report.error(&path, "target_asset_ids must be nonempty");
                }
                for t in &ts.target_asset_ids {
                    match by_id.get(t.as_str()) {
                        Some(AgentParams::TechAsset {}) => {}
                        Some(_) => report.error(&path, format!("target '{t}' is not a tech asset")),
                        None => report.error(&path, format!("target '{t}' names an undeclared agent")),
                    }
                }
            }
            AgentParams::BusinessAsset(ba) => match (ba.asset_kind, &ba.value_class) {
                (AssetKind::Information, None) => {
                    report.error(&path, "information asset requires a value_class");
                }
                (AssetKind::Information, Some(class)) => {
                    if !scenario.loss_model.info_asset_lognormal.contains_key(class) {
                        report.error(
                            &path,
                            format!("value_class '{class}' missing from loss_model.info_asset_lognormal"),
                        );
                    }
                }
                (AssetKind::Process, _) => {}
            },
            AgentParams::TechAsset {} | AgentParams::Personnel(_) => {}
        }
    }

    // Edges: endpoints declared and kind-legal.
    for (i, edge) in scenario.edges.iter().enumerate() {
        let path = format!("edges[{i}]");
        let src = by_id.get(edge.source.as_str());
        let dst = by_id.get(edge.target.as_str());
        if src.is_none() {
            report.error(&path, format!("{:?} source '{}' names an undeclared agent", edge.edge_type, edge.source));
        }
        if dst.is_none() {
            report.error(&path, format!("{:?} target '{}' names an undeclared agent", edge.edge_type, edge.target));
        }
        if let (Some(s), Some(d)) = (src, dst) {
            if !edge_endpoints_legal(edge.edge_type, s, d) {
                report.error(
                    &path,
                    format!(
                        "{:?} endpoints must be kind-legal, got {} -> {}",
                        edge.edge_type,
                        s.kind_name(),
                        d.kind_name()
                    ),
                );
            }
        }
    }

    // Loss model shape.
    let table = &scenario.loss_model.process_outage_table;
    if table.is_empty() {
        report.error("loss_model.process_outage_table", "outage table must not be empty");
    } else {
        if table.last().unwrap().max_duration_hours.is_some() {
            report.error("loss_model.process_outage_table", "final bracket must be open-ended");
        }
        let mut prev: Option<f64> = None;
        for (i, b) in table.iter().enumerate() {
            if i + 1 < table.len() {
                match b.max_duration_hours {
                    None => report.error(
                        format!("loss_model.process_outage_table[{i}]"),
                        "only the final bracket may be open-ended",
                    ),
                    Some(max) => {
                        if let Some(p) = prev {
                            if max <= p {
                                report.error(
                                    format!("loss_model.process_outage_table[{i}]"),
                                    "brackets must be strictly increasing in max_duration_hours",
                                );
                            }
                        }
                        prev = Some(max);
                    }
                }
            }
        }
    }
    check_unit_interval(&mut report, "loss_model", "slef", scenario.loss_model.slef);
    check_unit_interval(
        &mut report,
        "loss_model",
        "secondary_loss_fraction",
        scenario.loss_model.secondary_loss_fraction,
    );
    if scenario.budget_policy.hours_per_month < 0.0 {
        report.error("budget_policy", "hours_per_month must be nonnegative");
    }
    if scenario.budget_policy.culture_duration_multiplier <= 0.0 {
        report.error("budget_policy", "culture_duration_multiplier must be positive");
    }
    if scenario.budget_policy.backtrack_delay_hours < 0.0 {
        report.error("budget_policy", "backtrack_delay_hours must be nonnegative");
    }
    if scenario.variance_policy.extrinsic_rate_per_year < 0.0 {
        report.error("variance_policy", "extrinsic_rate_per_year must be nonnegative");
    }

    // Warnings: structure that is legal but defeats parts of the model.
    let monitored: BTreeSet<&str> = scenario
        .edges_of(EdgeType::VMC_MONITORS)
        .map(|e| e.target.as_str())
        .collect();
    let hosted: BTreeSet<&str> = scenario
        .edges_of(EdgeType::BA_HOSTED_BY_TA)
        .map(|e| e.source.as_str())
        .collect();
    let monitoring_vmcs_with_edges: BTreeSet<&str> = scenario
        .edges_of(EdgeType::VMC_MONITORS)
        .map(|e| e.source.as_str())
        .collect();

    for agent in &scenario.agents {
        let path = format!("agents.{}", agent.id);
        match &agent.params {
            AgentParams::Lec(lec) => {
                if !monitored.contains(agent.id.as_str()) {
                    // Controls do not self-heal: variance here is permanent.
                    let detail = if lec.control_type == ControlType::Resistance {
                        "variance on this resistance control can never be detected or remediated"
                    } else {
                        "control has no VMC_MONITORS in-edge; variance will go undetected"
                    };
                    report.warn(&path, detail);
                }
            }
            AgentParams::Vmc(vmc) => {
                if vmc.has_function(VmcFunction::ControlsMonitoring)
                    && !monitoring_vmcs_with_edges.contains(agent.id.as_str())
                {
                    report.warn(&path, "controls_monitoring vmc has no VMC_MONITORS out-edge");
                }
            }
            AgentParams::BusinessAsset(_) if !hosted.contains(agent.id.as_str()) => {
                report.warn(&path, "business asset is not hosted by any tech asset");
            }
            _ => {}
        }
    }

    report
}
