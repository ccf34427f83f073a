//! Declarative scenario model: agents, typed-edge multigraph, distributions,
//! and policies. Scenarios are immutable after load and safe to share
//! read-only across concurrent simulation runs.
//!
//! The on-disk format is a single JSON document with top-level keys `name`,
//! `horizon_ticks`, `agents`, `edges`, `budget_policy`, `variance_policy`,
//! `loss_model` and `feature_flags`. Distribution parameters are objects
//! `{min, mode, max}` (optional `shape`, default 4).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::stochastic::PertParams;

// ============================================================================
// Agent declarations
// ============================================================================

/// The nine LEC control functions, grouped into prevention, detection and
/// response phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlType {
    Avoidance,
    Deterrence,
    Resistance,
    DetectionVisibility,
    DetectionMonitoring,
    DetectionRecognition,
    ResponseContainment,
    ResponseResilience,
    LossMinimization,
}

impl ControlType {
    pub fn is_detection_subfunction(self) -> bool {
        matches!(
            self,
            ControlType::DetectionVisibility
                | ControlType::DetectionMonitoring
                | ControlType::DetectionRecognition
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorType {
    Automated,
    Human,
}

/// Remediation effort class; hours come from
/// [`VariancePolicy::remediation_hours_by_class`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RemediationClass {
    Low,
    Medium,
    High,
    #[default]
    Default,
}

/// Variance-management functions a VMC can perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VmcFunction {
    ReduceChangeFrequency,
    ReduceVarianceProbability,
    ControlsMonitoring,
    ThreatIntel,
    TreatmentSelection,
    Implements,
}

/// The five decision-alignment dimensions evaluated for personnel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentDimension {
    Expectation,
    Awareness,
    Capability,
    SituationalAwareness,
    Incentive,
}

pub const ALL_DIMENSIONS: [AlignmentDimension; 5] = [
    AlignmentDimension::Expectation,
    AlignmentDimension::Awareness,
    AlignmentDimension::Capability,
    AlignmentDimension::SituationalAwareness,
    AlignmentDimension::Incentive,
];

fn all_dimensions_vec() -> Vec<AlignmentDimension> {
    ALL_DIMENSIONS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LecDecl {
    pub control_type: ControlType,
    pub intended_efficacy_dist: PertParams,
    #[serde(default)]
    pub is_binary: bool,
    #[serde(default)]
    pub is_software_based: bool,
    #[serde(default = "default_actor")]
    pub actor_type: ActorType,
    pub change_frequency_dist: PertParams,
    #[serde(default)]
    pub remediation_class: RemediationClass,
    /// Duration draw for response-phase controls (containment/recovery
    /// hours). Falls back to engine defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_hours_dist: Option<PertParams>,
}

fn default_actor() -> ActorType {
    ActorType::Automated
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmcDecl {
    pub functions: Vec<VmcFunction>,
    pub sweep_interval_dist: PertParams,
    pub detection_probability: f64,
    pub efficacy_dist: PertParams,
    #[serde(default)]
    pub is_binary: bool,
    #[serde(default)]
    pub is_software_based: bool,
    pub change_frequency_dist: PertParams,
    #[serde(default)]
    pub remediation_class: RemediationClass,
}

impl VmcDecl {
    pub fn has_function(&self, f: VmcFunction) -> bool {
        self.functions.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DscDecl {
    pub efficacy_dist: PertParams,
    /// Alignment dimensions this control supports; all five by default.
    #[serde(default = "all_dimensions_vec")]
    pub dimensions: Vec<AlignmentDimension>,
    #[serde(default)]
    pub is_binary: bool,
    #[serde(default)]
    pub is_software_based: bool,
    /// DSCs drift like any other control; omit for an effectively static DSC.
    #[serde(default = "never_changes")]
    pub change_frequency_dist: PertParams,
    #[serde(default)]
    pub remediation_class: RemediationClass,
}

fn never_changes() -> PertParams {
    PertParams::point(1.0e9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatSourceDecl {
    pub contact_rate_per_year: f64,
    pub sophistication_dist: PertParams,
    /// Deterrence applies only to threats that exercise choice.
    #[serde(default)]
    pub exercises_choice: bool,
    pub target_asset_ids: Vec<String>,
    #[serde(default = "default_action_probability")]
    pub probability_of_action: f64,
}

fn default_action_probability() -> f64 {
    1.0
}

/// Whether a business asset carries information value (lognormal loss) or
/// process value (outage-duration loss).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Information,
    Process,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusinessAssetDecl {
    pub asset_kind: AssetKind,
    /// Key into [`LossModelConfig::info_asset_lognormal`]; required for
    /// information assets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonnelDecl {
    #[serde(default = "default_true")]
    pub has_admin: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum AgentParams {
    ThreatSource(ThreatSourceDecl),
    TechAsset {},
    BusinessAsset(BusinessAssetDecl),
    #[serde(rename = "lec")]
    Lec(LecDecl),
    #[serde(rename = "vmc")]
    Vmc(VmcDecl),
    #[serde(rename = "dsc")]
    Dsc(DscDecl),
    Personnel(PersonnelDecl),
}

impl AgentParams {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AgentParams::ThreatSource(_) => "threat_source",
            AgentParams::TechAsset {} => "tech_asset",
            AgentParams::BusinessAsset(_) => "business_asset",
            AgentParams::Lec(_) => "lec",
            AgentParams::Vmc(_) => "vmc",
            AgentParams::Dsc(_) => "dsc",
            AgentParams::Personnel(_) => "personnel",
        }
    }

    /// True for the three managed control domains (LEC/VMC/DSC).
    pub fn is_control(&self) -> bool {
        matches!(self, AgentParams::Lec(_) | AgentParams::Vmc(_) | AgentParams::Dsc(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDecl {
    pub id: String,
    #[serde(flatten)]
    pub params: AgentParams,
}

// ============================================================================
// Edges
// ============================================================================

/// The nine relationship types of the organizational multigraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum EdgeType {
    LEC_PROTECTS_ASSET,
    VMC_MONITORS,
    DSC_INFLUENCES,
    TECH_CONNECTS_TECH,
    BA_HOSTED_BY_TA,
    PERSONNEL_OPERATES,
    VMC_THREAT_INTEL,
    VMC_SELECTS_TREATMENT,
    VMC_IMPLEMENTS,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDecl {
    #[serde(rename = "type")]
    pub edge_type: EdgeType,
    pub source: String,
    pub target: String,
}

// ============================================================================
// Policies
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetCadence {
    MonthlyReset,
    QuarterlyPooling,
    ContinuousAccrual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulingStrategy {
    /// Cheapest-first within priority tier.
    BudgetEfficiency,
    /// Highest intended efficacy first within tier.
    PerceivedRisk,
    /// Highest (intended efficacy x protected business assets) first.
    WorstCaseImpact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetPolicy {
    pub hours_per_month: f64,
    pub cadence: BudgetCadence,
    pub scheduling_strategy: SchedulingStrategy,
    pub culture_duration_multiplier: f64,
    pub backtrack_delay_hours: f64,
}

impl Default for BudgetPolicy {
    fn default() -> Self {
        Self {
            hours_per_month: 40.0,
            cadence: BudgetCadence::MonthlyReset,
            scheduling_strategy: SchedulingStrategy::BudgetEfficiency,
            culture_duration_multiplier: 1.0,
            backtrack_delay_hours: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariancePolicy {
    pub extrinsic_rate_per_year: f64,
    pub remediation_hours_by_class: BTreeMap<RemediationClass, f64>,
    pub undetected_dwell_hours: f64,
    /// Dwell multiplier applied when a healthy threat-intel VMC covers the
    /// breaching threat source.
    pub intel_dwell_multiplier: f64,
}

impl VariancePolicy {
    pub fn hours_for_class(&self, class: RemediationClass) -> f64 {
        self.remediation_hours_by_class
            .get(&class)
            .copied()
            .unwrap_or_else(|| default_class_hours(class))
    }
}

fn default_class_hours(class: RemediationClass) -> f64 {
    match class {
        RemediationClass::Low => 4.0,
        RemediationClass::Medium => 16.0,
        RemediationClass::High => 40.0,
        RemediationClass::Default => 8.0,
    }
}

impl Default for VariancePolicy {
    fn default() -> Self {
        let mut by_class = BTreeMap::new();
        for class in [
            RemediationClass::Low,
            RemediationClass::Medium,
            RemediationClass::High,
            RemediationClass::Default,
        ] {
            by_class.insert(class, default_class_hours(class));
        }
        Self {
            extrinsic_rate_per_year: 1.0,
            remediation_hours_by_class: by_class,
            undetected_dwell_hours: 264.0,
            intel_dwell_multiplier: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalParams {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageBracket {
    /// Upper bound in hours; the final bracket is open-ended (`null`).
    pub max_duration_hours: Option<f64>,
    pub cost_dollars: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossModelConfig {
    pub info_asset_lognormal: BTreeMap<String, LognormalParams>,
    pub process_outage_table: Vec<OutageBracket>,
    /// Probability a primary loss triggers secondary consequences.
    pub slef: f64,
    /// Fraction of gross loss classified secondary when SLEF triggers.
    pub secondary_loss_fraction: f64,
}

impl Default for LossModelConfig {
    fn default() -> Self {
        Self {
            info_asset_lognormal: BTreeMap::new(),
            process_outage_table: vec![OutageBracket { max_duration_hours: None, cost_dollars: 0.0 }],
            slef: 0.0,
            secondary_loss_fraction: 0.0,
        }
    }
}

impl LossModelConfig {
    /// Bracket lookup on total outage hours.
    pub fn outage_cost(&self, outage_hours: f64) -> f64 {
        for bracket in &self.process_outage_table {
            match bracket.max_duration_hours {
                Some(max) if outage_hours <= max => return bracket.cost_dollars,
                Some(_) => continue,
                None => return bracket.cost_dollars,
            }
        }
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FeatureFlags {
    pub dsc_alignment_enabled: bool,
    /// When true, extrinsic shocks also push software-based VMCs/DSCs into
    /// variant state (not just LECs).
    pub extrinsic_affects_detection_controls: bool,
    /// Monthly personnel-driven variance checks.
    pub intrinsic_irregular_enabled: bool,
}

// ============================================================================
// Scenario
// ============================================================================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub horizon_ticks: u64,
    pub agents: Vec<AgentDecl>,
    pub edges: Vec<EdgeDecl>,
    #[serde(default)]
    pub budget_policy: BudgetPolicy,
    #[serde(default)]
    pub variance_policy: VariancePolicy,
    #[serde(default)]
    pub loss_model: LossModelConfig,
    #[serde(default)]
    pub feature_flags: FeatureFlags,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scenario validation failed:\n{0}")]
    Invalid(String),
}

impl Scenario {
    /// Parse a scenario document, applying defaults to omitted optional
    /// fields. Structural integrity is checked separately by
    /// [`crate::validation::validate_scenario`].
    pub fn from_json(source_text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(source_text)?;
        Ok(scenario)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn agent(&self, id: &str) -> Option<&AgentDecl> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn lec_count(&self) -> usize {
        self.agents.iter().filter(|a| matches!(a.params, AgentParams::Lec(_))).count()
    }

    pub fn vmc_count(&self) -> usize {
        self.agents.iter().filter(|a| matches!(a.params, AgentParams::Vmc(_))).count()
    }

    pub fn edges_of(&self, edge_type: EdgeType) -> impl Iterator<Item = &EdgeDecl> {
        self.edges.iter().filter(move |e| e.edge_type == edge_type)
    }
}

/// Legal endpoint kinds for each edge type, as `(source ok, target ok)`
/// predicates over the declared agent kinds.
pub fn edge_endpoints_legal(edge_type: EdgeType, source: &AgentParams, target: &AgentParams) -> bool {
    use AgentParams as P;
    match edge_type {
        EdgeType::LEC_PROTECTS_ASSET => {
            matches!(source, P::Lec(_)) && matches!(target, P::TechAsset {})
        }
        EdgeType::VMC_MONITORS => matches!(source, P::Vmc(_)) && target.is_control(),
        EdgeType::DSC_INFLUENCES => {
            matches!(source, P::Dsc(_)) && matches!(target, P::Personnel(_))
        }
        EdgeType::TECH_CONNECTS_TECH => {
            matches!(source, P::TechAsset {}) && matches!(target, P::TechAsset {})
        }
        EdgeType::BA_HOSTED_BY_TA => {
            matches!(source, P::BusinessAsset(_)) && matches!(target, P::TechAsset {})
        }
        EdgeType::PERSONNEL_OPERATES => matches!(source, P::Personnel(_)) && target.is_control(),
        EdgeType::VMC_THREAT_INTEL => {
            matches!(source, P::Vmc(_)) && matches!(target, P::ThreatSource(_))
        }
        EdgeType::VMC_SELECTS_TREATMENT | EdgeType::VMC_IMPLEMENTS => {
            matches!(source, P::Vmc(_)) && target.is_control()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal",
        "horizon_ticks": 8760,
        "agents": [
            {"id": "apt", "kind": "threat_source", "params": {
                "contact_rate_per_year": 12,
                "sophistication_dist": {"min": 0.2, "mode": 0.5, "max": 0.9},
                "target_asset_ids": ["server"]
            }},
            {"id": "server", "kind": "tech_asset", "params": {}},
            {"id": "fw", "kind": "lec", "params": {
                "control_type": "resistance",
                "intended_efficacy_dist": {"min": 0.7, "mode": 0.8, "max": 0.9},
                "change_frequency_dist": {"min": 4000, "mode": 6000, "max": 9000}
            }}
        ],
        "edges": [
            {"type": "LEC_PROTECTS_ASSET", "source": "fw", "target": "server"}
        ]
    }"#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.budget_policy.hours_per_month, 40.0);
        assert_eq!(s.budget_policy.cadence, BudgetCadence::MonthlyReset);
        assert_eq!(s.variance_policy.undetected_dwell_hours, 264.0);
        assert_eq!(s.variance_policy.hours_for_class(RemediationClass::Low), 4.0);
        assert_eq!(s.variance_policy.hours_for_class(RemediationClass::High), 40.0);
        assert!(!s.feature_flags.dsc_alignment_enabled);
        assert_eq!(s.lec_count(), 1);
    }

    #[test]
    fn unknown_kind_is_a_parse_error() {
        let bad = MINIMAL.replace("\"kind\": \"tech_asset\"", "\"kind\": \"mainframe\"");
        let err = Scenario::from_json(&bad).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    #[test]
    fn missing_required_field_is_a_parse_error() {
        let bad = MINIMAL.replace("\"contact_rate_per_year\": 12,", "");
        assert!(Scenario::from_json(&bad).is_err());
    }

    #[test]
    fn round_trip_preserves_structure() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        let again = Scenario::from_json(&s.to_json_pretty()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn outage_table_lookup_uses_brackets() {
        let lm = LossModelConfig {
            process_outage_table: vec![
                OutageBracket { max_duration_hours: Some(24.0), cost_dollars: 100_000.0 },
                OutageBracket { max_duration_hours: Some(72.0), cost_dollars: 400_000.0 },
                OutageBracket { max_duration_hours: None, cost_dollars: 1_000_000.0 },
            ],
            ..Default::default()
        };
        assert_eq!(lm.outage_cost(10.0), 100_000.0);
        assert_eq!(lm.outage_cost(30.0), 400_000.0);
        assert_eq!(lm.outage_cost(72.0), 400_000.0);
        assert_eq!(lm.outage_cost(500.0), 1_000_000.0);
    }
}
