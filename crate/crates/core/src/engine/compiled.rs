//! Index-based view of a scenario for the simulation hot loop.
//!
//! Agents are resolved to dense indices in declaration order, and every
//! relationship the tick pipeline consults (protection rosters per asset,
//! monitoring/prevention/implementation wiring per control) is
//! precomputed. A `Compiled` value is immutable and shared read-only by
//! concurrent runs.

use std::collections::BTreeMap;

use crate::scenario::{
    ActorType, AgentParams, AlignmentDimension, AssetKind, ControlType, EdgeType, LognormalParams,
    PertParams, RemediationClass, Scenario, ScenarioError, SchedulingStrategy, ThreatSourceDecl,
    VmcFunction,
};

/// Which of the three control domains an agent lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlDomain {
    Lec(ControlType),
    Vmc,
    Dsc,
}

/// Remediation priority tier: resistance > detection > response > resilience.
/// Prevention-phase LECs share the top tier; VMCs queue with detection
/// (they are the monitoring fabric), DSCs with resilience.
pub fn priority_tier(domain: ControlDomain) -> u8 {
    match domain {
        ControlDomain::Lec(ControlType::Avoidance)
        | ControlDomain::Lec(ControlType::Deterrence)
        | ControlDomain::Lec(ControlType::Resistance) => 0,
        ControlDomain::Lec(t) if t.is_detection_subfunction() => 1,
        ControlDomain::Vmc => 1,
        ControlDomain::Lec(ControlType::ResponseContainment)
        | ControlDomain::Lec(ControlType::LossMinimization) => 2,
        ControlDomain::Lec(_) | ControlDomain::Dsc => 3,
    }
}

#[derive(Debug, Clone)]
pub struct VmcView {
    pub sweep_interval_dist: PertParams,
    pub detection_probability: f64,
    pub is_monitoring: bool,
    pub is_prevention: bool,
    pub reduces_variance_probability: bool,
    pub is_intel: bool,
    /// Controls this VMC watches (VMC_MONITORS out-edges).
    pub monitored: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ControlDef {
    pub id: String,
    pub domain: ControlDomain,
    pub intended_efficacy_dist: PertParams,
    pub change_frequency_dist: PertParams,
    pub is_binary: bool,
    pub is_software_based: bool,
    pub actor_type: ActorType,
    pub remediation_class: RemediationClass,
    pub cost_hours: f64,
    pub tier: u8,
    pub duration_hours_dist: Option<PertParams>,
    pub dsc_dimensions: Vec<AlignmentDimension>,
    pub vmc: Option<VmcView>,
    /// VMCs with a VMC_MONITORS edge onto this control.
    pub monitored_by: Vec<usize>,
    /// Subset of `monitored_by` with a variance-prevention function.
    pub prevention_vmcs: Vec<usize>,
    /// Subset with reduce_variance_probability specifically (gates the
    /// personnel-driven path).
    pub variance_probability_vmcs: Vec<usize>,
    /// VMCs whose VMC_IMPLEMENTS edge gates this control's remediation.
    pub implements_vmcs: Vec<usize>,
    /// VMCs with VMC_SELECTS_TREATMENT onto this control (causation only).
    pub treatment_vmcs: Vec<usize>,
    /// First declared operator, if any.
    pub operator: Option<usize>,
    /// Business assets reachable through the tech assets this LEC protects.
    pub protected_ba_count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ProtectionRoster {
    pub avoidance: Vec<usize>,
    pub deterrence: Vec<usize>,
    pub resistance: Vec<usize>,
    pub visibility: Vec<usize>,
    pub monitoring: Vec<usize>,
    pub recognition: Vec<usize>,
    pub containment: Vec<usize>,
    pub resilience: Vec<usize>,
    pub loss_minimization: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TechAssetDef {
    pub id: String,
    pub roster: ProtectionRoster,
    /// Business assets hosted on this tech asset.
    pub hosted_bas: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BusinessAssetDef {
    pub id: String,
    pub kind: AssetKind,
    pub lognormal: Option<LognormalParams>,
}

#[derive(Debug, Clone)]
pub struct ThreatSourceDef {
    pub id: String,
    pub decl: ThreatSourceDecl,
    pub targets: Vec<usize>,
    /// VMCs feeding intel on this threat source.
    pub intel_vmcs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PersonnelDef {
    pub id: String,
    pub has_admin: bool,
    pub operates: Vec<usize>,
    pub influencing_dscs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub name: String,
    pub horizon_ticks: u64,
    pub controls: Vec<ControlDef>,
    pub tech_assets: Vec<TechAssetDef>,
    pub business_assets: Vec<BusinessAssetDef>,
    pub threat_sources: Vec<ThreatSourceDef>,
    pub personnel: Vec<PersonnelDef>,
    pub budget: crate::scenario::BudgetPolicy,
    pub variance: crate::scenario::VariancePolicy,
    pub loss_model: crate::scenario::LossModelConfig,
    pub flags: crate::scenario::FeatureFlags,
}

impl Compiled {
    pub fn control_index(&self, id: &str) -> Option<usize> {
        self.controls.iter().position(|c| c.id == id)
    }

    pub fn strategy_key(&self, control: usize) -> StrategyKeyInputs {
        let c = &self.controls[control];
        StrategyKeyInputs {
            cost_hours: c.cost_hours,
            protected_ba_count: c.protected_ba_count,
            strategy: self.budget.scheduling_strategy,
        }
    }
}

/// Inputs for computing a queue item's within-tier ordering key.
#[derive(Debug, Clone, Copy)]
pub struct StrategyKeyInputs {
    pub cost_hours: f64,
    pub protected_ba_count: usize,
    pub strategy: SchedulingStrategy,
}

impl StrategyKeyInputs {
    /// Ascending sort key; smaller starts first within a tier.
    pub fn key(&self, intended_efficacy: f64) -> f64 {
        match self.strategy {
            SchedulingStrategy::BudgetEfficiency => self.cost_hours,
            SchedulingStrategy::PerceivedRisk => -intended_efficacy,
            SchedulingStrategy::WorstCaseImpact => {
                -(intended_efficacy * self.protected_ba_count as f64)
            }
        }
    }
}

fn err(msg: String) -> ScenarioError {
    ScenarioError::Invalid(msg)
}

/// Resolve a scenario into the index-based runtime view. Fails on broken
/// references; run [`crate::validation::validate_scenario`] first for a
/// complete report.
pub fn compile(scenario: &Scenario) -> Result<Compiled, ScenarioError> {
    let mut control_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut tech_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut ba_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut ts_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut person_ids: BTreeMap<&str, usize> = BTreeMap::new();

    let mut controls: Vec<ControlDef> = Vec::new();
    let mut tech_assets: Vec<TechAssetDef> = Vec::new();
    let mut business_assets: Vec<BusinessAssetDef> = Vec::new();
    let mut threat_sources: Vec<ThreatSourceDef> = Vec::new();
    let mut personnel: Vec<PersonnelDef> = Vec::new();

    for agent in &scenario.agents {
        match &agent.params {
            AgentParams::Lec(lec) => {
                let domain = ControlDomain::Lec(lec.control_type);
                control_ids.insert(agent.id.as_str(), controls.len());
                controls.push(ControlDef {
                    id: agent.id.clone(),
                    domain,
                    intended_efficacy_dist: lec.intended_efficacy_dist,
                    change_frequency_dist: lec.change_frequency_dist,
                    is_binary: lec.is_binary,
                    is_software_based: lec.is_software_based,
                    actor_type: lec.actor_type,
                    remediation_class: lec.remediation_class,
                    cost_hours: scenario.variance_policy.hours_for_class(lec.remediation_class),
                    tier: priority_tier(domain),
                    duration_hours_dist: lec.duration_hours_dist,
                    dsc_dimensions: Vec::new(),
                    vmc: None,
                    monitored_by: Vec::new(),
                    prevention_vmcs: Vec::new(),
                    variance_probability_vmcs: Vec::new(),
                    implements_vmcs: Vec::new(),
                    treatment_vmcs: Vec::new(),
                    operator: None,
                    protected_ba_count: 0,
                });
            }
            AgentParams::Vmc(vmc) => {
                control_ids.insert(agent.id.as_str(), controls.len());
                controls.push(ControlDef {
                    id: agent.id.clone(),
                    domain: ControlDomain::Vmc,
                    intended_efficacy_dist: vmc.efficacy_dist,
                    change_frequency_dist: vmc.change_frequency_dist,
                    is_binary: vmc.is_binary,
                    is_software_based: vmc.is_software_based,
                    actor_type: ActorType::Automated,
                    remediation_class: vmc.remediation_class,
                    cost_hours: scenario.variance_policy.hours_for_class(vmc.remediation_class),
                    tier: priority_tier(ControlDomain::Vmc),
                    duration_hours_dist: None,
                    dsc_dimensions: Vec::new(),
                    vmc: Some(VmcView {
                        sweep_interval_dist: vmc.sweep_interval_dist,
                        detection_probability: vmc.detection_probability,
                        is_monitoring: vmc.has_function(VmcFunction::ControlsMonitoring),
                        is_prevention: vmc.has_function(VmcFunction::ReduceChangeFrequency)
                            || vmc.has_function(VmcFunction::ReduceVarianceProbability),
                        reduces_variance_probability: vmc
                            .has_function(VmcFunction::ReduceVarianceProbability),
                        is_intel: vmc.has_function(VmcFunction::ThreatIntel),
                        monitored: Vec::new(),
                    }),
                    monitored_by: Vec::new(),
                    prevention_vmcs: Vec::new(),
                    variance_probability_vmcs: Vec::new(),
                    implements_vmcs: Vec::new(),
                    treatment_vmcs: Vec::new(),
                    operator: None,
                    protected_ba_count: 0,
                });
            }
            AgentParams::Dsc(dsc) => {
                control_ids.insert(agent.id.as_str(), controls.len());
                controls.push(ControlDef {
                    id: agent.id.clone(),
                    domain: ControlDomain::Dsc,
                    intended_efficacy_dist: dsc.efficacy_dist,
                    change_frequency_dist: dsc.change_frequency_dist,
                    is_binary: dsc.is_binary,
                    is_software_based: dsc.is_software_based,
                    actor_type: ActorType::Automated,
                    remediation_class: dsc.remediation_class,
                    cost_hours: scenario.variance_policy.hours_for_class(dsc.remediation_class),
                    tier: priority_tier(ControlDomain::Dsc),
                    duration_hours_dist: None,
                    dsc_dimensions: dsc.dimensions.clone(),
                    vmc: None,
                    monitored_by: Vec::new(),
                    prevention_vmcs: Vec::new(),
                    variance_probability_vmcs: Vec::new(),
                    implements_vmcs: Vec::new(),
                    treatment_vmcs: Vec::new(),
                    operator: None,
                    protected_ba_count: 0,
                });
            }
            AgentParams::TechAsset {} => {
                tech_ids.insert(agent.id.as_str(), tech_assets.len());
                tech_assets.push(TechAssetDef {
                    id: agent.id.clone(),
                    roster: ProtectionRoster::default(),
                    hosted_bas: Vec::new(),
                });
            }
            AgentParams::BusinessAsset(ba) => {
                let lognormal = match ba.asset_kind {
                    AssetKind::Information => {
                        let class = ba.value_class.as_deref().ok_or_else(|| {
                            err(format!("business asset '{}' missing value_class", agent.id))
                        })?;
                        Some(*scenario.loss_model.info_asset_lognormal.get(class).ok_or_else(
                            || err(format!("unknown value_class '{class}' on '{}'", agent.id)),
                        )?)
                    }
                    AssetKind::Process => None,
                };
                ba_ids.insert(agent.id.as_str(), business_assets.len());
                business_assets.push(BusinessAssetDef {
                    id: agent.id.clone(),
                    kind: ba.asset_kind,
                    lognormal,
                });
            }
            AgentParams::ThreatSource(ts) => {
                ts_ids.insert(agent.id.as_str(), threat_sources.len());
                threat_sources.push(ThreatSourceDef {
                    id: agent.id.clone(),
                    decl: ts.clone(),
                    targets: Vec::new(),
                    intel_vmcs: Vec::new(),
                });
            }
            AgentParams::Personnel(p) => {
                person_ids.insert(agent.id.as_str(), personnel.len());
                personnel.push(PersonnelDef {
                    id: agent.id.clone(),
                    has_admin: p.has_admin,
                    operates: Vec::new(),
                    influencing_dscs: Vec::new(),
                });
            }
        }
    }

    // Resolve threat source targets.
    for ts in &mut threat_sources {
        if ts.decl.target_asset_ids.is_empty() {
            return Err(err(format!("threat source '{}' has no targets", ts.id)));
        }
        for t in &ts.decl.target_asset_ids {
            let idx = tech_ids
                .get(t.as_str())
                .ok_or_else(|| err(format!("threat source '{}' targets unknown asset '{t}'", ts.id)))?;
            ts.targets.push(*idx);
        }
    }

    // Wire edges.
    for edge in &scenario.edges {
        let missing =
            |which: &str| err(format!("edge {:?} references undeclared agent '{which}'", edge.edge_type));
        match edge.edge_type {
            EdgeType::LEC_PROTECTS_ASSET => {
                let lec = *control_ids.get(edge.source.as_str()).ok_or_else(|| missing(&edge.source))?;
                let asset = *tech_ids.get(edge.target.as_str()).ok_or_else(|| missing(&edge.target))?;
                let roster = &mut tech_assets[asset].roster;
                match controls[lec].domain {
                    ControlDomain::Lec(t) => match t {
                        ControlType::Avoidance => roster.avoidance.push(lec),
                        ControlType::Deterrence => roster.deterrence.push(lec),
                        ControlType::Resistance => roster.resistance.push(lec),
                        ControlType::DetectionVisibility => roster.visibility.push(lec),
                        ControlType::DetectionMonitoring => roster.monitoring.push(lec),
                        ControlType::DetectionRecognition => roster.recognition.push(lec),
                        ControlType::ResponseContainment => roster.containment.push(lec),
                        ControlType::ResponseResilience => roster.resilience.push(lec),
                        ControlType::LossMinimization => roster.loss_minimization.push(lec),
                    },
                    _ => return Err(err(format!("LEC_PROTECTS_ASSET source '{}' is not a LEC", edge.source))),
                }
            }
            EdgeType::VMC_MONITORS => {
                let vmc = *control_ids.get(edge.source.as_str()).ok_or_else(|| missing(&edge.source))?;
                let target = *control_ids.get(edge.target.as_str()).ok_or_else(|| missing(&edge.target))?;
                controls[target].monitored_by.push(vmc);
                let (is_prevention, reduces_vp) = match &controls[vmc].vmc {
                    Some(v) => (v.is_prevention, v.reduces_variance_probability),
                    None => return Err(err(format!("VMC_MONITORS source '{}' is not a VMC", edge.source))),
                };
                if is_prevention {
                    controls[target].prevention_vmcs.push(vmc);
                }
                if reduces_vp {
                    controls[target].variance_probability_vmcs.push(vmc);
                }
                controls[vmc].vmc.as_mut().unwrap().monitored.push(target);
            }
            EdgeType::VMC_IMPLEMENTS => {
                let vmc = *control_ids.get(edge.source.as_str()).ok_or_else(|| missing(&edge.source))?;
                let target = *control_ids.get(edge.target.as_str()).ok_or_else(|| missing(&edge.target))?;
                controls[target].implements_vmcs.push(vmc);
            }
            EdgeType::VMC_SELECTS_TREATMENT => {
                let vmc = *control_ids.get(edge.source.as_str()).ok_or_else(|| missing(&edge.source))?;
                let target = *control_ids.get(edge.target.as_str()).ok_or_else(|| missing(&edge.target))?;
                controls[target].treatment_vmcs.push(vmc);
            }
            EdgeType::VMC_THREAT_INTEL => {
                let vmc = *control_ids.get(edge.source.as_str()).ok_or_else(|| missing(&edge.source))?;
                let ts = *ts_ids.get(edge.target.as_str()).ok_or_else(|| missing(&edge.target))?;
                threat_sources[ts].intel_vmcs.push(vmc);
            }
            EdgeType::BA_HOSTED_BY_TA => {
                let ba = *ba_ids.get(edge.source.as_str()).ok_or_else(|| missing(&edge.source))?;
                let asset = *tech_ids.get(edge.target.as_str()).ok_or_else(|| missing(&edge.target))?;
                tech_assets[asset].hosted_bas.push(ba);
            }
            EdgeType::PERSONNEL_OPERATES => {
                let person = *person_ids.get(edge.source.as_str()).ok_or_else(|| missing(&edge.source))?;
                let target = *control_ids.get(edge.target.as_str()).ok_or_else(|| missing(&edge.target))?;
                personnel[person].operates.push(target);
                if controls[target].operator.is_none() {
                    controls[target].operator = Some(person);
                }
            }
            EdgeType::DSC_INFLUENCES => {
                let dsc = *control_ids.get(edge.source.as_str()).ok_or_else(|| missing(&edge.source))?;
                let person = *person_ids.get(edge.target.as_str()).ok_or_else(|| missing(&edge.target))?;
                personnel[person].influencing_dscs.push(dsc);
            }
            // Parsed and validated, but inert in this version: the model
            // carries no lateral-movement mechanics.
            EdgeType::TECH_CONNECTS_TECH => {}
        }
    }

    // Business-asset exposure per LEC, for the worst_case_impact key.
    for (li, lec_ids) in scenario
        .edges_of(EdgeType::LEC_PROTECTS_ASSET)
        .fold(BTreeMap::<usize, Vec<usize>>::new(), |mut acc, e| {
            if let (Some(&l), Some(&t)) = (control_ids.get(e.source.as_str()), tech_ids.get(e.target.as_str())) {
                acc.entry(l).or_default().push(t);
            }
            acc
        })
    {
        let count: usize = lec_ids.iter().map(|&t| tech_assets[t].hosted_bas.len()).sum();
        controls[li].protected_ba_count = count;
    }

    Ok(Compiled {
        name: scenario.name.clone(),
        horizon_ticks: scenario.horizon_ticks,
        controls,
        tech_assets,
        business_assets,
        threat_sources,
        personnel,
        budget: scenario.budget_policy.clone(),
        variance: scenario.variance_policy.clone(),
        loss_model: scenario.loss_model.clone(),
        flags: scenario.feature_flags,
    })
}
