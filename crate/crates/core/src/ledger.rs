//! Append-only event ledger.
//!
//! Every significant simulation event is recorded with a monotonically
//! increasing id and causal links to earlier events. The ledger is written
//! single-threaded by its run's engine; all causation analytics read it
//! post-hoc.

use serde::{Deserialize, Serialize};

pub type EventId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Variance,
    Detection,
    RemediationStart,
    RemediationComplete,
    Breach,
    Loss,
    ExtrinsicShock,
    Sweep,
}

/// Why a control left its intended state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource {
    IntrinsicRegular,
    IntrinsicIrregular,
    Extrinsic,
}

/// Snapshot of one control on the protection path at breach time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathControlSnapshot {
    pub control_id: String,
    pub control_type: crate::scenario::ControlType,
    pub intended_efficacy: f64,
    pub operational_efficacy: f64,
    /// True when the control was out of its intended state (variant or
    /// remediating) at breach time.
    pub variant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_event_id: Option<EventId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_source: Option<VarianceSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_since_tick: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detected_at_tick: Option<u64>,
    /// True when the control sat in the remediation queue at breach time.
    pub queued: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventPayload {
    Variance {
        control_id: String,
        source: VarianceSource,
        intended_efficacy: f64,
        variant_efficacy: f64,
    },
    Detection {
        vmc_id: String,
        control_id: String,
        undetected_hours: f64,
    },
    RemediationStart {
        control_id: String,
        cost_hours: f64,
        duration_hours: f64,
        queue_wait_hours: f64,
    },
    RemediationComplete {
        control_id: String,
        new_intended_efficacy: f64,
        variant_hours: f64,
    },
    Breach {
        threat_source_id: String,
        target_tech_asset: String,
        tcap: f64,
        combined_rs: f64,
        detected: bool,
        dwell_hours: f64,
        containment_hours: f64,
        recovery_hours: f64,
        affected_business_assets: Vec<String>,
        path_controls: Vec<PathControlSnapshot>,
        /// Detection-plane controls that were variant at breach time (not
        /// part of the resistance path, but causally relevant for dwell).
        variant_detection_controls: Vec<PathControlSnapshot>,
        budget_remaining_hours: f64,
    },
    Loss {
        breach_event_id: EventId,
        gross_loss: f64,
        net_loss: f64,
        primary_loss: f64,
        secondary_loss: f64,
        slef_triggered: bool,
        detected: bool,
        outage_hours: f64,
        per_asset: Vec<(String, f64)>,
    },
    ExtrinsicShock {
        affected_controls: Vec<String>,
    },
    Sweep {
        vmc_id: String,
        succeeded: bool,
        detections: u32,
        vmc_operational: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub event_id: EventId,
    pub tick: u64,
    pub kind: EventKind,
    pub subjects: Vec<String>,
    /// Links to earlier events only (acyclic, time-respecting).
    pub cause_links: Vec<EventId>,
    pub payload: EventPayload,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLedger {
    pub events: Vec<LedgerEvent>,
}

impl EventLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append an event; ids are assigned sequentially starting at 1.
    pub fn append(
        &mut self,
        tick: u64,
        kind: EventKind,
        subjects: Vec<String>,
        cause_links: Vec<EventId>,
        payload: EventPayload,
    ) -> EventId {
        let event_id = self.events.len() as EventId + 1;
        debug_assert!(cause_links.iter().all(|&c| c < event_id && c > 0));
        self.events.push(LedgerEvent { event_id, tick, kind, subjects, cause_links, payload });
        event_id
    }

    pub fn get(&self, id: EventId) -> Option<&LedgerEvent> {
        if id == 0 {
            return None;
        }
        self.events.get(id as usize - 1)
    }

    pub fn iter_kind(&self, kind: EventKind) -> impl Iterator<Item = &LedgerEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_monotone_and_resolvable() {
        let mut ledger = EventLedger::new();
        let a = ledger.append(
            1,
            EventKind::Variance,
            vec!["fw".into()],
            vec![],
            EventPayload::Variance {
                control_id: "fw".into(),
                source: VarianceSource::IntrinsicRegular,
                intended_efficacy: 0.8,
                variant_efficacy: 0.2,
            },
        );
        let b = ledger.append(
            5,
            EventKind::Detection,
            vec!["scanner".into(), "fw".into()],
            vec![a],
            EventPayload::Detection { vmc_id: "scanner".into(), control_id: "fw".into(), undetected_hours: 4.0 },
        );
        assert_eq!(a, 1);
        assert_eq!(b, 2);
        assert_eq!(ledger.get(a).unwrap().tick, 1);
        assert_eq!(ledger.get(b).unwrap().cause_links, vec![a]);
        assert!(ledger.get(0).is_none());
        assert!(ledger.get(99).is_none());
    }
}
