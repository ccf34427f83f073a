//! Deterministic agent-based simulator of FAIR-CAM control physiology.
//!
//! The crate runs seeded hourly-tick simulations of threat contacts against
//! a declared organizational control topology, models control variance,
//! detection and remediation dynamics under budget constraints, traces
//! every loss event to organizational root causes, and runs Monte Carlo
//! ensembles with sensitivity sweeps and statistics.
//!
//! Module map:
//! - [`scenario`] / [`validation`]: declarative scenario model and checks
//! - [`stochastic`]: seeded per-purpose random streams
//! - [`engine`]: the nine-step tick pipeline for a single run
//! - [`ledger`]: append-only event record with causal links
//! - [`causation`]: chains, counterfactual classification, linchpins,
//!   cascade windows, trace completeness
//! - [`analytics`]: batches, divergence, sweeps, bootstrap statistics
//! - [`report`]: CSV/JSON export with atomic writes

pub mod analytics;
pub mod causation;
pub mod engine;
pub mod ledger;
pub mod report;
pub mod scenario;
pub mod stochastic;
pub mod validation;

pub use engine::{run_simulation, Engine, RunOutput};
pub use scenario::{Scenario, ScenarioError};
pub use validation::{validate_scenario, ValidationReport};
