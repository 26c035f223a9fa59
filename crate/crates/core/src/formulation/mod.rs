//! Builds the shutoff MILPs (OPS, SC-OPS and the per-scenario contingency
//! evaluator) from a network, and maps solver output back to plans.
//!
//! Constraint tags name the equation family they encode, followed by the
//! component and scenario, e.g. `eq8a[line=3,c=0]`:
//!
//! | tag | meaning |
//! |-----|---------|
//! | `eq2` | pre-contingency served load ≥ α·D_tot |
//! | `eq3a`/`eq3b`/`eq3c` | load / generator / line de-energized with its bus |
//! | `eq4d` | a generator can trip after a contingency but never restart |
//! | `eq4e` | served load cannot increase after a contingency |
//! | `eq5` | additional post-contingency shed ≤ β·D_tot |
//! | `eq6lo`/`eq6hi` | post-contingency ramp window around the pre-contingency dispatch |
//! | `eq7lo`/`eq7hi` | generator output limits scaled by commitment |
//! | `eq8a`/`eq8b` | switched DC flow (big-M) |
//! | `eq8c_lo`/`eq8c_hi` | thermal limit scaled by line state |
//! | `angle_lo`/`angle_hi` | angle-difference cap on energized lines |
//! | `eq9` | nodal power balance |
//! | `eq13` | evaluator shed accounting, Σ(x0 − x)·D ≤ γ·D_tot |

mod bigm;
mod builder;
mod contingency;
mod evaluator;
mod plan;

pub use bigm::{compute_big_m, BigMBounds};
pub use builder::{build_ops, build_scops, VariableMap};
pub use contingency::{build_contingency_set, Contingency, ContingencyPolicy, ContingencySet};
pub use evaluator::{build_ce, gamma_of};
pub use plan::{extract_plan, ExtractedSolution, PlanSummary, ScenarioState, ShutoffPlan};

use thiserror::Error;

use crate::milp::{AuditReport, MilpError};
use crate::network::{LineId, NetworkError};

/// Scenario index: 0 is the pre-contingency state, contingencies use ids ≥ 1.
pub type ScenarioId = u32;
pub const PRE_CONTINGENCY: ScenarioId = 0;

/// Tolerance used when a solution must be audit-clean before extraction.
pub const EXTRACTION_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Model(#[from] MilpError),
    #[error("contingency {scenario} references unknown line {line}")]
    UnknownContingencyLine { scenario: ScenarioId, line: LineId },
    #[error("invalid contingency set: {0}")]
    BadContingency(String),
    #[error("inconsistent plan: {0}")]
    InconsistentPlan(String),
    #[error("assignment fails audit ({} violations, worst {:.3e}): refusing extraction", .0.violations.len(), .0.max_violation())]
    AuditFailed(Box<AuditReport>),
}
