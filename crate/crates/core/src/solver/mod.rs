//! MILP solving: an internal LP engine with branch-and-bound, a bridge to
//! external solvers through MPS files, and brute-force oracles used to
//! validate both.

mod bnb;
mod dense;
mod external;
mod lp;
mod oracle;

pub use bnb::solve_milp;
pub use dense::{DenseLp, DenseOutcome};
pub use external::{parse_cbc_solution, parse_highs_solution, solve_external, ExternalSolution};
pub use lp::solve_lp;
pub use oracle::{enumerate_oracle, oracle_evaluate, OracleResult, ORACLE_MAX_LINES};

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{Assignment, AuditReport, MilpError, MilpModel};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "command", rename_all = "snake_case")]
pub enum Backend {
    Internal,
    /// Shell command template containing `{mps}` and `{sol}` placeholders.
    External(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub backend: Backend,
    pub mip_rel_gap: f64,
    pub integrality_tol: f64,
    pub feasibility_tol: f64,
    #[serde(default, with = "secs_opt")]
    pub time_limit: Option<Duration>,
    #[serde(default)]
    pub node_limit: Option<u64>,
    /// Recorded with results. The internal search is deterministic and does
    /// not draw random numbers.
    #[serde(default)]
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Internal,
            mip_rel_gap: 1e-6,
            integrality_tol: 1e-6,
            feasibility_tol: 1e-7,
            time_limit: None,
            node_limit: None,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SolverError::Options(format!("{name} must be positive, got {v}")))
            }
        };
        positive("feasibility_tol", self.feasibility_tol)?;
        positive("integrality_tol", self.integrality_tol)?;
        if !(self.mip_rel_gap >= 0.0 && self.mip_rel_gap.is_finite()) {
            return Err(SolverError::Options(format!(
                "mip_rel_gap must be non-negative, got {}",
                self.mip_rel_gap
            )));
        }
        if self.integrality_tol >= 0.5 {
            return Err(SolverError::Options("integrality_tol must be below 0.5".into()));
        }
        if let Backend::External(cmd) = &self.backend {
            if !cmd.contains("{mps}") || !cmd.contains("{sol}") {
                return Err(SolverError::Options(
                    "external command template needs {mps} and {sol} placeholders".into(),
                ));
            }
        }
        Ok(())
    }
}

mod secs_opt {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        let secs: Option<f64> = Option::deserialize(d)?;
        secs.map(|s| Duration::try_from_secs_f64(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::NodeLimit => "node_limit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub assignment: Option<Assignment>,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes_explored: u64,
    pub wall_time: f64,
}

impl SolveResult {
    pub(crate) fn without_solution(status: SolveStatus, best_bound: f64, nodes: u64, wall_time: f64) -> Self {
        Self {
            status,
            objective: None,
            assignment: None,
            best_bound,
            gap: f64::INFINITY,
            nodes_explored: nodes,
            wall_time,
        }
    }

    pub fn has_solution(&self) -> bool {
        self.assignment.is_some()
    }
}

/// Relative gap between an incumbent and a lower bound; the denominator is
/// floored at 1 so objectives near zero use an absolute gap.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("model contains binary variables; relax integrality before calling solve_lp")]
    NotContinuous,
    #[error(transparent)]
    Model(#[from] MilpError),
    #[error("numerical failure in LP engine: {0}")]
    Numerical(String),
    #[error("external solver unavailable: {0}")]
    Environment(String),
    #[error("external solver exited with {status}: {stderr}")]
    ExternalExit { status: String, stderr: String },
    #[error("cannot parse solution file: {0}")]
    SolutionParse(String),
    #[error("solver returned an assignment that fails audit (worst violation {:.3e})", .0.max_violation())]
    Integrity(Box<AuditReport>),
    #[error("oracle refuses networks with {lines} lines (limit {limit})")]
    OracleTooLarge { lines: usize, limit: usize },
    #[error("oracle input rejected: {0}")]
    OracleInput(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Solves `model` with the configured backend.
pub fn solve(model: &MilpModel, options: &SolverOptions) -> Result<SolveResult, SolverError> {
    match &options.backend {
        Backend::Internal => solve_milp(model, options),
        Backend::External(_) => solve_external(model, options),
    }
}
