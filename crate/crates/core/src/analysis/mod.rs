//! Experiment engine: solving plans, evaluating them against contingencies,
//! α×β sweeps, OPS/SC-OPS trade-off curves and topology metrics.

mod evaluate;
mod export;
mod plan_solve;
mod sweep;
mod topology;

pub use evaluate::{evaluate_plan, ContingencyOutcome, EvaluationReport, WorstCase};
pub use export::{evaluation_csv, sweep_csv, tradeoff_csv};
pub use plan_solve::{solve_plan, PlanOutcome, Problem};
pub use sweep::{
    sweep_with_progress,
    parse_grid, sweep, tradeoff_curves, CellStatus, SweepCell, SweepResult, TradeoffCurves, TradeoffPoint,
};
pub use topology::{topology_metrics, TopologyMetrics};

use thiserror::Error;

use crate::formulation::{FormulationError, ScenarioId};
use crate::solver::{SolveStatus, SolverError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("contingency {contingency} could not be evaluated: solver stopped with {status:?} and no solution")]
    Unsolved { contingency: ScenarioId, status: SolveStatus },
    #[error("sweep feasibility is not monotone: {0}")]
    Monotonicity(String),
}
