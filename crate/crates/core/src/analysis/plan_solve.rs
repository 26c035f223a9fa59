use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::formulation::{build_ops, build_scops, compute_big_m, extract_plan, ContingencySet, ScenarioState, ShutoffPlan};
use crate::network::{Network, PlanningParams};
use crate::solver::{solve, SolveStatus, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Ops,
    Scops,
}

impl Problem {
    pub fn as_str(self) -> &'static str {
        match self {
            Problem::Ops => "ops",
            Problem::Scops => "scops",
        }
    }
}

/// A solved (or unsolvable) planning problem, as written to plan JSON.
///
/// Wall time is kept out of the serialized form so repeated runs produce
/// identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub problem: Problem,
    pub params: PlanningParams,
    pub contingency_count: usize,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes_explored: u64,
    pub plan: Option<ShutoffPlan>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioState>,
    #[serde(skip)]
    pub wall_time: f64,
}

impl PlanOutcome {
    pub fn is_infeasible(&self) -> bool {
        self.status == SolveStatus::Infeasible
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Builds and solves OPS or SC-OPS and extracts the plan. OPS ignores
/// `contingencies`.
pub fn solve_plan(
    network: &Network,
    problem: Problem,
    params: &PlanningParams,
    contingencies: &ContingencySet,
    options: &SolverOptions,
) -> Result<PlanOutcome, AnalysisError> {
    let bigm = compute_big_m(network);
    let empty = ContingencySet::empty();
    let set = match problem {
        Problem::Ops => &empty,
        Problem::Scops => contingencies,
    };
    let (model, map) = match problem {
        Problem::Ops => build_ops(network, params, &bigm)?,
        Problem::Scops => build_scops(network, params, set, &bigm)?,
    };
    let result = solve(&model, options)?;
    let (plan, scenarios) = match &result.assignment {
        Some(assignment) => {
            let extracted = extract_plan(network, &model, &map, assignment)?;
            (Some(extracted.plan), extracted.scenarios)
        }
        None => (None, Vec::new()),
    };
    Ok(PlanOutcome {
        problem,
        params: *params,
        contingency_count: set.len(),
        status: result.status,
        objective: result.objective,
        best_bound: finite(result.best_bound),
        gap: finite(result.gap),
        nodes_explored: result.nodes_explored,
        plan,
        scenarios,
        wall_time: result.wall_time,
    })
}
