//! LP relaxations on top of the `microlp` bounded simplex.
//!
//! Rows are scaled to a largest coefficient of 1 before they reach the
//! engine; values and objectives are always reported against the original
//! model.

use std::time::Instant;

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome, Variable};

use super::{SolveResult, SolveStatus, SolverError, SolverOptions};
use crate::milp::{audit, Assignment, MilpModel, Sense};

struct ScaledRow {
    terms: Vec<(usize, f64)>,
    op: ComparisonOp,
    rhs: f64,
}

pub(crate) struct LpPoint {
    pub values: Vec<f64>,
    pub objective: f64,
    /// Engine state for warm-started re-solves after a bound change.
    pub warm: microlp::Solution,
}

pub(crate) enum LpStep {
    Optimal(Box<LpPoint>),
    Infeasible,
    Unbounded,
    Limit,
}

pub(crate) struct LpEngine<'a> {
    model: &'a MilpModel,
    rows: Vec<ScaledRow>,
    /// A row without terms whose constant side is violated.
    trivially_infeasible: bool,
}

impl<'a> LpEngine<'a> {
    pub fn new(model: &'a MilpModel, feasibility_tol: f64) -> Self {
        let mut rows = Vec::with_capacity(model.constraints().len());
        let mut trivially_infeasible = false;
        for c in model.constraints() {
            let scale = c.terms.iter().map(|(a, _)| a.abs()).fold(0.0, f64::max);
            if scale == 0.0 {
                let ok = match c.sense {
                    Sense::Le => 0.0 <= c.rhs + feasibility_tol,
                    Sense::Ge => 0.0 >= c.rhs - feasibility_tol,
                    Sense::Eq => c.rhs.abs() <= feasibility_tol,
                };
                trivially_infeasible |= !ok;
                continue;
            }
            rows.push(ScaledRow {
                terms: c.terms.iter().map(|(a, v)| (v.0, a / scale)).collect(),
                op: match c.sense {
                    Sense::Le => ComparisonOp::Le,
                    Sense::Ge => ComparisonOp::Ge,
                    Sense::Eq => ComparisonOp::Eq,
                },
                rhs: c.rhs / scale,
            });
        }
        Self {
            model,
            rows,
            trivially_infeasible,
        }
    }

    /// Bounds of the continuous relaxation.
    pub fn relaxed_bounds(&self) -> Vec<(f64, f64)> {
        self.model.variables().iter().map(|v| v.domain.bounds()).collect()
    }

    fn problem(&self, bounds: &[(f64, f64)]) -> (Problem, Vec<Variable>) {
        let mut objective = vec![0.0; self.model.num_vars()];
        for (c, v) in self.model.objective() {
            objective[v.0] += c;
        }
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<Variable> = bounds
            .iter()
            .zip(&objective)
            .map(|(&b, &c)| problem.add_var(c, b))
            .collect();
        for row in &self.rows {
            let expr: Vec<(Variable, f64)> = row.terms.iter().map(|&(j, a)| (vars[j], a)).collect();
            problem.add_constraint(expr.as_slice(), row.op, row.rhs);
        }
        (problem, vars)
    }

    /// Cold solve with the given bounds.
    pub fn solve(&self, bounds: &[(f64, f64)], deadline: Option<Instant>) -> Result<LpStep, SolverError> {
        if self.trivially_infeasible || bounds.iter().any(|(lo, hi)| lo > hi) {
            return Ok(LpStep::Infeasible);
        }
        let (mut problem, vars) = self.problem(bounds);
        if let Some(deadline) = deadline {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(LpStep::Limit);
            }
            problem.set_time_limit(left);
        }
        self.step(problem.solve(), &vars)
    }

    /// Warm re-solve of `warm` with `var` fixed to `value`.
    pub fn fix(&self, warm: microlp::Solution, var: usize, value: f64, vars: &[Variable]) -> Result<LpStep, SolverError> {
        self.step(warm.fix_var(vars[var], value), vars)
    }

    /// Engine handles, in model order, for use with [`LpEngine::fix`].
    pub fn handles(&self) -> Vec<Variable> {
        // Handles are creation indices, identical for every problem built here.
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        (0..self.model.num_vars()).map(|_| problem.add_var(0.0, (0.0, 0.0))).collect()
    }

    fn step(&self, outcome: Result<SolveOutcome, microlp::Error>, vars: &[Variable]) -> Result<LpStep, SolverError> {
        match outcome {
            Ok(SolveOutcome::Solution(sol)) => {
                let values: Vec<f64> = vars
                    .iter()
                    .zip(self.model.variables())
                    .map(|(&h, var)| {
                        let (lo, hi) = var.domain.bounds();
                        sol.var_value_raw(h).clamp(lo, hi)
                    })
                    .collect();
                let objective = self.model.objective_value(&values);
                Ok(LpStep::Optimal(Box::new(LpPoint {
                    values,
                    objective,
                    warm: sol,
                })))
            }
            Ok(SolveOutcome::Interrupted(_)) => Ok(LpStep::Limit),
            Err(microlp::Error::Infeasible) => Ok(LpStep::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpStep::Unbounded),
            Err(e) => Err(SolverError::Numerical(e.to_string())),
        }
    }
}

/// Solves a model without binary variables.
pub fn solve_lp(model: &MilpModel, options: &SolverOptions) -> Result<SolveResult, SolverError> {
    options.validate()?;
    if model.has_binaries() {
        return Err(SolverError::NotContinuous);
    }
    let started = Instant::now();
    let deadline = options.time_limit.map(|d| started + d);
    let engine = LpEngine::new(model, options.feasibility_tol);
    let step = engine.solve(&engine.relaxed_bounds(), deadline)?;
    let elapsed = started.elapsed().as_secs_f64();
    Ok(match step {
        LpStep::Optimal(point) => {
            let assignment = Assignment { values: point.values };
            let report = audit(model, &assignment, options.feasibility_tol)?;
            if !report.is_clean() {
                return Err(SolverError::Integrity(Box::new(report)));
            }
            SolveResult {
                status: SolveStatus::Optimal,
                objective: Some(point.objective),
                assignment: Some(assignment),
                best_bound: point.objective,
                gap: 0.0,
                nodes_explored: 0,
                wall_time: elapsed,
            }
        }
        LpStep::Infeasible => SolveResult::without_solution(SolveStatus::Infeasible, f64::INFINITY, 0, elapsed),
        LpStep::Unbounded => SolveResult::without_solution(SolveStatus::Unbounded, f64::NEG_INFINITY, 0, elapsed),
        LpStep::Limit => SolveResult::without_solution(SolveStatus::TimeLimit, f64::NEG_INFINITY, 0, elapsed),
    })
}
