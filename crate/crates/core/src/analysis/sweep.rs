use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_plan, solve_plan, AnalysisError, PlanOutcome, Problem};
use crate::formulation::ContingencySet;
use crate::network::{Network, PlanningParams};
use crate::solver::{SolveStatus, SolverOptions};

/// Tolerance for grid endpoints in `start:stop:step` ranges.
const GRID_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Feasible,
    Infeasible,
    /// The solver stopped on a time or node limit; an incumbent may exist.
    Limit,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Feasible => "feasible",
            CellStatus::Infeasible => "infeasible",
            CellStatus::Limit => "limit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub status: CellStatus,
    pub solve_status: SolveStatus,
    pub objective: Option<f64>,
    pub active_risk: Option<f64>,
    pub worst_gamma: Option<f64>,
    pub gap: Option<f64>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub alpha_axis: Vec<f64>,
    pub beta_axis: Vec<f64>,
    pub flex: Option<f64>,
    pub contingency_count: usize,
    /// `cells[i][j]` is the cell at `alpha_axis[i]`, `beta_axis[j]`.
    pub cells: Vec<Vec<SweepCell>>,
}

impl SweepResult {
    pub fn cell(&self, alpha_index: usize, beta_index: usize) -> &SweepCell {
        &self.cells[alpha_index][beta_index]
    }

    /// Pairs of proven-optimal cells where risk rises with β or falls with α
    /// by more than `tol`.
    pub fn risk_monotonicity_violations(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let optimal = |c: &SweepCell| (c.solve_status == SolveStatus::Optimal).then_some(c.objective).flatten();
        for a in self.cells.iter().flatten() {
            for b in self.cells.iter().flatten() {
                if b.alpha <= a.alpha && b.beta >= a.beta && (a.alpha, a.beta) != (b.alpha, b.beta) {
                    if let (Some(ra), Some(rb)) = (optimal(a), optimal(b)) {
                        if rb > ra + tol {
                            out.push(format!(
                                "risk {rb} at (α={}, β={}) exceeds {ra} at (α={}, β={})",
                                b.alpha, b.beta, a.alpha, a.beta
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    fn feasibility_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for a in self.cells.iter().flatten().filter(|c| c.status == CellStatus::Feasible) {
            for b in self.cells.iter().flatten().filter(|c| c.status == CellStatus::Infeasible) {
                if b.alpha <= a.alpha && b.beta >= a.beta {
                    out.push(format!(
                        "(α={}, β={}) is feasible but (α={}, β={}) is not",
                        a.alpha, a.beta, b.alpha, b.beta
                    ));
                }
            }
        }
        out
    }
}

/// Parses a grid given as `start:stop:step` (inclusive) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, AnalysisError> {
    let bad = |msg: &str| AnalysisError::Input(format!("grid {spec:?}: {msg}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(bad("expected start:stop:step"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || stop < start {
            return Err(bad("step must be positive and stop ≥ start"));
        }
        let count = ((stop - start) / step + GRID_TOL).floor() as usize;
        (0..=count).map(|i| start + step * i as f64).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad("empty grid"));
    }
    Ok(values)
}

fn check_axis(name: &str, axis: &[f64]) -> Result<(), AnalysisError> {
    if axis.is_empty() {
        return Err(AnalysisError::Input(format!("{name} grid is empty")));
    }
    if let Some(v) = axis.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(AnalysisError::Input(format!("{name} value {v} outside [0,1]")));
    }
    Ok(())
}

fn params(alpha: f64, beta: f64, flex: Option<f64>) -> PlanningParams {
    let p = PlanningParams::new(alpha, beta);
    match flex {
        Some(f) => p.with_flex(f),
        None => p,
    }
}

fn worst_gamma(
    network: &Network,
    outcome: &PlanOutcome,
    contingencies: &ContingencySet,
    flex: Option<f64>,
    options: &SolverOptions,
) -> Result<Option<f64>, AnalysisError> {
    match &outcome.plan {
        Some(plan) if !contingencies.is_empty() => {
            Ok(Some(evaluate_plan(network, plan, contingencies, flex, options)?.worst_gamma()))
        }
        Some(_) => Ok(Some(0.0)),
        None => Ok(None),
    }
}

/// One SC-OPS solve per (α, β) cell, cells in parallel. Solver limits are
/// recorded in the cell; a non-monotone feasibility region is an error.
pub fn sweep(
    network: &Network,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    flex: Option<f64>,
    contingencies: &ContingencySet,
    options: &SolverOptions,
) -> Result<SweepResult, AnalysisError> {
    sweep_with_progress(network, alpha_grid, beta_grid, flex, contingencies, options, &|| {})
}

/// [`sweep`], calling `on_cell` once after each cell finishes.
pub fn sweep_with_progress(
    network: &Network,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    flex: Option<f64>,
    contingencies: &ContingencySet,
    options: &SolverOptions,
    on_cell: &(dyn Fn() + Sync),
) -> Result<SweepResult, AnalysisError> {
    check_axis("alpha", alpha_grid)?;
    check_axis("beta", beta_grid)?;
    let coords: Vec<(f64, f64)> = alpha_grid
        .iter()
        .flat_map(|&a| beta_grid.iter().map(move |&b| (a, b)))
        .collect();
    let flat: Vec<SweepCell> = coords
        .par_iter()
        .map(|&(alpha, beta)| {
            let out = solve_plan(network, Problem::Scops, &params(alpha, beta, flex), contingencies, options)?;
            let status = match out.status {
                SolveStatus::Optimal => CellStatus::Feasible,
                SolveStatus::Infeasible => CellStatus::Infeasible,
                _ => CellStatus::Limit,
            };
            let worst_gamma = worst_gamma(network, &out, contingencies, flex, options)?;
            on_cell();
            Ok(SweepCell {
                alpha,
                beta,
                status,
                solve_status: out.status,
                objective: out.objective,
                active_risk: out.plan.as_ref().map(|p| p.summary.active_risk),
                worst_gamma,
                gap: out.gap,
                wall_time: out.wall_time,
            })
        })
        .collect::<Result<_, AnalysisError>>()?;
    let cells = flat.chunks(beta_grid.len()).map(<[SweepCell]>::to_vec).collect();
    let result = SweepResult {
        alpha_axis: alpha_grid.to_vec(),
        beta_axis: beta_grid.to_vec(),
        flex,
        contingency_count: contingencies.len(),
        cells,
    };
    let violations = result.feasibility_violations();
    if !violations.is_empty() {
        return Err(AnalysisError::Monotonicity(violations.join("; ")));
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub alpha: f64,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub active_risk: Option<f64>,
    pub load_served_fraction: Option<f64>,
    pub worst_gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurves {
    pub beta: f64,
    pub flex: Option<f64>,
    pub ops: Vec<TradeoffPoint>,
    pub scops: Vec<TradeoffPoint>,
}

/// OPS and SC-OPS at β across `alpha_grid`, each plan evaluated against
/// `contingencies`.
pub fn tradeoff_curves(
    network: &Network,
    alpha_grid: &[f64],
    beta: f64,
    flex: Option<f64>,
    contingencies: &ContingencySet,
    options: &SolverOptions,
) -> Result<TradeoffCurves, AnalysisError> {
    check_axis("alpha", alpha_grid)?;
    check_axis("beta", &[beta])?;
    let series = |problem: Problem| -> Result<Vec<TradeoffPoint>, AnalysisError> {
        alpha_grid
            .par_iter()
            .map(|&alpha| {
                let out = solve_plan(network, problem, &params(alpha, beta, flex), contingencies, options)?;
                Ok(TradeoffPoint {
                    alpha,
                    status: out.status,
                    objective: out.objective,
                    active_risk: out.plan.as_ref().map(|p| p.summary.active_risk),
                    load_served_fraction: out.plan.as_ref().map(|p| p.summary.load_served_fraction),
                    worst_gamma: worst_gamma(network, &out, contingencies, flex, options)?,
                })
            })
            .collect()
    };
    Ok(TradeoffCurves {
        beta,
        flex,
        ops: series(Problem::Ops)?,
        scops: series(Problem::Scops)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{build_contingency_set, ContingencyPolicy};
    use crate::network::tri3;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:0.1:0.05").unwrap().len(), 3);
        let g = parse_grid("0.8:0.95:0.05").unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[3] - 0.95).abs() < 1e-12);
        assert_eq!(parse_grid("1.0, 0.5").unwrap(), vec![1.0, 0.5]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
    }

    #[test]
    fn tri3_sweep_row() {
        let net = tri3();
        let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        let r = sweep(&net, &[1.0], &[0.0, 0.7, 1.0], Some(1.0), &set, &SolverOptions::default()).unwrap();
        let risks: Vec<f64> = r.cells[0].iter().map(|c| c.active_risk.unwrap()).collect();
        for (got, want) in risks.iter().zip([1.0, 1.1 / 1.2, 0.25]) {
            assert!((got - want).abs() < 1e-9, "{risks:?}");
        }
        for c in &r.cells[0] {
            assert!(c.worst_gamma.unwrap() <= c.beta + 1e-6);
        }
        assert!(r.risk_monotonicity_violations(1e-9).is_empty());
    }

    #[test]
    fn empty_beta_grid_rejected() {
        let net = tri3();
        let err = sweep(&net, &[1.0], &[], None, &ContingencySet::empty(), &SolverOptions::default());
        assert!(matches!(err, Err(AnalysisError::Input(_))));
    }

    #[test]
    fn tri3_tradeoff() {
        let net = tri3();
        let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        let opts = SolverOptions::default();
        let t = tradeoff_curves(&net, &[1.0], 0.0, Some(1.0), &set, &opts).unwrap();
        assert!((t.ops[0].active_risk.unwrap() - 0.25).abs() < 1e-9);
        assert!((t.scops[0].active_risk.unwrap() - 1.0).abs() < 1e-9);
        assert!((t.ops[0].worst_gamma.unwrap() - 1.0).abs() < 1e-6);
        let t = tradeoff_curves(&net, &[1.0], 1.0, Some(1.0), &set, &opts).unwrap();
        assert_eq!(t.ops[0].objective, t.scops[0].objective);
    }
}
