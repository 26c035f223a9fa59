use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::formulation::{build_ce, compute_big_m, gamma_of, ContingencySet, ScenarioId, ShutoffPlan};
use crate::network::Network;
use crate::solver::{solve, SolveStatus, SolverOptions};

/// Two contingencies whose shed differs by less than this share the worst case.
const BINDING_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContingencyOutcome {
    /// Additional shed beyond the plan, as a fraction of total demand.
    pub gamma: f64,
    /// True when this contingency attains the worst-case shed.
    pub binding: bool,
    pub status: SolveStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub contingency: ScenarioId,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub contingencies: BTreeMap<ScenarioId, ContingencyOutcome>,
    /// `None` only for an empty contingency set.
    pub worst_case: Option<WorstCase>,
    /// Flexibility override used for every generator; `None` means each
    /// generator's own value.
    pub flex_used: Option<f64>,
}

impl EvaluationReport {
    pub fn worst_gamma(&self) -> f64 {
        self.worst_case.as_ref().map_or(0.0, |w| w.gamma)
    }
}

/// Solves the contingency evaluator for every scenario independently and
/// reports the worst case. Ties go to the lowest contingency id.
pub fn evaluate_plan(
    network: &Network,
    plan: &ShutoffPlan,
    contingencies: &ContingencySet,
    flex: Option<f64>,
    options: &SolverOptions,
) -> Result<EvaluationReport, AnalysisError> {
    plan.check_consistency(network)?;
    contingencies.validate(network)?;
    let bigm = compute_big_m(network);
    let gammas: Vec<(ScenarioId, f64, SolveStatus)> = contingencies
        .scenarios
        .par_iter()
        .map(|c| {
            let (model, map) = build_ce(network, plan, c, flex, &bigm)?;
            let result = solve(&model, options)?;
            let gamma = match &result.assignment {
                Some(a) => gamma_of(&map, a).expect("evaluator has gamma"),
                None => {
                    return Err(AnalysisError::Unsolved {
                        contingency: c.id,
                        status: result.status,
                    })
                }
            };
            Ok((c.id, gamma.clamp(0.0, 1.0), result.status))
        })
        .collect::<Result<_, AnalysisError>>()?;

    let worst_case = gammas
        .iter()
        .fold(None::<WorstCase>, |best, &(id, gamma, _)| match best {
            Some(b) if b.gamma > gamma || (b.gamma == gamma && b.contingency < id) => Some(b),
            _ => Some(WorstCase { contingency: id, gamma }),
        });
    let worst = worst_case.as_ref().map_or(0.0, |w| w.gamma);
    let contingencies = gammas
        .into_iter()
        .map(|(id, gamma, status)| {
            let outcome = ContingencyOutcome {
                gamma,
                binding: gamma >= worst - BINDING_TOL,
                status,
            };
            (id, outcome)
        })
        .collect();
    Ok(EvaluationReport {
        contingencies,
        worst_case,
        flex_used: flex,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::analysis::{solve_plan, Problem};
    use crate::formulation::{build_contingency_set, ContingencyPolicy};
    use crate::network::{tri3, PlanningParams};

    fn plan_with(lines: &[u32]) -> ShutoffPlan {
        // Serve everything on the restricted topology, then mark exactly
        // `lines` as energized.
        let mut net = tri3();
        net.lines.retain(|l| lines.contains(&l.id));
        let out = solve_plan(
            &net,
            Problem::Ops,
            &PlanningParams::new(1.0, 0.0),
            &ContingencySet::empty(),
            &SolverOptions::default(),
        )
        .unwrap();
        let mut plan = out.plan.unwrap();
        plan.energized_lines = lines.iter().copied().collect();
        plan.deenergized_lines = tri3().line_ids().difference(&plan.energized_lines).copied().collect();
        plan
    }

    #[test]
    fn tri3_reference_evaluations() {
        let net = tri3();
        let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        let opts = SolverOptions::default();

        let all_on = evaluate_plan(&net, &plan_with(&[1, 2, 3]), &set, Some(1.0), &opts).unwrap();
        assert!(all_on.worst_gamma().abs() < 1e-9);

        let open23 = evaluate_plan(&net, &plan_with(&[1, 2]), &set, Some(1.0), &opts).unwrap();
        let w = open23.worst_case.unwrap();
        assert!((w.gamma - 2.0 / 3.0).abs() < 1e-6);
        assert_eq!(w.contingency, 1);

        let open12 = evaluate_plan(&net, &plan_with(&[2, 3]), &set, Some(1.0), &opts).unwrap();
        let w = open12.worst_case.unwrap();
        assert!((w.gamma - 1.0).abs() < 1e-6);
        assert_eq!(w.contingency, 2);
        assert!(open12.contingencies[&2].binding);
        assert!(!open12.contingencies[&1].binding);
    }

    #[test]
    fn order_does_not_matter() {
        let net = tri3();
        let mut set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        let plan = plan_with(&[2, 3]);
        let opts = SolverOptions::default();
        let a = evaluate_plan(&net, &plan, &set, None, &opts).unwrap();
        set.scenarios.reverse();
        let b = evaluate_plan(&net, &plan, &set, None, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(BTreeSet::from_iter(a.contingencies.keys().copied()), BTreeSet::from([1, 2, 3]));
    }
}
