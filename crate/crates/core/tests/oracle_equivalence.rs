mod common;

use psps::formulation::{build_contingency_set, build_ops, build_scops, compute_big_m, ContingencyPolicy, ContingencySet};
use psps::network::{tri3, Network, PlanningParams};
use psps::solver::{enumerate_oracle, solve_milp, SolveStatus, SolverOptions};

fn compare(net: &Network, params: &PlanningParams, set: &ContingencySet) -> Result<(), String> {
    let bigm = compute_big_m(net);
    let model = if set.is_empty() {
        build_ops(net, params, &bigm).unwrap().0
    } else {
        build_scops(net, params, set, &bigm).unwrap().0
    };
    let milp = solve_milp(&model, &SolverOptions::default()).unwrap();
    let oracle = enumerate_oracle(net, params, set).unwrap();
    match (milp.status, oracle) {
        (SolveStatus::Infeasible, None) => Ok(()),
        (SolveStatus::Optimal, Some(o)) if (milp.objective.unwrap() - o.objective).abs() <= 1e-6 => Ok(()),
        (status, o) => Err(format!(
            "milp {status:?} {:?} vs oracle {:?} (params {params:?}, {} scenarios)",
            milp.objective,
            o.map(|o| o.objective),
            set.len()
        )),
    }
}

#[test]
fn random_networks_match_oracle() {
    let mut failures = Vec::new();
    for seed in 0..20 {
        let net = common::random_network(seed, 5, 7);
        let alpha = [0.6, 0.8, 0.9, 1.0][seed as usize % 4];
        let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        let mut cases = vec![(PlanningParams::new(alpha, 0.0), ContingencySet::empty())];
        for beta in [0.0, 0.5] {
            for flex in [0.05, 1.0] {
                cases.push((PlanningParams::new(alpha, beta).with_flex(flex), set.clone()));
            }
        }
        for (params, set) in cases {
            if let Err(e) = compare(&net, &params, &set) {
                failures.push(format!("seed {seed}: {e}"));
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn tri3_ladder_matches_oracle() {
    let net = tri3();
    let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
    compare(&net, &PlanningParams::new(1.0, 0.0), &ContingencySet::empty()).unwrap();
    for beta in [0.0, 0.7, 1.0] {
        compare(&net, &PlanningParams::new(1.0, beta).with_flex(1.0), &set).unwrap();
    }
}
