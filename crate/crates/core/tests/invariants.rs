mod common;

use psps::analysis::{evaluate_plan, solve_plan, topology_metrics, Problem};
use psps::formulation::{build_contingency_set, build_ops, compute_big_m, ContingencyPolicy, ContingencySet};
use psps::milp::audit;
use psps::network::PlanningParams;
use psps::solver::{oracle_evaluate, solve_milp, SolveStatus, SolverOptions};
use proptest::prelude::*;

const TOL: f64 = 1e-6;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

fn objective(out: &psps::analysis::PlanOutcome) -> Option<f64> {
    assert_ne!(out.status, SolveStatus::TimeLimit);
    out.objective
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn security_only_costs_risk(seed in 0u64..10_000, alpha in 0.3f64..1.0, flex in prop::sample::select(vec![0.05, 0.5, 1.0])) {
        let net = common::random_network(seed, 5, 7);
        let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        let opts = SolverOptions::default();
        let ops = objective(&solve_plan(&net, Problem::Ops, &PlanningParams::new(alpha, 0.0), &set, &opts).unwrap());
        let mut previous: Option<f64> = None;
        for beta in [0.0, 0.3, 0.6, 1.0] {
            let params = PlanningParams::new(alpha, beta).with_flex(flex);
            let out = solve_plan(&net, Problem::Scops, &params, &set, &opts).unwrap();
            let sc = objective(&out);
            if let (Some(o), Some(s)) = (ops, sc) {
                prop_assert!(s >= o - TOL, "SC-OPS {s} below OPS {o}");
            }
            if sc.is_some() {
                prop_assert!(ops.is_some(), "SC-OPS feasible but OPS infeasible");
            }
            match (previous, sc) {
                (Some(p), Some(s)) => prop_assert!(s <= p + TOL, "risk rose with beta: {p} -> {s}"),
                (Some(_), None) => prop_assert!(false, "feasibility lost as beta grew"),
                _ => {}
            }
            previous = sc;
            if let Some(plan) = &out.plan {
                let report = evaluate_plan(&net, plan, &set, Some(flex), &opts).unwrap();
                prop_assert!(report.worst_gamma() <= beta + TOL);
                prop_assert!(plan.summary.load_served_fraction >= alpha - TOL);
            }
        }
        if flex == 1.0 {
            prop_assert_eq!(previous.is_some(), ops.is_some());
            if let (Some(p), Some(o)) = (previous, ops) {
                prop_assert!((p - o).abs() <= TOL, "beta=1 SC-OPS {p} vs OPS {o}");
            }
        }
    }

    #[test]
    fn ops_solutions_are_audit_clean(seed in 0u64..10_000, alpha in 0.0f64..=1.0) {
        let net = common::random_network(seed, 7, 10);
        let (model, _) = build_ops(&net, &PlanningParams::new(alpha, 0.0), &compute_big_m(&net)).unwrap();
        let result = solve_milp(&model, &SolverOptions::default()).unwrap();
        if let Some(a) = &result.assignment {
            prop_assert!(audit(&model, a, TOL).unwrap().is_clean());
        }
    }

    #[test]
    fn evaluation_matches_enumeration(seed in 0u64..10_000, alpha in 0.3f64..=1.0, flex in 0.0f64..=1.0) {
        let net = common::random_network(seed, 5, 7);
        let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        let opts = SolverOptions::default();
        let out = solve_plan(&net, Problem::Ops, &PlanningParams::new(alpha, 0.0), &ContingencySet::empty(), &opts).unwrap();
        if let Some(plan) = &out.plan {
            let report = evaluate_plan(&net, plan, &set, Some(flex), &opts).unwrap();
            for c in &set.scenarios {
                let oracle = oracle_evaluate(&net, plan, c, Some(flex)).unwrap();
                let got = report.contingencies[&c.id].gamma;
                prop_assert!((got - oracle.clamp(0.0, 1.0)).abs() <= TOL, "contingency {}: {got} vs {oracle}", c.id);
            }
            let topo = topology_metrics(&net, plan).unwrap();
            prop_assert_eq!(topo.energized_line_count, plan.energized_lines.len());
            prop_assert_eq!(topo.island_sizes.iter().sum::<usize>() >= topo.island_count, true);
            if topo.radial {
                prop_assert!(topo.energized_line_count + topo.island_count <= net.buses.len());
            }
        }
    }
}
