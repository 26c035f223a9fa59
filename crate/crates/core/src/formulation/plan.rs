use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{FormulationError, ScenarioId, VariableMap, EXTRACTION_TOL, PRE_CONTINGENCY};
use crate::milp::{audit, Assignment, MilpModel, VarId};
use crate::network::{BusId, GenId, LineId, LoadId, Network};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    /// Σ risk over energized lines (the OPS/SC-OPS objective).
    pub energized_risk: f64,
    pub total_risk: f64,
    /// `energized_risk / total_risk`, 0 when the network carries no risk.
    pub active_risk: f64,
    pub served_demand: f64,
    pub total_demand: f64,
    pub load_served_fraction: f64,
    pub energized_line_count: usize,
    /// Largest additional shed over the modelled contingencies, as a
    /// fraction of total demand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_additional_shed: Option<f64>,
}

/// Pre-contingency operating decision: which lines stay energized and how
/// the remaining network is dispatched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShutoffPlan {
    pub energized_lines: BTreeSet<LineId>,
    pub deenergized_lines: BTreeSet<LineId>,
    pub energized_buses: BTreeSet<BusId>,
    pub committed_generators: BTreeSet<GenId>,
    pub dispatch: BTreeMap<GenId, f64>,
    /// Served fraction of each load.
    pub load_served: BTreeMap<LoadId, f64>,
    pub line_flows: BTreeMap<LineId, f64>,
    pub bus_angles: BTreeMap<BusId, f64>,
    pub summary: PlanSummary,
}

impl ShutoffPlan {
    /// Rejects plans that reference unknown components or are
    /// self-contradictory (e.g. an energized line at a de-energized bus).
    pub fn check_consistency(&self, network: &Network) -> Result<(), FormulationError> {
        let bad = |msg: String| Err(FormulationError::InconsistentPlan(msg));
        let lines = network.line_ids();
        let buses: BTreeSet<BusId> = network.buses.iter().map(|b| b.id).collect();
        let gens: BTreeMap<GenId, _> = network.generators.iter().map(|g| (g.id, g)).collect();
        let loads: BTreeMap<LoadId, _> = network.loads.iter().map(|d| (d.id, d)).collect();

        if let Some(l) = self.energized_lines.iter().find(|l| !lines.contains(l)) {
            return bad(format!("unknown line {l}"));
        }
        if let Some(l) = self.energized_lines.intersection(&self.deenergized_lines).next() {
            return bad(format!("line {l} is both energized and de-energized"));
        }
        if let Some(b) = self.energized_buses.iter().find(|b| !buses.contains(b)) {
            return bad(format!("unknown bus {b}"));
        }
        for line in network.lines.iter().filter(|l| self.energized_lines.contains(&l.id)) {
            if !self.energized_buses.contains(&line.from_bus) || !self.energized_buses.contains(&line.to_bus) {
                return bad(format!("line {} is energized but an endpoint is not", line.id));
            }
        }
        for id in &self.committed_generators {
            let Some(gen) = gens.get(id) else {
                return bad(format!("unknown generator {id}"));
            };
            if !self.energized_buses.contains(&gen.bus) {
                return bad(format!("generator {id} is committed at de-energized bus {}", gen.bus));
            }
        }
        for (id, p) in &self.dispatch {
            let Some(gen) = gens.get(id) else {
                return bad(format!("unknown generator {id}"));
            };
            let committed = self.committed_generators.contains(id);
            let (lo, hi) = if committed { (gen.p_min, gen.p_max) } else { (0.0, 0.0) };
            if !p.is_finite() || *p < lo - EXTRACTION_TOL || *p > hi + EXTRACTION_TOL {
                return bad(format!("generator {id} dispatch {p} outside [{lo}, {hi}]"));
            }
        }
        for (id, x) in &self.load_served {
            let Some(load) = loads.get(id) else {
                return bad(format!("unknown load {id}"));
            };
            if !x.is_finite() || *x < -EXTRACTION_TOL || *x > 1.0 + EXTRACTION_TOL {
                return bad(format!("load {id} served fraction {x} outside [0, 1]"));
            }
            if *x > EXTRACTION_TOL && !self.energized_buses.contains(&load.bus) {
                return bad(format!("load {id} is served at de-energized bus {}", load.bus));
            }
        }
        Ok(())
    }

    pub fn served_fraction_of(&self, load: LoadId) -> f64 {
        self.load_served.get(&load).copied().unwrap_or(0.0)
    }

    pub fn dispatch_of(&self, gen: GenId) -> f64 {
        self.dispatch.get(&gen).copied().unwrap_or(0.0)
    }
}

/// Operating state of one post-contingency scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioState {
    pub id: ScenarioId,
    pub outaged_lines: BTreeSet<LineId>,
    pub committed_generators: BTreeSet<GenId>,
    pub dispatch: BTreeMap<GenId, f64>,
    pub load_served: BTreeMap<LoadId, f64>,
    pub line_flows: BTreeMap<LineId, f64>,
    pub load_served_fraction: f64,
    /// Shed beyond the pre-contingency plan, as a fraction of total demand.
    pub additional_shed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedSolution {
    pub plan: ShutoffPlan,
    pub scenarios: Vec<ScenarioState>,
}

fn clean(v: f64) -> f64 {
    if v.abs() < 1e-10 {
        0.0
    } else {
        v
    }
}

fn fraction(v: f64) -> f64 {
    let v = clean(v);
    if (v - 1.0).abs() < 1e-10 {
        1.0
    } else {
        v
    }
}

fn on(a: &Assignment, v: VarId) -> bool {
    a.get(v) > 0.5
}

struct Scenario<'a> {
    map: &'a VariableMap,
    network: &'a Network,
    a: &'a Assignment,
    c: ScenarioId,
}

impl Scenario<'_> {
    fn committed(&self) -> BTreeSet<GenId> {
        self.network
            .generators
            .iter()
            .filter(|g| on(self.a, self.map.gen_on[&(g.id, self.c)]))
            .map(|g| g.id)
            .collect()
    }

    fn dispatch(&self) -> BTreeMap<GenId, f64> {
        self.network
            .generators
            .iter()
            .map(|g| (g.id, clean(self.a.get(self.map.gen_output[&(g.id, self.c)]))))
            .collect()
    }

    fn loads(&self) -> BTreeMap<LoadId, f64> {
        self.network
            .loads
            .iter()
            .map(|d| (d.id, fraction(self.a.get(self.map.load_served[&(d.id, self.c)]))))
            .collect()
    }

    fn flows(&self) -> BTreeMap<LineId, f64> {
        self.network
            .lines
            .iter()
            .map(|l| (l.id, clean(self.a.get(self.map.line_flow[&(l.id, self.c)]))))
            .collect()
    }

    fn served_demand(&self) -> f64 {
        self.network
            .loads
            .iter()
            .map(|d| d.demand * self.a.get(self.map.load_served[&(d.id, self.c)]))
            .sum()
    }
}

/// Audits `assignment` against `model` and, if clean, reads the plan and the
/// per-scenario states out of it.
pub fn extract_plan(
    network: &Network,
    model: &MilpModel,
    map: &VariableMap,
    assignment: &Assignment,
) -> Result<ExtractedSolution, FormulationError> {
    let report = audit(model, assignment, EXTRACTION_TOL)?;
    if !report.is_clean() {
        return Err(FormulationError::AuditFailed(Box::new(report)));
    }
    let a = assignment;
    let pre = Scenario {
        map,
        network,
        a,
        c: PRE_CONTINGENCY,
    };
    let total_demand = network.total_demand();
    let share = |served: f64| if total_demand > 0.0 { clean(served / total_demand) } else { 1.0 };

    let energized_lines: BTreeSet<LineId> =
        map.line_on.iter().filter(|(_, &v)| on(a, v)).map(|(&l, _)| l).collect();
    let deenergized_lines = network.line_ids().difference(&energized_lines).copied().collect();
    let energized_buses = map.bus_on.iter().filter(|(_, &v)| on(a, v)).map(|(&b, _)| b).collect();
    let served_demand = pre.served_demand();
    let energized_risk: f64 = network
        .lines
        .iter()
        .filter(|l| energized_lines.contains(&l.id))
        .map(|l| l.risk)
        .sum();
    let total_risk = network.total_risk();

    let scenarios: Vec<ScenarioState> = map
        .scenarios
        .iter()
        .filter(|(c, _)| *c != PRE_CONTINGENCY)
        .map(|(c, outaged)| {
            let s = Scenario { map, network, a, c: *c };
            let served = s.served_demand();
            ScenarioState {
                id: *c,
                outaged_lines: outaged.clone(),
                committed_generators: s.committed(),
                dispatch: s.dispatch(),
                load_served: s.loads(),
                line_flows: s.flows(),
                load_served_fraction: share(served),
                additional_shed: if total_demand > 0.0 {
                    clean((served_demand - served) / total_demand).max(0.0)
                } else {
                    0.0
                },
            }
        })
        .collect();
    let worst_additional_shed = scenarios.iter().map(|s| s.additional_shed).reduce(f64::max);

    let plan = ShutoffPlan {
        summary: PlanSummary {
            energized_risk,
            total_risk,
            active_risk: if total_risk > 0.0 { energized_risk / total_risk } else { 0.0 },
            served_demand,
            total_demand,
            load_served_fraction: share(served_demand),
            energized_line_count: energized_lines.len(),
            worst_additional_shed,
        },
        energized_lines,
        deenergized_lines,
        energized_buses,
        committed_generators: pre.committed(),
        dispatch: pre.dispatch(),
        load_served: pre.loads(),
        line_flows: pre.flows(),
        bus_angles: network
            .buses
            .iter()
            .map(|b| (b.id, clean(a.get(map.angle[&(b.id, PRE_CONTINGENCY)]))))
            .collect(),
    };
    Ok(ExtractedSolution { plan, scenarios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{build_ops, compute_big_m};
    use crate::network::{tri3, PlanningParams};

    fn line1_solution(model: &MilpModel) -> Assignment {
        let mut a = Assignment::zeros(model.num_vars());
        for (name, v) in [
            ("zL[1]", 1.0),
            ("zB[1]", 1.0),
            ("zB[2]", 1.0),
            ("zG[1,0]", 1.0),
            ("PG[1,0]", 1.0),
            ("x[2,0]", 1.0),
            ("PL[1,0]", 1.0),
            ("th[2,0]", -0.1),
        ] {
            a.values[model.find(name).unwrap().0] = v;
        }
        a
    }

    #[test]
    fn extraction_reads_the_plan() {
        let net = tri3();
        let (model, map) = build_ops(&net, &PlanningParams::new(0.5, 0.0), &compute_big_m(&net)).unwrap();
        let sol = extract_plan(&net, &model, &map, &line1_solution(&model)).unwrap();
        let plan = &sol.plan;
        assert_eq!(plan.energized_lines, BTreeSet::from([1]));
        assert_eq!(plan.deenergized_lines, BTreeSet::from([2, 3]));
        assert_eq!(plan.energized_buses, BTreeSet::from([1, 2]));
        assert!((plan.summary.energized_risk - 0.9).abs() < 1e-12);
        assert!((plan.summary.active_risk - 0.75).abs() < 1e-12);
        assert!((plan.summary.load_served_fraction - 1.0 / 1.5).abs() < 1e-12);
        assert_eq!(plan.summary.worst_additional_shed, None);
        assert!(sol.scenarios.is_empty());
        plan.check_consistency(&net).unwrap();
    }

    #[test]
    fn infeasible_assignment_is_refused() {
        let net = tri3();
        let (model, map) = build_ops(&net, &PlanningParams::new(0.5, 0.0), &compute_big_m(&net)).unwrap();
        let mut a = line1_solution(&model);
        a.values[model.find("x[2,0]").unwrap().0] = 0.2;
        match extract_plan(&net, &model, &map, &a) {
            Err(FormulationError::AuditFailed(report)) => {
                let tags = report.violated_tags();
                assert!(tags.contains(&"eq2"), "{tags:?}");
                assert!(tags.iter().any(|t| t.starts_with("eq9[bus=2")));
            }
            other => panic!("expected audit failure, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_plans_rejected() {
        let net = tri3();
        let (model, map) = build_ops(&net, &PlanningParams::new(0.5, 0.0), &compute_big_m(&net)).unwrap();
        let plan = extract_plan(&net, &model, &map, &line1_solution(&model)).unwrap().plan;
        let mut p = plan.clone();
        p.energized_buses.remove(&2);
        assert!(p.check_consistency(&net).is_err());
        let mut p = plan.clone();
        p.energized_lines.insert(9);
        assert!(p.check_consistency(&net).is_err());
        let mut p = plan;
        p.dispatch.insert(1, 5.0);
        assert!(p.check_consistency(&net).is_err());
    }
}
