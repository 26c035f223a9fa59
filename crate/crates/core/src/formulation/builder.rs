use std::collections::{BTreeMap, BTreeSet};

use super::{BigMBounds, ContingencySet, FormulationError, ScenarioId, PRE_CONTINGENCY};
use crate::milp::{MilpModel, Sense, VarId};
use crate::network::{BusId, GenId, LineId, LoadId, Network, PlanningParams};

/// Where each modelling quantity lives in the MILP.
///
/// Keys are `(component id, scenario id)`; scenario 0 is pre-contingency.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VariableMap {
    pub line_on: BTreeMap<LineId, VarId>,
    pub bus_on: BTreeMap<BusId, VarId>,
    pub gen_on: BTreeMap<(GenId, ScenarioId), VarId>,
    pub gen_output: BTreeMap<(GenId, ScenarioId), VarId>,
    pub load_served: BTreeMap<(LoadId, ScenarioId), VarId>,
    pub line_flow: BTreeMap<(LineId, ScenarioId), VarId>,
    pub angle: BTreeMap<(BusId, ScenarioId), VarId>,
    pub gamma: Option<VarId>,
    /// Scenarios in model order with their outaged lines.
    pub scenarios: Vec<(ScenarioId, BTreeSet<LineId>)>,
}

impl VariableMap {
    /// Binary switching decisions on lines, for rounding heuristics.
    pub fn line_vars(&self) -> impl Iterator<Item = (LineId, VarId)> + '_ {
        self.line_on.iter().map(|(&l, &v)| (l, v))
    }
}

/// State of a line inside one scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Switch {
    Var(VarId),
    Fixed(f64),
}

/// Adds the per-scenario physics: generator limits, switched DC flow,
/// thermal and angle limits, and nodal balance.
pub(crate) fn add_scenario_physics(
    model: &mut MilpModel,
    map: &mut VariableMap,
    network: &Network,
    bigm: &BigMBounds,
    c: ScenarioId,
    state: &dyn Fn(LineId) -> Switch,
) -> Result<(), FormulationError> {
    let g = bigm.global_angle_bound;
    let reference = network.reference_bus();
    for bus in &network.buses {
        let (lo, hi) = if Some(bus.id) == reference { (0.0, 0.0) } else { (-g, g) };
        let th = model.add_continuous(format!("th[{},{c}]", bus.id), lo, hi)?;
        map.angle.insert((bus.id, c), th);
    }

    let mut balance: BTreeMap<BusId, Vec<(f64, VarId)>> =
        network.buses.iter().map(|b| (b.id, Vec::new())).collect();

    for gen in &network.generators {
        let z = model.add_binary(format!("zG[{},{c}]", gen.id))?;
        let p = model.add_continuous(format!("PG[{},{c}]", gen.id), 0.0, gen.p_max)?;
        model.add_constraint(
            format!("eq7lo[gen={},c={c}]", gen.id),
            [(gen.p_min, z), (-1.0, p)],
            Sense::Le,
            0.0,
        )?;
        model.add_constraint(
            format!("eq7hi[gen={},c={c}]", gen.id),
            [(1.0, p), (-gen.p_max, z)],
            Sense::Le,
            0.0,
        )?;
        map.gen_on.insert((gen.id, c), z);
        map.gen_output.insert((gen.id, c), p);
        balance.get_mut(&gen.bus).expect("validated").push((1.0, p));
    }

    for load in &network.loads {
        let x = model.add_continuous(format!("x[{},{c}]", load.id), 0.0, 1.0)?;
        map.load_served.insert((load.id, c), x);
        balance.get_mut(&load.bus).expect("validated").push((-load.demand, x));
    }

    for line in &network.lines {
        let t = line.thermal_limit;
        let b = line.susceptance;
        let m = bigm.for_line(line.id);
        let p = model.add_continuous(format!("PL[{},{c}]", line.id), -t, t)?;
        map.line_flow.insert((line.id, c), p);
        let ti = map.angle[&(line.from_bus, c)];
        let tj = map.angle[&(line.to_bus, c)];
        let flow = [(1.0, p), (-b, ti), (b, tj)];
        let cap = line.angle_diff_cap;
        let cap_binds = cap < t / b;
        let id = line.id;
        match state(id) {
            Switch::Var(z) => {
                let bm = b * m;
                model.add_constraint(
                    format!("eq8a[line={id},c={c}]"),
                    flow.into_iter().chain([(bm, z)]),
                    Sense::Le,
                    bm,
                )?;
                model.add_constraint(
                    format!("eq8b[line={id},c={c}]"),
                    flow.into_iter().chain([(-bm, z)]),
                    Sense::Ge,
                    -bm,
                )?;
                model.add_constraint(format!("eq8c_hi[line={id},c={c}]"), [(1.0, p), (-t, z)], Sense::Le, 0.0)?;
                model.add_constraint(format!("eq8c_lo[line={id},c={c}]"), [(1.0, p), (t, z)], Sense::Ge, 0.0)?;
                if cap_binds {
                    let slack = m - cap;
                    model.add_constraint(
                        format!("angle_hi[line={id},c={c}]"),
                        [(1.0, ti), (-1.0, tj), (slack, z)],
                        Sense::Le,
                        m,
                    )?;
                    model.add_constraint(
                        format!("angle_lo[line={id},c={c}]"),
                        [(1.0, ti), (-1.0, tj), (-slack, z)],
                        Sense::Ge,
                        -m,
                    )?;
                }
            }
            Switch::Fixed(v) => {
                let open = b * m * (1.0 - v);
                model.add_constraint(format!("eq8a[line={id},c={c}]"), flow, Sense::Le, open)?;
                model.add_constraint(format!("eq8b[line={id},c={c}]"), flow, Sense::Ge, -open)?;
                model.add_constraint(format!("eq8c_hi[line={id},c={c}]"), [(1.0, p)], Sense::Le, t * v)?;
                model.add_constraint(format!("eq8c_lo[line={id},c={c}]"), [(1.0, p)], Sense::Ge, -t * v)?;
                if cap_binds && v > 0.5 {
                    model.add_constraint(
                        format!("angle_hi[line={id},c={c}]"),
                        [(1.0, ti), (-1.0, tj)],
                        Sense::Le,
                        cap,
                    )?;
                    model.add_constraint(
                        format!("angle_lo[line={id},c={c}]"),
                        [(1.0, ti), (-1.0, tj)],
                        Sense::Ge,
                        -cap,
                    )?;
                }
            }
        }
        balance.get_mut(&line.from_bus).expect("validated").push((-1.0, p));
        balance.get_mut(&line.to_bus).expect("validated").push((1.0, p));
    }

    for (bus, terms) in balance {
        model.add_constraint(format!("eq9[bus={bus},c={c}]"), terms, Sense::Eq, 0.0)?;
    }
    Ok(())
}

/// Single-scenario shutoff problem: SC-OPS with no contingencies.
pub fn build_ops(
    network: &Network,
    params: &PlanningParams,
    bigm: &BigMBounds,
) -> Result<(MilpModel, VariableMap), FormulationError> {
    build_scops(network, params, &ContingencySet::empty(), bigm)
}

/// Security-constrained shutoff problem over the pre-contingency state and
/// every scenario in `contingencies`.
pub fn build_scops(
    network: &Network,
    params: &PlanningParams,
    contingencies: &ContingencySet,
    bigm: &BigMBounds,
) -> Result<(MilpModel, VariableMap), FormulationError> {
    network.ensure_valid()?;
    params.validate()?;
    contingencies.validate(network)?;

    let mut model = MilpModel::new();
    let mut map = VariableMap::default();
    let d_tot = network.total_demand();

    for line in &network.lines {
        let z = model.add_binary(format!("zL[{}]", line.id))?;
        map.line_on.insert(line.id, z);
    }
    for bus in &network.buses {
        let z = model.add_binary(format!("zB[{}]", bus.id))?;
        map.bus_on.insert(bus.id, z);
    }
    model.set_objective(network.lines.iter().map(|l| (l.risk, map.line_on[&l.id])))?;

    let line_on = map.line_on.clone();
    add_scenario_physics(&mut model, &mut map, network, bigm, PRE_CONTINGENCY, &|l| {
        Switch::Var(line_on[&l])
    })?;
    map.scenarios.push((PRE_CONTINGENCY, BTreeSet::new()));

    let x0 = |map: &VariableMap, d: LoadId| map.load_served[&(d, PRE_CONTINGENCY)];
    model.add_constraint(
        "eq2",
        network.loads.iter().map(|d| (d.demand, x0(&map, d.id))),
        Sense::Ge,
        params.alpha * d_tot,
    )?;
    for load in &network.loads {
        model.add_constraint(
            format!("eq3a[load={}]", load.id),
            [(1.0, x0(&map, load.id)), (-1.0, map.bus_on[&load.bus])],
            Sense::Le,
            0.0,
        )?;
    }
    for gen in &network.generators {
        model.add_constraint(
            format!("eq3b[gen={}]", gen.id),
            [(1.0, map.gen_on[&(gen.id, PRE_CONTINGENCY)]), (-1.0, map.bus_on[&gen.bus])],
            Sense::Le,
            0.0,
        )?;
    }
    for line in &network.lines {
        for bus in [line.from_bus, line.to_bus] {
            model.add_constraint(
                format!("eq3c[line={},bus={bus}]", line.id),
                [(1.0, map.line_on[&line.id]), (-1.0, map.bus_on[&bus])],
                Sense::Le,
                0.0,
            )?;
        }
    }

    for contingency in &contingencies.scenarios {
        let c = contingency.id;
        let outaged = &contingency.outaged_lines;
        add_scenario_physics(&mut model, &mut map, network, bigm, c, &|l| {
            if outaged.contains(&l) {
                Switch::Fixed(0.0)
            } else {
                Switch::Var(line_on[&l])
            }
        })?;
        map.scenarios.push((c, outaged.clone()));

        for gen in &network.generators {
            let z0 = map.gen_on[&(gen.id, PRE_CONTINGENCY)];
            let zc = map.gen_on[&(gen.id, c)];
            let p0 = map.gen_output[&(gen.id, PRE_CONTINGENCY)];
            let pc = map.gen_output[&(gen.id, c)];
            model.add_constraint(format!("eq4d[gen={},c={c}]", gen.id), [(1.0, zc), (-1.0, z0)], Sense::Le, 0.0)?;
            let window = params.flex_for(gen) * gen.p_max + gen.p_max;
            model.add_constraint(
                format!("eq6hi[gen={},c={c}]", gen.id),
                [(1.0, pc), (-1.0, p0), (gen.p_max, zc)],
                Sense::Le,
                window,
            )?;
            model.add_constraint(
                format!("eq6lo[gen={},c={c}]", gen.id),
                [(1.0, p0), (-1.0, pc), (gen.p_max, zc)],
                Sense::Le,
                window,
            )?;
        }
        for load in &network.loads {
            model.add_constraint(
                format!("eq4e[load={},c={c}]", load.id),
                [(1.0, map.load_served[&(load.id, c)]), (-1.0, x0(&map, load.id))],
                Sense::Le,
                0.0,
            )?;
        }
        let shed = network.loads.iter().flat_map(|d| {
            [
                (d.demand, map.load_served[&(d.id, PRE_CONTINGENCY)]),
                (-d.demand, map.load_served[&(d.id, c)]),
            ]
        });
        model.add_constraint(format!("eq5[c={c}]"), shed.collect::<Vec<_>>(), Sense::Le, params.beta * d_tot)?;
    }

    Ok((model, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{build_contingency_set, compute_big_m, ContingencyPolicy};
    use crate::milp::{audit, Assignment};
    use crate::network::tri3;

    fn assignment_for(model: &MilpModel, values: &[(&str, f64)]) -> Assignment {
        let mut a = Assignment::zeros(model.num_vars());
        for (name, v) in values {
            a.values[model.find(name).unwrap_or_else(|| panic!("no {name}")).0] = *v;
        }
        a
    }

    #[test]
    fn ops_counts() {
        let net = tri3();
        let (model, map) = build_ops(&net, &PlanningParams::new(0.5, 0.0), &compute_big_m(&net)).unwrap();
        // zL, zB, then th, zG, PG, x, PL for one scenario.
        assert_eq!(model.num_vars(), 3 + 3 + 3 + 1 + 1 + 2 + 3);
        assert_eq!(map.scenarios.len(), 1);
        assert_eq!(model.binaries().count(), 7);
        assert!(model.constraints().iter().any(|c| c.tag == "eq2"));
    }

    #[test]
    fn scops_has_one_block_per_scenario() {
        let net = tri3();
        let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        let (model, map) =
            build_scops(&net, &PlanningParams::new(0.5, 0.0), &set, &compute_big_m(&net)).unwrap();
        assert_eq!(map.scenarios.len(), 4);
        assert_eq!(map.angle.len(), 12);
        assert_eq!(model.constraints().iter().filter(|c| c.tag.starts_with("eq5")).count(), 3);
        assert!(model.find("PL[2,3]").is_some());
    }

    #[test]
    fn serving_bus2_over_line1_is_feasible() {
        // Line 1 (1-2) only, load at bus 2 fully served: flow 1.0, angle 0.1.
        let net = tri3();
        let (model, _) = build_ops(&net, &PlanningParams::new(0.5, 0.0), &compute_big_m(&net)).unwrap();
        let a = assignment_for(
            &model,
            &[
                ("zL[1]", 1.0),
                ("zB[1]", 1.0),
                ("zB[2]", 1.0),
                ("zG[1,0]", 1.0),
                ("PG[1,0]", 1.0),
                ("x[2,0]", 1.0),
                ("PL[1,0]", 1.0),
                ("th[2,0]", -0.1),
            ],
        );
        let report = audit(&model, &a, 1e-9).unwrap();
        assert!(report.is_clean(), "{:?}", report.violations);
        assert!((report.objective - 0.9).abs() < 1e-12);
    }

    #[test]
    fn flow_on_open_line_is_rejected() {
        let net = tri3();
        let (model, _) = build_ops(&net, &PlanningParams::new(0.0, 0.0), &compute_big_m(&net)).unwrap();
        let a = assignment_for(&model, &[("PL[1,0]", 0.5), ("th[2,0]", -0.05)]);
        let report = audit(&model, &a, 1e-9).unwrap();
        let tags = report.violated_tags();
        assert!(tags.iter().any(|t| t.starts_with("eq8c_hi[line=1")), "{tags:?}");
    }

    #[test]
    fn bad_parameters_rejected() {
        let net = tri3();
        let bigm = compute_big_m(&net);
        assert!(build_ops(&net, &PlanningParams::new(1.5, 0.0), &bigm).is_err());
        assert!(build_ops(&net, &PlanningParams::new(0.5, 0.0).with_flex(-0.1), &bigm).is_err());
    }
}
