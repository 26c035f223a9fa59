use super::builder::{add_scenario_physics, Switch};
use super::{BigMBounds, Contingency, FormulationError, ShutoffPlan, VariableMap};
use crate::milp::{Assignment, MilpModel, Sense};
use crate::network::Network;

/// Worst-case shed of a fixed plan under one contingency.
///
/// Line states and the pre-contingency dispatch come from `plan`; the only
/// decisions are generator trips, the redispatch and the served loads.
/// The objective `γ` is the additional shed as a fraction of total demand.
/// `flex` replaces every generator's own flexibility when set.
pub fn build_ce(
    network: &Network,
    plan: &ShutoffPlan,
    contingency: &Contingency,
    flex: Option<f64>,
    bigm: &BigMBounds,
) -> Result<(MilpModel, VariableMap), FormulationError> {
    network.ensure_valid()?;
    plan.check_consistency(network)?;
    if let Some(f) = flex {
        if !(0.0..=1.0).contains(&f) {
            return Err(crate::network::NetworkError::Parameter(format!("flex {f} outside [0,1]")).into());
        }
    }
    if let Some(&line) = contingency.outaged_lines.iter().find(|l| network.line(**l).is_none()) {
        return Err(FormulationError::UnknownContingencyLine {
            scenario: contingency.id,
            line,
        });
    }

    let c = contingency.id;
    let mut model = MilpModel::new();
    let mut map = VariableMap::default();
    add_scenario_physics(&mut model, &mut map, network, bigm, c, &|l| {
        if contingency.outaged_lines.contains(&l) || !plan.energized_lines.contains(&l) {
            Switch::Fixed(0.0)
        } else {
            Switch::Fixed(1.0)
        }
    })?;
    map.scenarios.push((c, contingency.outaged_lines.clone()));

    let gamma = model.add_continuous(format!("gamma[{c}]"), 0.0, f64::INFINITY)?;
    map.gamma = Some(gamma);
    model.set_objective([(1.0, gamma)])?;

    for gen in &network.generators {
        let z0 = if plan.committed_generators.contains(&gen.id) { 1.0 } else { 0.0 };
        let p0 = plan.dispatch_of(gen.id);
        let zc = map.gen_on[&(gen.id, c)];
        let pc = map.gen_output[&(gen.id, c)];
        model.add_constraint(format!("eq4d[gen={},c={c}]", gen.id), [(1.0, zc)], Sense::Le, z0)?;
        let window = flex.unwrap_or(gen.flex) * gen.p_max + gen.p_max;
        model.add_constraint(
            format!("eq6hi[gen={},c={c}]", gen.id),
            [(1.0, pc), (gen.p_max, zc)],
            Sense::Le,
            window + p0,
        )?;
        model.add_constraint(
            format!("eq6lo[gen={},c={c}]", gen.id),
            [(-1.0, pc), (gen.p_max, zc)],
            Sense::Le,
            window - p0,
        )?;
    }
    let mut served0 = 0.0;
    let mut terms = Vec::with_capacity(network.loads.len() + 1);
    for load in &network.loads {
        let x0 = plan.served_fraction_of(load.id);
        let xc = map.load_served[&(load.id, c)];
        served0 += load.demand * x0;
        model.add_constraint(format!("eq4e[load={},c={c}]", load.id), [(1.0, xc)], Sense::Le, x0)?;
        terms.push((-load.demand, xc));
    }
    terms.push((-network.total_demand(), gamma));
    model.add_constraint(format!("eq13[c={c}]"), terms, Sense::Le, -served0)?;
    Ok((model, map))
}

/// `γ` read from a solved evaluator model.
pub fn gamma_of(map: &VariableMap, assignment: &Assignment) -> Option<f64> {
    map.gamma.map(|g| assignment.get(g))
}
