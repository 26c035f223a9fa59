//! Brute-force reference solvers for small networks.
//!
//! `enumerate_oracle` walks every line mask in ascending risk order and
//! checks each one with an LP over the remaining continuous decisions, so the
//! first feasible mask is optimal. Angles are free and flows are substituted
//! out, which keeps the oracle independent of the big-M constants used by the
//! MILP. Generator on/off choices are handled by branching on the
//! disjunction `P ∈ {0} ∪ [lo, hi]` only where the LP relaxation violates it.

use std::collections::{BTreeMap, BTreeSet};

use super::dense::{DenseLp, DenseOutcome};
use super::SolverError;
use crate::formulation::{Contingency, ContingencySet, ShutoffPlan};
use crate::network::{BusId, GenId, Line, LineId, LoadId, Network, PlanningParams};

pub const ORACLE_MAX_LINES: usize = 12;

const TOL: f64 = 1e-7;
const INF: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub energized_lines: BTreeSet<LineId>,
    /// Masks that reached the LP stage.
    pub masks_checked: usize,
}

/// Pre-contingency output: either a variable or a value fixed by a plan.
#[derive(Clone, Copy, Debug)]
enum Base {
    Var(usize),
    Fixed { value: f64, committed: bool },
}

#[derive(Clone, Debug)]
enum Disjunction {
    /// `P0 ∈ {0} ∪ [p_min, p_max]`; switching off also trips `posts`.
    Pre { p0: usize, p_min: f64, posts: Vec<usize> },
    /// `Pc ∈ {0} ∪ [max(p_min, P0 − w), ·]`, and on requires the base on.
    Post { pc: usize, base: Base, p_min: f64, window: f64 },
}

impl Disjunction {
    fn violated(&self, x: &[f64]) -> bool {
        match *self {
            Disjunction::Pre { p0, p_min, .. } => x[p0] > TOL && x[p0] < p_min - TOL,
            Disjunction::Post { pc, base, p_min, window } => {
                if x[pc] <= TOL {
                    return false;
                }
                let (b, base_on) = match base {
                    Base::Var(v) => (x[v], p_min <= 0.0 || x[v] >= p_min - TOL),
                    Base::Fixed { value, committed } => (value, committed),
                };
                !base_on || x[pc] < p_min - TOL || x[pc] < b - window - TOL
            }
        }
    }

    fn branches(&self, lp: &DenseLp) -> [DenseLp; 2] {
        let mut off = lp.clone();
        let mut on = lp.clone();
        match self {
            Disjunction::Pre { p0, p_min, posts } => {
                off.set_bounds(*p0, 0.0, 0.0);
                for &pc in posts {
                    off.set_bounds(pc, 0.0, 0.0);
                }
                let (lo, hi) = on.bounds(*p0);
                on.set_bounds(*p0, lo.max(*p_min), hi);
            }
            Disjunction::Post { pc, base, p_min, window } => {
                off.set_bounds(*pc, 0.0, 0.0);
                let (lo, hi) = on.bounds(*pc);
                match *base {
                    Base::Var(v) => {
                        on.set_bounds(*pc, lo.max(*p_min), hi);
                        on.add_row(vec![(*pc, 1.0), (v, -1.0)], -window, INF);
                        if *p_min > 0.0 {
                            let (blo, bhi) = on.bounds(v);
                            on.set_bounds(v, blo.max(*p_min), bhi);
                        }
                    }
                    Base::Fixed { value, committed } => {
                        if committed {
                            on.set_bounds(*pc, lo.max(*p_min).max(value - window), hi);
                        } else {
                            on.set_bounds(*pc, 1.0, 0.0);
                        }
                    }
                }
            }
        }
        [off, on]
    }
}

/// Depth-first search over violated disjunctions. With `first_feasible` the
/// search stops at the first disjunction-feasible point; otherwise it keeps
/// the minimum objective.
fn search(
    lp: DenseLp,
    disjunctions: &[Disjunction],
    first_feasible: bool,
    best: &mut Option<(f64, Vec<f64>)>,
) -> Result<(), SolverError> {
    let (values, objective) = match lp.solve()? {
        DenseOutcome::Optimal { values, objective } => (values, objective),
        DenseOutcome::Infeasible => return Ok(()),
        DenseOutcome::Unbounded => return Err(SolverError::OracleInput("oracle LP is unbounded".into())),
    };
    if let Some((b, _)) = best {
        if first_feasible || objective >= *b - 1e-12 {
            return Ok(());
        }
    }
    match disjunctions.iter().find(|d| d.violated(&values)) {
        None => {
            *best = Some((objective, values));
            Ok(())
        }
        Some(d) => {
            for child in d.branches(&lp) {
                search(child, disjunctions, first_feasible, best)?;
                if first_feasible && best.is_some() {
                    break;
                }
            }
            Ok(())
        }
    }
}

struct ScenarioVars {
    gen: BTreeMap<GenId, usize>,
    load: BTreeMap<LoadId, usize>,
}

/// Free angles, dispatch in `[0, p_max]`, served fractions in `[0, 1]`,
/// angle-span rows for `active` lines and nodal balance with substituted flows.
fn add_scenario(lp: &mut DenseLp, network: &Network, active: &dyn Fn(&Line) -> bool) -> ScenarioVars {
    let theta: BTreeMap<BusId, usize> = network
        .buses
        .iter()
        .map(|b| (b.id, lp.add_var(0.0, -INF, INF)))
        .collect();
    let mut balance: BTreeMap<BusId, BTreeMap<usize, f64>> =
        network.buses.iter().map(|b| (b.id, BTreeMap::new())).collect();
    let mut add = |bus: BusId, var: usize, coef: f64| {
        *balance.get_mut(&bus).expect("validated").entry(var).or_insert(0.0) += coef;
    };
    let gen: BTreeMap<GenId, usize> = network
        .generators
        .iter()
        .map(|g| {
            let p = lp.add_var(0.0, 0.0, g.p_max);
            add(g.bus, p, 1.0);
            (g.id, p)
        })
        .collect();
    let load: BTreeMap<LoadId, usize> = network
        .loads
        .iter()
        .map(|d| {
            let x = lp.add_var(0.0, 0.0, 1.0);
            add(d.bus, x, -d.demand);
            (d.id, x)
        })
        .collect();
    for line in network.lines.iter().filter(|l| active(l)) {
        let (f, t) = (theta[&line.from_bus], theta[&line.to_bus]);
        if f == t {
            continue;
        }
        let d = line.angle_span();
        lp.add_row(vec![(f, 1.0), (t, -1.0)], -d, d);
        // Flow b(θf − θt) leaves the from bus and enters the to bus.
        let b = line.susceptance;
        add(line.from_bus, f, -b);
        add(line.from_bus, t, b);
        add(line.to_bus, f, b);
        add(line.to_bus, t, -b);
    }
    for terms in balance.into_values() {
        let terms: Vec<(usize, f64)> = terms.into_iter().filter(|&(_, c)| c != 0.0).collect();
        if !terms.is_empty() {
            lp.add_row(terms, 0.0, 0.0);
        }
    }
    ScenarioVars { gen, load }
}

/// Demand in components that contain a generator, over `lines`.
fn reachable_demand(network: &Network, lines: &dyn Fn(&Line) -> bool) -> f64 {
    let index: BTreeMap<BusId, usize> = network.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for line in network.lines.iter().filter(|l| lines(l)) {
        let (a, b) = (find(&mut parent, index[&line.from_bus]), find(&mut parent, index[&line.to_bus]));
        parent[a] = b;
    }
    let mut powered = BTreeSet::new();
    for g in network.generators.iter().filter(|g| g.p_max > 0.0) {
        powered.insert(find(&mut parent, index[&g.bus]));
    }
    network
        .loads
        .iter()
        .filter(|d| powered.contains(&find(&mut parent, index[&d.bus])))
        .map(|d| d.demand)
        .sum()
}

fn check_size(network: &Network) -> Result<(), SolverError> {
    if network.lines.len() > ORACLE_MAX_LINES {
        return Err(SolverError::OracleTooLarge {
            lines: network.lines.len(),
            limit: ORACLE_MAX_LINES,
        });
    }
    network
        .ensure_valid()
        .map_err(|e| SolverError::OracleInput(e.to_string()))
}

/// Minimum-risk shutoff by exhaustive enumeration. An empty contingency set
/// gives OPS, otherwise SC-OPS. Returns `None` when no mask is feasible.
pub fn enumerate_oracle(
    network: &Network,
    params: &PlanningParams,
    contingencies: &ContingencySet,
) -> Result<Option<OracleResult>, SolverError> {
    check_size(network)?;
    params.validate().map_err(|e| SolverError::OracleInput(e.to_string()))?;
    contingencies
        .validate(network)
        .map_err(|e| SolverError::OracleInput(e.to_string()))?;

    let n = network.lines.len();
    let total = network.total_demand();
    let mut masks: Vec<(f64, u32)> = (0..1u32 << n)
        .map(|mask| {
            let risk = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| network.lines[i].risk).sum();
            (risk, mask)
        })
        .collect();
    masks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut masks_checked = 0;
    for (risk, mask) in masks {
        let on: BTreeSet<LineId> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| network.lines[i].id)
            .collect();
        if reachable_demand(network, &|l| on.contains(&l.id)) < params.alpha * total - TOL {
            continue;
        }
        let post_floor = (params.alpha - params.beta) * total - TOL;
        if contingencies.scenarios.iter().any(|c| {
            reachable_demand(network, &|l| on.contains(&l.id) && !c.outaged_lines.contains(&l.id)) < post_floor
        }) {
            continue;
        }
        masks_checked += 1;
        if mask_feasible(network, params, contingencies, &on)? {
            return Ok(Some(OracleResult {
                objective: risk,
                energized_lines: on,
                masks_checked,
            }));
        }
    }
    Ok(None)
}

fn mask_feasible(
    network: &Network,
    params: &PlanningParams,
    contingencies: &ContingencySet,
    on: &BTreeSet<LineId>,
) -> Result<bool, SolverError> {
    let total = network.total_demand();
    let mut lp = DenseLp::new();
    let pre = add_scenario(&mut lp, network, &|l| on.contains(&l.id));
    let served: Vec<(usize, f64)> = network.loads.iter().map(|d| (pre.load[&d.id], d.demand)).collect();
    lp.add_row(served.clone(), params.alpha * total, INF);

    let mut posts: BTreeMap<GenId, Vec<usize>> = BTreeMap::new();
    let mut disjunctions = Vec::new();
    for c in &contingencies.scenarios {
        let post = add_scenario(&mut lp, network, &|l| on.contains(&l.id) && !c.outaged_lines.contains(&l.id));
        let mut shed = served.clone();
        for d in &network.loads {
            let (x0, xc) = (pre.load[&d.id], post.load[&d.id]);
            lp.add_row(vec![(xc, 1.0), (x0, -1.0)], -INF, 0.0);
            shed.push((xc, -d.demand));
        }
        lp.add_row(shed, -INF, params.beta * total);
        for g in &network.generators {
            let (p0, pc) = (pre.gen[&g.id], post.gen[&g.id]);
            let window = params.flex_for(g) * g.p_max;
            lp.add_row(vec![(pc, 1.0), (p0, -1.0)], -INF, window);
            posts.entry(g.id).or_default().push(pc);
            disjunctions.push(Disjunction::Post {
                pc,
                base: Base::Var(p0),
                p_min: g.p_min,
                window,
            });
        }
    }
    for g in network.generators.iter().filter(|g| g.p_min > 0.0) {
        disjunctions.insert(
            0,
            Disjunction::Pre {
                p0: pre.gen[&g.id],
                p_min: g.p_min,
                posts: posts.remove(&g.id).unwrap_or_default(),
            },
        );
    }
    let mut best = None;
    search(lp, &disjunctions, true, &mut best)?;
    Ok(best.is_some())
}

/// Minimum additional shed (fraction of total demand) of `plan` under
/// `contingency`, by enumeration of generator trips.
pub fn oracle_evaluate(
    network: &Network,
    plan: &ShutoffPlan,
    contingency: &Contingency,
    flex: Option<f64>,
) -> Result<f64, SolverError> {
    check_size(network)?;
    plan.check_consistency(network)
        .map_err(|e| SolverError::OracleInput(e.to_string()))?;
    let total = network.total_demand();
    let mut lp = DenseLp::new();
    let post = add_scenario(&mut lp, network, &|l| {
        plan.energized_lines.contains(&l.id) && !contingency.outaged_lines.contains(&l.id)
    });
    let mut served0 = 0.0;
    for d in &network.loads {
        let x0 = plan.served_fraction_of(d.id);
        served0 += d.demand * x0;
        let xc = post.load[&d.id];
        lp.set_bounds(xc, 0.0, x0.clamp(0.0, 1.0));
        if total > 0.0 {
            lp.set_cost(xc, -d.demand / total);
        }
    }
    let mut disjunctions = Vec::new();
    for g in &network.generators {
        let pc = post.gen[&g.id];
        let committed = plan.committed_generators.contains(&g.id);
        let value = plan.dispatch_of(g.id);
        let window = flex.unwrap_or(g.flex) * g.p_max;
        if committed {
            lp.set_bounds(pc, 0.0, g.p_max.min(value + window));
        } else {
            lp.set_bounds(pc, 0.0, 0.0);
        }
        disjunctions.push(Disjunction::Post {
            pc,
            base: Base::Fixed { value, committed },
            p_min: g.p_min,
            window,
        });
    }
    let mut best = None;
    search(lp, &disjunctions, false, &mut best)?;
    let (objective, _) = best.ok_or_else(|| SolverError::OracleInput("evaluator has no feasible point".into()))?;
    let base = if total > 0.0 { served0 / total } else { 0.0 };
    Ok((base + objective).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{build_contingency_set, ContingencyPolicy};
    use crate::network::tri3;

    #[test]
    fn tri3_ops_and_scops() {
        let net = tri3();
        let ops = enumerate_oracle(&net, &PlanningParams::new(0.5, 0.0), &ContingencySet::empty())
            .unwrap()
            .unwrap();
        assert!((ops.objective - 0.3).abs() < 1e-12);

        let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        let tight = enumerate_oracle(&net, &PlanningParams::new(0.5, 0.0), &set).unwrap().unwrap();
        assert!((tight.objective - 1.2).abs() < 1e-12);
        let loose = enumerate_oracle(&net, &PlanningParams::new(0.5, 0.7), &set).unwrap().unwrap();
        assert!((loose.objective - 0.3).abs() < 1e-12);
        assert_eq!(loose.energized_lines, BTreeSet::from([2, 3]));
    }

    #[test]
    fn refuses_large_networks() {
        let mut net = tri3();
        let template = net.lines[0].clone();
        for id in 100..100 + ORACLE_MAX_LINES as LineId {
            net.lines.push(Line { id, ..template.clone() });
        }
        assert!(matches!(
            enumerate_oracle(&net, &PlanningParams::new(0.5, 0.0), &ContingencySet::empty()),
            Err(SolverError::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let net = tri3();
        let params = PlanningParams::new(1.0, 0.0);
        let mut starved = net.clone();
        for g in &mut starved.generators {
            g.p_max *= 0.1;
        }
        assert_eq!(enumerate_oracle(&starved, &params, &ContingencySet::empty()).unwrap(), None);
    }
}
