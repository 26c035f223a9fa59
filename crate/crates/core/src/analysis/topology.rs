use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::formulation::{ShutoffPlan, EXTRACTION_TOL};
use crate::network::{BusId, Network};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyMetrics {
    pub island_count: usize,
    /// No cycles among energized lines.
    pub radial: bool,
    pub energized_line_count: usize,
    pub de_energized_line_count: usize,
    /// Bus count of each island, largest first.
    pub island_sizes: Vec<usize>,
}

/// Islands of the energized network.
///
/// A bus counts as live when an energized line touches it or when it
/// hosts a committed generator or a served load. Buses that are energized
/// but do nothing are left out.
pub fn topology_metrics(network: &Network, plan: &ShutoffPlan) -> Result<TopologyMetrics, AnalysisError> {
    plan.check_consistency(network)?;
    let energized: Vec<_> = network
        .lines
        .iter()
        .filter(|l| plan.energized_lines.contains(&l.id))
        .collect();
    let mut live: BTreeSet<BusId> = energized.iter().flat_map(|l| [l.from_bus, l.to_bus]).collect();
    for g in network.generators.iter().filter(|g| plan.committed_generators.contains(&g.id)) {
        live.insert(g.bus);
    }
    for d in &network.loads {
        if plan.served_fraction_of(d.id) > EXTRACTION_TOL {
            live.insert(d.bus);
        }
    }

    let index: BTreeMap<BusId, usize> = live.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut cyclic = false;
    for l in &energized {
        let (a, b) = (find(&mut parent, index[&l.from_bus]), find(&mut parent, index[&l.to_bus]));
        if a == b {
            cyclic = true;
        } else {
            parent[a] = b;
        }
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..index.len() {
        *sizes.entry(find(&mut parent, i)).or_default() += 1;
    }
    let mut island_sizes: Vec<usize> = sizes.into_values().collect();
    island_sizes.sort_unstable_by(|a, b| b.cmp(a));
    Ok(TopologyMetrics {
        island_count: island_sizes.len(),
        radial: !cyclic,
        energized_line_count: energized.len(),
        de_energized_line_count: network.lines.len() - energized.len(),
        island_sizes,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::formulation::PlanSummary;
    use crate::network::tri3;

    fn plan(lines: &[u32], buses: &[u32]) -> ShutoffPlan {
        let net = tri3();
        let energized_lines: BTreeSet<u32> = lines.iter().copied().collect();
        ShutoffPlan {
            deenergized_lines: net.line_ids().difference(&energized_lines).copied().collect(),
            energized_lines,
            energized_buses: buses.iter().copied().collect(),
            committed_generators: BTreeSet::new(),
            dispatch: BTreeMap::new(),
            load_served: BTreeMap::new(),
            line_flows: BTreeMap::new(),
            bus_angles: BTreeMap::new(),
            summary: PlanSummary {
                energized_risk: 0.0,
                total_risk: 1.2,
                active_risk: 0.0,
                served_demand: 0.0,
                total_demand: 1.5,
                load_served_fraction: 0.0,
                energized_line_count: lines.len(),
                worst_additional_shed: None,
            },
        }
    }

    #[test]
    fn tri3_shapes() {
        let net = tri3();
        let all = topology_metrics(&net, &plan(&[1, 2, 3], &[1, 2, 3])).unwrap();
        assert_eq!((all.island_count, all.radial), (1, false));
        let open12 = topology_metrics(&net, &plan(&[2, 3], &[1, 2, 3])).unwrap();
        assert_eq!((open12.island_count, open12.radial), (1, true));
        let off = topology_metrics(&net, &plan(&[], &[1, 2, 3])).unwrap();
        assert_eq!((off.island_count, off.radial), (0, true));
        assert_eq!(off.de_energized_line_count, 3);
    }

    #[test]
    fn radial_iff_forest() {
        let net = tri3();
        for lines in [vec![], vec![1], vec![1, 2], vec![1, 2, 3], vec![3]] {
            let m = topology_metrics(&net, &plan(&lines, &[1, 2, 3])).unwrap();
            let forest_edges: usize = m.island_sizes.iter().map(|s| s - 1).sum();
            assert_eq!(m.radial, m.energized_line_count == forest_edges);
        }
    }
}
