use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::network::{LineId, Network, DEFAULT_ANGLE_DIFF_CAP};

/// Angle constants for the switched flow constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigMBounds {
    /// Per-line bound on `|θ_i − θ_j|` used when the line is open.
    pub theta_delta_max: BTreeMap<LineId, f64>,
    /// Every bus angle lies in `[−global_angle_bound, global_angle_bound]`.
    pub global_angle_bound: f64,
}

impl BigMBounds {
    pub fn for_line(&self, line: LineId) -> f64 {
        self.theta_delta_max[&line]
    }
}

/// Per-line angle span `d = min(angle cap, T / b)`; an energized line never
/// carries an angle difference larger than `d`.
///
/// With `G = Σ d` over all lines, every island of any switching pattern fits
/// in `[−G, G]`. For a line that is not a bridge, both of its endpoints end up
/// either in one island (difference bounded by an energized path) or in two
/// islands that can be shifted to overlap at zero; in both cases
/// `|θ_i − θ_j|` is at most the summed span of the other lines in its
/// connected component. Bridges fall back to `2G`.
pub fn compute_big_m(network: &Network) -> BigMBounds {
    let span: BTreeMap<LineId, f64> = network
        .lines
        .iter()
        .map(|l| (l.id, l.angle_span().max(0.0)))
        .collect();
    let mut global: f64 = span.values().sum();
    if !(global > 0.0) {
        global = DEFAULT_ANGLE_DIFF_CAP;
    }

    let bridges = network.find_bridges();
    let all: BTreeSet<LineId> = network.line_ids();
    let components = network
        .connected_components(&all)
        .expect("line ids come from the network");
    let component_of = |bus| components.iter().position(|c| c.contains(&bus));
    let mut component_span = vec![0.0; components.len()];
    for line in &network.lines {
        if let Some(c) = component_of(line.from_bus) {
            component_span[c] += span[&line.id];
        }
    }

    let theta_delta_max = network
        .lines
        .iter()
        .map(|line| {
            let own = span[&line.id];
            let value = if bridges.contains(&line.id) {
                2.0 * global
            } else {
                let c = component_of(line.from_bus).expect("bus exists");
                (component_span[c] - own).max(own)
            };
            let value = if value > 0.0 { value } else { 2.0 * global };
            (line.id, value)
        })
        .collect();
    BigMBounds {
        theta_delta_max,
        global_angle_bound: global,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tri3;

    #[test]
    fn triangle_alternative_path() {
        let m = compute_big_m(&tri3());
        assert!((m.global_angle_bound - 0.45).abs() < 1e-12);
        for line in 1..=3 {
            assert!((m.for_line(line) - 0.30).abs() < 1e-12);
            assert!(m.for_line(line) >= 0.15);
        }
    }

    #[test]
    fn single_line_falls_back_to_twice_global() {
        let mut net = tri3();
        net.buses.truncate(2);
        net.lines.truncate(1);
        net.loads.truncate(1);
        let m = compute_big_m(&net);
        assert!((m.for_line(1) - 0.30).abs() < 1e-12);
        assert!((m.global_angle_bound - 0.15).abs() < 1e-12);
    }

    #[test]
    fn thermal_limit_tightens_span() {
        let mut net = tri3();
        net.lines[0].thermal_limit = 0.5; // 0.5 / 10 = 0.05 < 0.15
        let m = compute_big_m(&net);
        assert!((m.global_angle_bound - 0.35).abs() < 1e-12);
        assert!((m.for_line(1) - 0.30).abs() < 1e-12);
        assert!((m.for_line(2) - 0.20).abs() < 1e-12);
    }
}
