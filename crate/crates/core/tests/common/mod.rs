#![allow(dead_code)]

use psps::network::{Bus, Generator, Line, LoadPoint, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASE39: &str = include_str!("../data/case39.m");

/// Connected random network with at most `max_buses` buses and `max_lines`
/// lines: a random spanning tree plus extra lines, one or two generators and
/// a load on most buses. Thermal limits are drawn so that some bind.
pub fn random_network(seed: u64, max_buses: u32, max_lines: u32) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_buses);
    let buses: Vec<Bus> = (1..=n).map(|id| Bus { id, name: None }).collect();

    let line = |rng: &mut ChaCha8Rng, id, from_bus, to_bus| Line {
        id,
        from_bus,
        to_bus,
        susceptance: rng.random_range(2.0..20.0),
        thermal_limit: rng.random_range(0.3..2.0),
        risk: (rng.random_range(0.0..1.0f64) * 1000.0).round() / 1000.0,
        angle_diff_cap: if rng.random_bool(0.3) { rng.random_range(0.02..0.2) } else { 0.5 },
    };
    let mut lines = Vec::new();
    for b in 2..=n {
        let parent = rng.random_range(1..b);
        let id = lines.len() as u32 + 1;
        lines.push(line(&mut rng, id, parent, b));
    }
    let extra = rng.random_range(0..=max_lines.saturating_sub(n - 1));
    for _ in 0..extra {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        if a == b {
            continue;
        }
        let id = lines.len() as u32 + 1;
        lines.push(line(&mut rng, id, a, b));
    }

    let gen_count = if n > 2 && rng.random_bool(0.5) { 2 } else { 1 };
    let generators = (1..=gen_count)
        .map(|id| {
            let p_max = rng.random_range(0.8..2.5);
            Generator {
                id,
                bus: rng.random_range(1..=n),
                p_min: if rng.random_bool(0.4) { rng.random_range(0.0..0.5) * p_max } else { 0.0 },
                p_max,
                flex: rng.random_range(0.0..1.0),
            }
        })
        .collect();
    let load_buses: Vec<u32> = (1..=n).filter(|_| rng.random_bool(0.75)).collect();
    let loads = load_buses
        .into_iter()
        .map(|bus| LoadPoint {
            id: bus,
            bus,
            demand: rng.random_range(0.1..1.0),
        })
        .collect();
    Network {
        base_mva: 100.0,
        buses,
        lines,
        generators,
        loads,
    }
}

pub fn case39_seeded() -> Network {
    let mut net = psps::case_io::read_case(CASE39).expect("case39 parses");
    psps::case_io::generate_risk(&net, 42).apply(&mut net).expect("risk applies");
    net
}
