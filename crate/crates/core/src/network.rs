//! Transmission network domain types and the graph analyses shared by the
//! formulations (connectivity, bridges).
//!
//! All electrical quantities are stored in per-unit on `base_mva`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type BusId = u32;
pub type LineId = u32;
pub type GenId = u32;
pub type LoadId = u32;

/// Angle-difference cap used when a case does not provide one (radians).
pub const DEFAULT_ANGLE_DIFF_CAP: f64 = 0.15;

fn default_angle_diff_cap() -> f64 {
    DEFAULT_ANGLE_DIFF_CAP
}

fn default_flex() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: LineId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Magnitude of the DC susceptance, `1 / x`.
    pub susceptance: f64,
    pub thermal_limit: f64,
    #[serde(default)]
    pub risk: f64,
    #[serde(default = "default_angle_diff_cap")]
    pub angle_diff_cap: f64,
}

impl Line {
    /// Largest angle difference an energized line can carry: the tighter of
    /// the angle cap and the thermal limit expressed in radians.
    pub fn angle_span(&self) -> f64 {
        self.angle_diff_cap.min(self.thermal_limit / self.susceptance)
    }

    pub fn touches(&self, bus: BusId) -> bool {
        self.from_bus == bus || self.to_bus == bus
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: GenId,
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    /// Post-contingency ramp capability as a fraction of `p_max`.
    #[serde(default = "default_flex")]
    pub flex: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub id: LoadId,
    pub bus: BusId,
    pub demand: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<LoadPoint>,
}

/// Planning knobs for one shutoff study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanningParams {
    /// Minimum fraction of total demand served before any contingency.
    pub alpha: f64,
    /// Maximum additional fraction of total demand shed in any contingency.
    pub beta: f64,
    /// When set, replaces every generator's own flexibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flex_override: Option<f64>,
}

impl PlanningParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            flex_override: None,
        }
    }

    pub fn with_flex(mut self, flex: f64) -> Self {
        self.flex_override = Some(flex);
        self
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.alpha) {
            return Err(NetworkError::Parameter(format!("alpha {} outside [0,1]", self.alpha)));
        }
        if !in_unit(self.beta) {
            return Err(NetworkError::Parameter(format!("beta {} outside [0,1]", self.beta)));
        }
        if let Some(f) = self.flex_override {
            if !in_unit(f) {
                return Err(NetworkError::Parameter(format!("flex {f} outside [0,1]")));
            }
        }
        Ok(())
    }

    /// Flexibility in effect for `gen`.
    pub fn flex_for(&self, gen: &Generator) -> f64 {
        self.flex_override.unwrap_or(gen.flex)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("unknown line id {0}")]
    UnknownLine(LineId),
    #[error("unknown bus id {0}")]
    UnknownBus(BusId),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid network: {0}")]
    Invalid(ValidationReport),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Bus,
    Line,
    Generator,
    Load,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ComponentKind::Bus => "bus",
            ComponentKind::Line => "line",
            ComponentKind::Generator => "generator",
            ComponentKind::Load => "load",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    NoBuses,
    DuplicateId { component: ComponentKind, id: u32 },
    DanglingBusReference { component: ComponentKind, id: u32, bus: BusId },
    SelfLoop { line: LineId },
    NonpositiveSusceptance { line: LineId, value: f64 },
    NegativeThermalLimit { line: LineId, value: f64 },
    NonpositiveAngleCap { line: LineId, value: f64 },
    NegativeRisk { line: LineId, value: f64 },
    NegativeDemand { load: LoadId, value: f64 },
    GeneratorLimits { generator: GenId, p_min: f64, p_max: f64 },
    FlexOutOfRange { generator: GenId, value: f64 },
    NonFinite { component: ComponentKind, id: u32 },
    NonpositiveBaseMva { value: f64 },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            NoBuses => write!(f, "network has no buses"),
            DuplicateId { component, id } => write!(f, "duplicate {component} id {id}"),
            DanglingBusReference { component, id, bus } => {
                write!(f, "dangling bus reference: {component} {id} points at bus {bus}")
            }
            SelfLoop { line } => write!(f, "line {line} connects a bus to itself"),
            NonpositiveSusceptance { line, value } => {
                write!(f, "nonpositive susceptance {value} on line {line}")
            }
            NegativeThermalLimit { line, value } => {
                write!(f, "negative thermal limit {value} on line {line}")
            }
            NonpositiveAngleCap { line, value } => {
                write!(f, "nonpositive angle difference cap {value} on line {line}")
            }
            NegativeRisk { line, value } => write!(f, "negative risk {value} on line {line}"),
            NegativeDemand { load, value } => write!(f, "negative demand {value} on load {load}"),
            GeneratorLimits { generator, p_min, p_max } => write!(
                f,
                "generator {generator} limits violate 0 <= p_min ({p_min}) <= p_max ({p_max})"
            ),
            FlexOutOfRange { generator, value } => {
                write!(f, "generator {generator} flexibility {value} outside [0,1]")
            }
            NonFinite { component, id } => write!(f, "non-finite value on {component} {id}"),
            NonpositiveBaseMva { value } => write!(f, "nonpositive base MVA {value}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

impl Network {
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        if self.buses.is_empty() {
            issues.push(ValidationIssue::NoBuses);
        }
        if !(self.base_mva > 0.0) || !self.base_mva.is_finite() {
            issues.push(ValidationIssue::NonpositiveBaseMva { value: self.base_mva });
        }

        let mut bus_ids = HashSet::new();
        for bus in &self.buses {
            if !bus_ids.insert(bus.id) {
                issues.push(ValidationIssue::DuplicateId {
                    component: ComponentKind::Bus,
                    id: bus.id,
                });
            }
        }
        let dangling = |component, id, bus: BusId, issues: &mut Vec<ValidationIssue>| {
            if !bus_ids.contains(&bus) {
                issues.push(ValidationIssue::DanglingBusReference { component, id, bus });
            }
        };

        let mut seen = HashSet::new();
        for line in &self.lines {
            if !seen.insert(line.id) {
                issues.push(ValidationIssue::DuplicateId {
                    component: ComponentKind::Line,
                    id: line.id,
                });
            }
            dangling(ComponentKind::Line, line.id, line.from_bus, &mut issues);
            dangling(ComponentKind::Line, line.id, line.to_bus, &mut issues);
            let values = [
                line.susceptance,
                line.thermal_limit,
                line.risk,
                line.angle_diff_cap,
            ];
            if values.iter().any(|v| !v.is_finite()) {
                issues.push(ValidationIssue::NonFinite {
                    component: ComponentKind::Line,
                    id: line.id,
                });
                continue;
            }
            if line.from_bus == line.to_bus {
                issues.push(ValidationIssue::SelfLoop { line: line.id });
            }
            if line.susceptance <= 0.0 {
                issues.push(ValidationIssue::NonpositiveSusceptance {
                    line: line.id,
                    value: line.susceptance,
                });
            }
            if line.thermal_limit < 0.0 {
                issues.push(ValidationIssue::NegativeThermalLimit {
                    line: line.id,
                    value: line.thermal_limit,
                });
            }
            if line.angle_diff_cap <= 0.0 {
                issues.push(ValidationIssue::NonpositiveAngleCap {
                    line: line.id,
                    value: line.angle_diff_cap,
                });
            }
            if line.risk < 0.0 {
                issues.push(ValidationIssue::NegativeRisk {
                    line: line.id,
                    value: line.risk,
                });
            }
        }

        let mut seen = HashSet::new();
        for gen in &self.generators {
            if !seen.insert(gen.id) {
                issues.push(ValidationIssue::DuplicateId {
                    component: ComponentKind::Generator,
                    id: gen.id,
                });
            }
            dangling(ComponentKind::Generator, gen.id, gen.bus, &mut issues);
            if [gen.p_min, gen.p_max, gen.flex].iter().any(|v| !v.is_finite()) {
                issues.push(ValidationIssue::NonFinite {
                    component: ComponentKind::Generator,
                    id: gen.id,
                });
                continue;
            }
            if gen.p_min < 0.0 || gen.p_min > gen.p_max {
                issues.push(ValidationIssue::GeneratorLimits {
                    generator: gen.id,
                    p_min: gen.p_min,
                    p_max: gen.p_max,
                });
            }
            if !(0.0..=1.0).contains(&gen.flex) {
                issues.push(ValidationIssue::FlexOutOfRange {
                    generator: gen.id,
                    value: gen.flex,
                });
            }
        }

        let mut seen = HashSet::new();
        for load in &self.loads {
            if !seen.insert(load.id) {
                issues.push(ValidationIssue::DuplicateId {
                    component: ComponentKind::Load,
                    id: load.id,
                });
            }
            dangling(ComponentKind::Load, load.id, load.bus, &mut issues);
            if !load.demand.is_finite() {
                issues.push(ValidationIssue::NonFinite {
                    component: ComponentKind::Load,
                    id: load.id,
                });
            } else if load.demand < 0.0 {
                issues.push(ValidationIssue::NegativeDemand {
                    load: load.id,
                    value: load.demand,
                });
            }
        }

        ValidationReport { issues }
    }

    /// Returns `Err` carrying the report when the network is invalid.
    pub fn ensure_valid(&self) -> Result<(), NetworkError> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(NetworkError::Invalid(report))
        }
    }

    pub fn total_demand(&self) -> f64 {
        self.loads.iter().map(|l| l.demand).sum()
    }

    pub fn total_risk(&self) -> f64 {
        self.lines.iter().map(|l| l.risk).sum()
    }

    pub fn line(&self, id: LineId) -> Option<&Line> {
        self.lines.iter().find(|l| l.id == id)
    }

    pub fn line_ids(&self) -> BTreeSet<LineId> {
        self.lines.iter().map(|l| l.id).collect()
    }

    /// Bus with the smallest id; its angle is the reference in every scenario.
    pub fn reference_bus(&self) -> Option<BusId> {
        self.buses.iter().map(|b| b.id).min()
    }

    /// Partition of all buses into maximal sets joined by `energized_lines`.
    ///
    /// Components are ordered by their smallest bus id.
    pub fn connected_components(
        &self,
        energized_lines: &BTreeSet<LineId>,
    ) -> Result<Vec<BTreeSet<BusId>>, NetworkError> {
        let by_id: HashMap<LineId, &Line> = self.lines.iter().map(|l| (l.id, l)).collect();
        let mut uf = UnionFind::new(self.buses.iter().map(|b| b.id));
        for id in energized_lines {
            let line = by_id.get(id).ok_or(NetworkError::UnknownLine(*id))?;
            uf.union(line.from_bus, line.to_bus)?;
        }
        Ok(uf.groups())
    }

    /// Lines whose removal disconnects the full network (all lines present).
    /// Parallel lines are never bridges.
    pub fn find_bridges(&self) -> BTreeSet<LineId> {
        let index: HashMap<BusId, usize> = self
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect();
        let n = self.buses.len();
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (edge, line) in self.lines.iter().enumerate() {
            let (Some(&u), Some(&v)) = (index.get(&line.from_bus), index.get(&line.to_bus)) else {
                continue;
            };
            if u == v {
                continue;
            }
            adjacency[u].push((v, edge));
            adjacency[v].push((u, edge));
        }

        // Iterative low-link DFS; the parent is skipped by edge index so that
        // parallel lines form a cycle.
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut bridges = BTreeSet::new();
        let mut timer = 0usize;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (vertex, parent edge, next adjacency position)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(top) = stack.last_mut() {
                let (v, parent_edge, pos) = *top;
                if pos < adjacency[v].len() {
                    top.2 += 1;
                    let (w, edge) = adjacency[v][pos];
                    if edge == parent_edge {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, edge, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(u, _, _)) = stack.last() {
                        low[u] = low[u].min(low[v]);
                        if low[v] > disc[u] {
                            bridges.insert(self.lines[parent_edge].id);
                        }
                    }
                }
            }
        }
        bridges
    }
}

/// Union-find over bus ids.
pub(crate) struct UnionFind {
    index: BTreeMap<BusId, usize>,
    ids: Vec<BusId>,
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(ids: impl IntoIterator<Item = BusId>) -> Self {
        let ids: Vec<BusId> = ids.into_iter().collect();
        let index = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let parent = (0..ids.len()).collect();
        Self { index, ids, parent }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub(crate) fn union(&mut self, a: BusId, b: BusId) -> Result<bool, NetworkError> {
        let ia = *self.index.get(&a).ok_or(NetworkError::UnknownBus(a))?;
        let ib = *self.index.get(&b).ok_or(NetworkError::UnknownBus(b))?;
        let (ra, rb) = (self.find(ia), self.find(ib));
        if ra == rb {
            return Ok(false);
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        Ok(true)
    }

    pub(crate) fn groups(&mut self) -> Vec<BTreeSet<BusId>> {
        let mut groups: BTreeMap<usize, BTreeSet<BusId>> = BTreeMap::new();
        for i in 0..self.ids.len() {
            let root = self.find(i);
            groups.entry(root).or_default().insert(self.ids[i]);
        }
        let mut out: Vec<BTreeSet<BusId>> = groups.into_values().collect();
        out.sort_by_key(|g| g.iter().next().copied());
        out
    }
}

/// The three-bus triangle used throughout the documentation and tests:
/// one generator at bus 1, loads of 1.0 and 0.5 pu at buses 2 and 3.
pub fn tri3() -> Network {
    let line = |id, from_bus, to_bus, risk| Line {
        id,
        from_bus,
        to_bus,
        susceptance: 10.0,
        thermal_limit: 1.5,
        risk,
        angle_diff_cap: 0.15,
    };
    Network {
        base_mva: 100.0,
        buses: (1..=3).map(|id| Bus { id, name: None }).collect(),
        lines: vec![line(1, 1, 2, 0.9), line(2, 1, 3, 0.2), line(3, 2, 3, 0.1)],
        generators: vec![Generator {
            id: 1,
            bus: 1,
            p_min: 0.0,
            p_max: 2.0,
            flex: 1.0,
        }],
        loads: vec![
            LoadPoint {
                id: 2,
                bus: 2,
                demand: 1.0,
            },
            LoadPoint {
                id: 3,
                bus: 3,
                demand: 0.5,
            },
        ],
    }
}
