use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{FormulationError, ScenarioId};
use crate::network::{LineId, Network};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contingency {
    pub id: ScenarioId,
    pub outaged_lines: BTreeSet<LineId>,
}

/// Ordered post-contingency scenarios. The pre-contingency state is implicit.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencySet {
    pub scenarios: Vec<Contingency>,
}

impl ContingencySet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// First `n` scenarios, in order.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            scenarios: self.scenarios.iter().take(n).cloned().collect(),
        }
    }

    pub fn validate(&self, network: &Network) -> Result<(), FormulationError> {
        let lines = network.line_ids();
        let mut ids = HashSet::new();
        for c in &self.scenarios {
            if c.id == super::PRE_CONTINGENCY {
                return Err(FormulationError::BadContingency(
                    "scenario id 0 is reserved for the pre-contingency state".into(),
                ));
            }
            if !ids.insert(c.id) {
                return Err(FormulationError::BadContingency(format!(
                    "duplicate scenario id {}",
                    c.id
                )));
            }
            if let Some(&line) = c.outaged_lines.iter().find(|l| !lines.contains(l)) {
                return Err(FormulationError::UnknownContingencyLine { scenario: c.id, line });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ContingencyPolicy {
    /// One single-line outage per line that is not a bridge, ordered by line id.
    AllNonBridge,
    Explicit(Vec<Contingency>),
}

pub fn build_contingency_set(
    network: &Network,
    policy: ContingencyPolicy,
) -> Result<ContingencySet, FormulationError> {
    let set = match policy {
        ContingencyPolicy::AllNonBridge => {
            let bridges = network.find_bridges();
            let mut candidates: Vec<LineId> = network
                .lines
                .iter()
                .map(|l| l.id)
                .filter(|id| !bridges.contains(id))
                .collect();
            candidates.sort_unstable();
            ContingencySet {
                scenarios: candidates
                    .into_iter()
                    .enumerate()
                    .map(|(i, line)| Contingency {
                        id: (i + 1) as ScenarioId,
                        outaged_lines: BTreeSet::from([line]),
                    })
                    .collect(),
            }
        }
        ContingencyPolicy::Explicit(scenarios) => ContingencySet { scenarios },
    };
    set.validate(network)?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tri3;

    #[test]
    fn triangle_has_one_scenario_per_line() {
        let set = build_contingency_set(&tri3(), ContingencyPolicy::AllNonBridge).unwrap();
        assert_eq!(set.len(), 3);
        let outaged: Vec<_> = set.scenarios.iter().map(|c| c.outaged_lines.clone()).collect();
        assert_eq!(
            outaged,
            vec![BTreeSet::from([1]), BTreeSet::from([2]), BTreeSet::from([3])]
        );
        assert_eq!(set.scenarios[0].id, 1);
    }

    #[test]
    fn path_has_no_scenarios() {
        let mut net = tri3();
        net.lines.retain(|l| l.id != 2);
        let set = build_contingency_set(&net, ContingencyPolicy::AllNonBridge).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn explicit_sets_are_checked() {
        let bad = vec![Contingency {
            id: 1,
            outaged_lines: BTreeSet::from([42]),
        }];
        assert_eq!(
            build_contingency_set(&tri3(), ContingencyPolicy::Explicit(bad)),
            Err(FormulationError::UnknownContingencyLine { scenario: 1, line: 42 })
        );
        let zero = vec![Contingency {
            id: 0,
            outaged_lines: BTreeSet::from([1]),
        }];
        assert!(build_contingency_set(&tri3(), ContingencyPolicy::Explicit(zero)).is_err());
        let ok = vec![Contingency {
            id: 7,
            outaged_lines: BTreeSet::from([1, 3]),
        }];
        assert_eq!(
            build_contingency_set(&tri3(), ContingencyPolicy::Explicit(ok.clone()))
                .unwrap()
                .scenarios,
            ok
        );
    }
}
