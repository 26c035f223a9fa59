//! Solver-agnostic MILP representation, MPS output and an independent
//! feasibility auditor.

mod model;
mod mps;

pub use model::{canonicalize, Assignment, Domain, LinearConstraint, MilpModel, Sense, VarId, Variable};
pub use mps::{demangle_name, mangle_name, write_mps};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("variable `{name}` has invalid bounds [{lower}, {upper}]")]
    BadBounds { name: String, lower: f64, upper: f64 },
    #[error("unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("assignment has {got} values, model has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Constraint { index: usize, tag: String, amount: f64 },
    Bound { variable: String, value: f64, amount: f64 },
    Integrality { variable: String, value: f64, amount: f64 },
}

impl Violation {
    pub fn amount(&self) -> f64 {
        match self {
            Violation::Constraint { amount, .. }
            | Violation::Bound { amount, .. }
            | Violation::Integrality { amount, .. } => *amount,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub objective: f64,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Tags of violated constraints, in constraint order.
    pub fn violated_tags(&self) -> Vec<&str> {
        self.violations
            .iter()
            .filter_map(|v| match v {
                Violation::Constraint { tag, .. } => Some(tag.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations.iter().map(Violation::amount).fold(0.0, f64::max)
    }
}

/// Checks every constraint, bound and integrality requirement of `model`
/// against `assignment` at absolute tolerance `tol`.
pub fn audit(model: &MilpModel, assignment: &Assignment, tol: f64) -> Result<AuditReport, MilpError> {
    let values = &assignment.values;
    if values.len() != model.num_vars() {
        return Err(MilpError::AssignmentLength {
            expected: model.num_vars(),
            got: values.len(),
        });
    }
    let mut violations = Vec::new();
    for (var, &value) in model.variables().iter().zip(values) {
        let (lower, upper) = var.domain.bounds();
        let amount = if value.is_nan() {
            f64::INFINITY
        } else {
            (lower - value).max(value - upper).max(0.0)
        };
        if amount > tol {
            violations.push(Violation::Bound {
                variable: var.name.clone(),
                value,
                amount,
            });
        }
        if var.domain.is_binary() {
            let amount = (value - value.round()).abs();
            if amount > tol {
                violations.push(Violation::Integrality {
                    variable: var.name.clone(),
                    value,
                    amount,
                });
            }
        }
    }
    for (index, c) in model.constraints().iter().enumerate() {
        let amount = c.violation(values);
        if amount > tol || amount.is_nan() {
            violations.push(Violation::Constraint {
                index,
                tag: c.tag.clone(),
                amount,
            });
        }
    }
    Ok(AuditReport {
        objective: model.objective_value(values),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (MilpModel, VarId) {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        m.add_constraint("x_lb", [(1.0, x)], Sense::Ge, 1.0).unwrap();
        m.set_objective([(1.0, x)]).unwrap();
        (m, x)
    }

    #[test]
    fn zeros_violate_lower_row_by_one() {
        let (m, _) = tiny();
        let report = audit(&m, &Assignment::zeros(1), 1e-9).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violated_tags(), vec!["x_lb"]);
        assert!((report.max_violation() - 1.0).abs() < 1e-15);
        assert_eq!(report.objective, 0.0);
    }

    #[test]
    fn feasible_point_is_clean() {
        let (m, _) = tiny();
        let report = audit(&m, &Assignment { values: vec![1.0] }, 1e-9).unwrap();
        assert!(report.is_clean());
        assert_eq!(report.objective, 1.0);
    }

    #[test]
    fn binaries_and_bounds_are_checked() {
        let mut m = MilpModel::new();
        m.add_binary("z").unwrap();
        m.add_continuous("y", -1.0, 1.0).unwrap();
        let report = audit(&m, &Assignment { values: vec![0.5, 3.0] }, 1e-6).unwrap();
        assert_eq!(report.violations.len(), 2);
        assert!(matches!(report.violations[0], Violation::Integrality { .. }));
        assert!(matches!(report.violations[1], Violation::Bound { .. }));
    }

    #[test]
    fn wrong_length_is_an_error() {
        let (m, _) = tiny();
        assert!(matches!(
            audit(&m, &Assignment::zeros(3), 1e-6),
            Err(MilpError::AssignmentLength { expected: 1, got: 3 })
        ));
    }

    #[test]
    fn canonicalization_merges_and_drops() {
        let mut m = MilpModel::new();
        let a = m.add_continuous("a", 0.0, 1.0).unwrap();
        let b = m.add_continuous("b", 0.0, 1.0).unwrap();
        m.add_constraint("t", [(1.0, b), (2.0, a), (-1.0, b), (0.5, a)], Sense::Le, 1.0)
            .unwrap();
        assert_eq!(m.constraints()[0].terms, vec![(2.5, a)]);
    }

    #[test]
    fn relaxation_keeps_rows_and_objective() {
        let mut m = MilpModel::new();
        let z = m.add_binary("z").unwrap();
        let x = m.add_continuous("x", 0.0, 4.0).unwrap();
        m.add_constraint("c", [(1.0, x), (-4.0, z)], Sense::Le, 0.0).unwrap();
        m.set_objective([(1.0, z)]).unwrap();
        let r = m.relax_integrality();
        assert!(!r.has_binaries());
        assert_eq!(r.constraints(), m.constraints());
        assert_eq!(r.objective(), m.objective());
        assert_eq!(r.var(z).domain, Domain::Continuous { lower: 0.0, upper: 1.0 });
        assert!(m.var(z).domain.is_binary());

        let mut plain = MilpModel::new();
        plain.add_continuous("x", 0.0, 1.0).unwrap();
        assert_eq!(plain.relax_integrality(), plain);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut m = MilpModel::new();
        m.add_binary("z").unwrap();
        assert_eq!(m.add_binary("z"), Err(MilpError::DuplicateName("z".into())));
        assert!(m.add_continuous("w", 2.0, 1.0).is_err());
    }
}
