use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MilpError;

/// Dense index of a variable within its model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Continuous { lower: f64, upper: f64 },
    Binary,
}

impl Domain {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Domain::Continuous { lower, upper } => (lower, upper),
            Domain::Binary => (0.0, 1.0),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Domain::Binary)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub domain: Domain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

/// `Σ coef · var  (sense)  rhs`, labelled with the equation it encodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<(f64, VarId)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: String,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(c, v)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Merges repeated variables and drops zero coefficients; terms come back
/// sorted by variable index.
pub fn canonicalize(terms: impl IntoIterator<Item = (f64, VarId)>) -> Vec<(f64, VarId)> {
    let mut terms: Vec<(f64, VarId)> = terms.into_iter().collect();
    terms.sort_by_key(|t| t.1);
    let mut out: Vec<(f64, VarId)> = Vec::with_capacity(terms.len());
    for (coef, var) in terms {
        match out.last_mut() {
            Some(last) if last.1 == var => last.0 += coef,
            _ => out.push((coef, var)),
        }
    }
    out.retain(|t| t.0 != 0.0);
    out
}

/// A minimization problem over continuous and binary variables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    objective: Vec<(f64, VarId)>,
    #[serde(skip)]
    names: HashMap<String, VarId>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(f64, VarId)] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        if self.names.len() == self.variables.len() {
            return self.names.get(name).copied();
        }
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.domain.is_binary())
            .map(|(i, _)| VarId(i))
    }

    pub fn add_variable(&mut self, name: impl Into<String>, domain: Domain) -> Result<VarId, MilpError> {
        let name = name.into();
        if let Domain::Continuous { lower, upper } = domain {
            if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
                return Err(MilpError::BadBounds { name, lower, upper });
            }
        }
        if self.names.contains_key(&name) {
            return Err(MilpError::DuplicateName(name));
        }
        let id = VarId(self.variables.len());
        self.names.insert(name.clone(), id);
        self.variables.push(Variable { name, domain });
        Ok(id)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId, MilpError> {
        self.add_variable(name, Domain::Continuous { lower, upper })
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, MilpError> {
        self.add_variable(name, Domain::Binary)
    }

    fn check_terms(&self, terms: &[(f64, VarId)]) -> Result<(), MilpError> {
        for (coef, var) in terms {
            if var.0 >= self.variables.len() {
                return Err(MilpError::UnknownVariable(var.0));
            }
            if !coef.is_finite() {
                return Err(MilpError::NonFinite(self.variables[var.0].name.clone()));
            }
        }
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        tag: impl Into<String>,
        terms: impl IntoIterator<Item = (f64, VarId)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<(), MilpError> {
        let terms: Vec<(f64, VarId)> = terms.into_iter().collect();
        self.check_terms(&terms)?;
        let tag = tag.into();
        if !rhs.is_finite() {
            return Err(MilpError::NonFinite(tag));
        }
        self.constraints.push(LinearConstraint {
            terms: canonicalize(terms),
            sense,
            rhs,
            tag,
        });
        Ok(())
    }

    /// Sets the (minimization) objective.
    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = (f64, VarId)>) -> Result<(), MilpError> {
        let terms: Vec<(f64, VarId)> = terms.into_iter().collect();
        self.check_terms(&terms)?;
        self.objective = canonicalize(terms);
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|(c, v)| c * values[v.0]).sum()
    }

    /// Copy with every binary replaced by a continuous `[0, 1]` variable.
    pub fn relax_integrality(&self) -> MilpModel {
        let mut relaxed = self.clone();
        for var in &mut relaxed.variables {
            if var.domain.is_binary() {
                var.domain = Domain::Continuous {
                    lower: 0.0,
                    upper: 1.0,
                };
            }
        }
        relaxed
    }

    /// Copy with the given variables fixed (bounds collapsed to the value).
    pub fn with_fixed(&self, fixings: &[(VarId, f64)]) -> MilpModel {
        let mut model = self.clone();
        for &(var, value) in fixings {
            model.variables[var.0].domain = Domain::Continuous {
                lower: value,
                upper: value,
            };
        }
        model
    }

    pub fn has_binaries(&self) -> bool {
        self.variables.iter().any(|v| v.domain.is_binary())
    }

    /// Rebuilds the name index after deserialization.
    pub fn reindex(&mut self) {
        self.names = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), VarId(i)))
            .collect();
    }
}

/// Candidate values for every variable of a model, by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<f64>,
}

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn get(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}
