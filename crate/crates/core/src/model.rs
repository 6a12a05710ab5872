//! Solver-agnostic MILP: named variables, tagged linear rows and a
//! maximization objective.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::fixed::Fixed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// `None` means unbounded.
    pub lower: Option<Fixed>,
    pub upper: Option<Fixed>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub tag: String,
    /// (coefficient, variable index); merged and free of zeros.
    pub terms: Vec<(Fixed, usize)>,
    pub sense: Sense,
    pub rhs: Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("constraint tag `{0}` used twice")]
    DuplicateTag(String),
    #[error("constraint `{0}` has no nonzero terms")]
    EmptyConstraint(String),
}

/// A maximization MILP.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelIr {
    variables: Vec<Variable>,
    index: HashMap<String, usize>,
    constraints: Vec<Constraint>,
    tags: HashMap<String, usize>,
    objective: Vec<(Fixed, usize)>,
}

fn merge_terms(terms: impl IntoIterator<Item = (Fixed, usize)>) -> Vec<(Fixed, usize)> {
    let mut merged: Vec<(Fixed, usize)> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for (c, v) in terms {
        match slot.get(&v) {
            Some(&i) => merged[i].0 += c,
            None => {
                slot.insert(v, merged.len());
                merged.push((c, v));
            }
        }
    }
    merged.retain(|(c, _)| !c.is_zero());
    merged
}

impl ModelIr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(Fixed, usize)] {
        &self.objective
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn constraint(&self, tag: &str) -> Option<&Constraint> {
        self.tags.get(tag).map(|&i| &self.constraints[i])
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: Option<Fixed>,
        upper: Option<Fixed>,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(ModelError::DuplicateVariable(name));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (Some(Fixed::ZERO), Some(Fixed::ONE)),
            VarKind::Continuous => (lower, upper),
        };
        let id = self.variables.len();
        self.index.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        Ok(id)
    }

    /// Returns the existing variable of that name or declares it.
    pub fn ensure_var(
        &mut self,
        name: &str,
        kind: VarKind,
        lower: Option<Fixed>,
        upper: Option<Fixed>,
    ) -> usize {
        match self.var(name) {
            Some(id) => id,
            None => self.add_var(name, kind, lower, upper).expect("name is fresh"),
        }
    }

    pub fn bounds(&self, var: usize) -> (Option<Fixed>, Option<Fixed>) {
        let v = &self.variables[var];
        (v.lower, v.upper)
    }

    /// Ignored for binaries, whose bounds stay {0, 1}.
    pub fn set_bounds(&mut self, var: usize, lower: Option<Fixed>, upper: Option<Fixed>) {
        let v = &mut self.variables[var];
        if v.kind == VarKind::Continuous {
            v.lower = lower;
            v.upper = upper;
        }
    }

    pub fn set_binary(&mut self, var: usize) {
        let v = &mut self.variables[var];
        v.kind = VarKind::Binary;
        v.lower = Some(Fixed::ZERO);
        v.upper = Some(Fixed::ONE);
    }

    pub fn add_constraint(
        &mut self,
        tag: impl Into<String>,
        terms: impl IntoIterator<Item = (Fixed, usize)>,
        sense: Sense,
        rhs: Fixed,
    ) -> Result<usize, ModelError> {
        let tag = tag.into();
        if self.tags.contains_key(&tag) {
            return Err(ModelError::DuplicateTag(tag));
        }
        let terms = merge_terms(terms);
        if terms.is_empty() {
            return Err(ModelError::EmptyConstraint(tag));
        }
        for &(_, v) in &terms {
            assert!(v < self.variables.len(), "term references undeclared variable {v}");
        }
        let id = self.constraints.len();
        self.tags.insert(tag.clone(), id);
        self.constraints.push(Constraint {
            tag,
            terms,
            sense,
            rhs,
        });
        Ok(id)
    }

    pub fn add_objective_terms(&mut self, terms: impl IntoIterator<Item = (Fixed, usize)>) {
        let all = std::mem::take(&mut self.objective).into_iter().chain(terms);
        self.objective = merge_terms(all);
    }

    pub fn binaries(&self) -> impl Iterator<Item = &Variable> {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(c, v)| c.to_f64() * values[v]).sum()
    }

    /// Rows, bounds and integrality requirements violated by `values` by more
    /// than `tol`.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (var, &x) in self.variables.iter().zip(values) {
            if var.lower.is_some_and(|l| x < l.to_f64() - tol) || var.upper.is_some_and(|u| x > u.to_f64() + tol) {
                out.push(format!("{} = {x} outside bounds", var.name));
            }
            if var.kind == VarKind::Binary && (x - x.round()).abs() > tol {
                out.push(format!("{} = {x} not integral", var.name));
            }
        }
        for row in &self.constraints {
            let lhs: f64 = row.terms.iter().map(|&(c, v)| c.to_f64() * values[v]).sum();
            let rhs = row.rhs.to_f64();
            let bad = match row.sense {
                Sense::Le => lhs > rhs + tol,
                Sense::Ge => lhs < rhs - tol,
                Sense::Eq => (lhs - rhs).abs() > tol,
            };
            if bad {
                out.push(format!("{}: {lhs} {} {rhs}", row.tag, row.sense));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_merge_and_zeros_drop() {
        let mut m = ModelIr::new();
        let x = m.add_var("x", VarKind::Continuous, Some(Fixed::ZERO), None).unwrap();
        let y = m.add_var("y", VarKind::Binary, None, None).unwrap();
        m.add_constraint("r", [(Fixed::ONE, x), (Fixed::ONE, y), (-Fixed::ONE, y)], Sense::Le, Fixed::ONE)
            .unwrap();
        assert_eq!(m.constraints()[0].terms, vec![(Fixed::ONE, x)]);
        assert_eq!(m.variables()[y].upper, Some(Fixed::ONE));
    }

    #[test]
    fn duplicates_and_empty_rows_rejected() {
        let mut m = ModelIr::new();
        let x = m.add_var("x", VarKind::Continuous, None, None).unwrap();
        assert!(m.add_var("x", VarKind::Continuous, None, None).is_err());
        m.add_constraint("r", [(Fixed::ONE, x)], Sense::Eq, Fixed::ZERO).unwrap();
        assert_eq!(
            m.add_constraint("r", [(Fixed::ONE, x)], Sense::Eq, Fixed::ZERO),
            Err(ModelError::DuplicateTag("r".into()))
        );
        assert_eq!(
            m.add_constraint("s", [(Fixed::ONE, x), (-Fixed::ONE, x)], Sense::Eq, Fixed::ZERO),
            Err(ModelError::EmptyConstraint("s".into()))
        );
    }

    #[test]
    fn violation_report() {
        let mut m = ModelIr::new();
        let x = m.add_var("x", VarKind::Binary, None, None).unwrap();
        m.add_constraint("r", [(Fixed::ONE, x)], Sense::Ge, Fixed::ONE).unwrap();
        assert!(m.violations(&[1.0], 1e-6).is_empty());
        assert_eq!(m.violations(&[0.5], 1e-6).len(), 2);
    }
}
