//! Mixed-integer linear program representation.
//!
//! A [`Problem`] is always stored as a minimization. Maximization inputs are
//! negated when built (or read) and [`Problem::maximize`] records the original
//! sense so reported objectives can be flipped back.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// `a x <= b`
    Le,
    /// `a x >= b`
    Ge,
    /// `a x = b`
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sparse row as `(var_index, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(name: impl Into<String>, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self { name: name.into(), coeffs, relation, rhs }
    }

    /// Largest absolute coefficient in the row, `0.0` for an empty row.
    pub fn inf_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &(_, a)| acc.max(a.abs()))
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// An immutable MILP instance in minimization form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub var_names: Vec<String>,
    /// Minimization objective, one coefficient per variable.
    pub objective: Vec<f64>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    pub is_integer: Vec<bool>,
    pub constraints: Vec<Constraint>,
    /// The instance was a maximization; `objective` holds the negated coefficients.
    pub maximize: bool,
}

impl Problem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_cons(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.coeffs.len()).sum()
    }

    /// Minimization objective value of `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Converts an internal (minimization) objective value back to the sense
    /// the instance was stated in.
    pub fn reported_objective(&self, internal: f64) -> f64 {
        if self.maximize {
            -internal
        } else {
            internal
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LengthMismatch { field: &'static str, expected: usize, found: usize },
    IndexOutOfRange { row: usize, var_index: usize },
    DuplicateIndex { row: usize, var_index: usize },
    BoundInversion { var: usize, lower: f64, upper: f64 },
    NanBound { var: usize },
    NonFiniteCoefficient { location: CoefficientLocation },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientLocation {
    Objective { var: usize },
    Row { row: usize, var_index: usize },
    Rhs { row: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { field, expected, found } => {
                write!(f, "length mismatch: {field} has {found} entries, expected {expected}")
            }
            Violation::IndexOutOfRange { row, var_index } => {
                write!(f, "index out of range: row {row} references variable {var_index}")
            }
            Violation::DuplicateIndex { row, var_index } => {
                write!(f, "duplicate index: row {row} lists variable {var_index} twice")
            }
            Violation::BoundInversion { var, lower, upper } => {
                write!(f, "bound inversion: variable {var} has lower {lower} > upper {upper}")
            }
            Violation::NanBound { var } => write!(f, "NaN bound on variable {var}"),
            Violation::NonFiniteCoefficient { location } => {
                write!(f, "non-finite coefficient at {location:?}")
            }
        }
    }
}

/// Outcome of [`validate`]: empty means the problem is well formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of `problem` and lists all violations.
pub fn validate(problem: &Problem) -> ValidationReport {
    let mut violations = Vec::new();
    let n = problem.num_vars();
    for (field, len) in [
        ("var_names", problem.var_names.len()),
        ("var_lower", problem.var_lower.len()),
        ("var_upper", problem.var_upper.len()),
        ("is_integer", problem.is_integer.len()),
    ] {
        if len != n {
            violations.push(Violation::LengthMismatch { field, expected: n, found: len });
        }
    }

    for (var, c) in problem.objective.iter().enumerate() {
        if !c.is_finite() {
            violations.push(Violation::NonFiniteCoefficient {
                location: CoefficientLocation::Objective { var },
            });
        }
    }

    for (var, (&lo, &up)) in problem.var_lower.iter().zip(&problem.var_upper).enumerate() {
        if lo.is_nan() || up.is_nan() {
            violations.push(Violation::NanBound { var });
        } else if lo > up {
            violations.push(Violation::BoundInversion { var, lower: lo, upper: up });
        }
    }

    let mut seen = vec![usize::MAX; n];
    for (row, con) in problem.constraints.iter().enumerate() {
        if !con.rhs.is_finite() {
            violations.push(Violation::NonFiniteCoefficient { location: CoefficientLocation::Rhs { row } });
        }
        for &(var_index, a) in &con.coeffs {
            if var_index >= n {
                violations.push(Violation::IndexOutOfRange { row, var_index });
                continue;
            }
            if seen[var_index] == row {
                violations.push(Violation::DuplicateIndex { row, var_index });
            }
            seen[var_index] = row;
            if !a.is_finite() {
                violations.push(Violation::NonFiniteCoefficient {
                    location: CoefficientLocation::Row { row, var_index },
                });
            }
        }
    }

    ValidationReport { violations }
}

/// Incremental construction of a [`Problem`].
///
/// Variables get default names `x0, x1, ...` unless named explicitly.
#[derive(Debug, Clone, Default)]
pub struct ProblemBuilder {
    problem: Problem,
}

impl Default for Problem {
    fn default() -> Self {
        Self {
            name: String::new(),
            var_names: Vec::new(),
            objective: Vec::new(),
            var_lower: Vec::new(),
            var_upper: Vec::new(),
            is_integer: Vec::new(),
            constraints: Vec::new(),
            maximize: false,
        }
    }
}

impl ProblemBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self { problem: Problem { name: name.into(), ..Problem::default() } }
    }

    /// Declares the objective coefficients as a maximization; they are negated
    /// on [`build`](Self::build).
    pub fn maximize(mut self) -> Self {
        self.problem.maximize = true;
        self
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64, integer: bool) -> usize {
        let j = self.problem.num_vars();
        self.add_named_var(format!("x{j}"), cost, lower, upper, integer)
    }

    pub fn add_binary(&mut self, cost: f64) -> usize {
        self.add_var(cost, 0.0, 1.0, true)
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64, integer: bool) -> usize {
        let p = &mut self.problem;
        p.var_names.push(name.into());
        p.objective.push(cost);
        p.var_lower.push(lower);
        p.var_upper.push(upper);
        p.is_integer.push(integer);
        p.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        let i = self.problem.num_cons();
        self.problem.constraints.push(Constraint::new(format!("c{i}"), coeffs, relation, rhs));
        i
    }

    pub fn build(mut self) -> Problem {
        if self.problem.maximize {
            for c in &mut self.problem.objective {
                *c = -*c;
            }
        }
        self.problem
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_problem_is_valid() {
        assert!(Problem::default().validate().is_ok());
    }

    #[test]
    fn out_of_range_index_is_reported() {
        let mut b = ProblemBuilder::new("t");
        b.add_binary(1.0);
        b.add_constraint(vec![(1, 1.0)], Relation::Le, 1.0);
        let report = b.build().validate();
        assert_eq!(report.violations, vec![Violation::IndexOutOfRange { row: 0, var_index: 1 }]);
        assert!(report.to_string().contains("index out of range"));
    }

    #[test]
    fn bound_inversion_is_reported() {
        let mut b = ProblemBuilder::new("t");
        b.add_var(0.0, 2.0, 1.0, false);
        let report = b.build().validate();
        assert!(report.to_string().contains("bound inversion"));
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn every_violation_is_listed() {
        let mut b = ProblemBuilder::new("t");
        b.add_var(f64::NAN, 2.0, 1.0, false);
        b.add_constraint(vec![(0, 1.0), (0, 2.0), (5, 1.0)], Relation::Ge, f64::INFINITY);
        let report = b.build().validate();
        assert_eq!(report.violations.len(), 5, "{report}");
        assert_eq!(validate(&Problem::default()), validate(&Problem::default()));
    }

    #[test]
    fn maximize_negates_objective() {
        let mut b = ProblemBuilder::new("t").maximize();
        b.add_binary(5.0);
        let p = b.build();
        assert_eq!(p.objective, vec![-5.0]);
        assert_eq!(p.reported_objective(-5.0), 5.0);
    }
}
