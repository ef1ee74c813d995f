//! Dense linear programming.
//!
//! Every variable is implicitly nonnegative. Upper bounds are written as
//! explicit rows. The programs built by the allocation solvers have a few
//! dozen variables, so [`solve`] keeps a dense tableau. Rows and columns
//! are rescaled by powers of two first, pricing is by largest reduced cost,
//! and a long degenerate stretch switches to Bland's rule, so every run
//! terminates and reproduces exactly.

mod oracle;
mod simplex;
mod text;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

pub use oracle::vertex_enumeration;
pub use simplex::solve;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Eq => Relation::Eq,
            Relation::Ge => Relation::Le,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = dot(&self.coeffs, x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Magnitude used to make feasibility checks relative.
    pub fn scale(&self, x: &[f64]) -> f64 {
        1.0 + self.rhs.abs()
            + self
                .coeffs
                .iter()
                .zip(x)
                .map(|(a, v)| (a * v).abs())
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        Self {
            sense,
            objective,
            rows: Vec::new(),
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.rows.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    /// Adds a row given as `(variable, coefficient)` pairs; repeated
    /// variables accumulate.
    pub fn add_sparse_row(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.n_vars()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.add_row(coeffs, relation, rhs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(param("objective has a non-finite coefficient"));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(param(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(param(format!("row {i} has a non-finite entry")));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest row violation of `x`, each divided by its row scale.
    pub fn max_relative_violation(&self, x: &[f64]) -> f64 {
        let bounds = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        self.rows
            .iter()
            .map(|r| r.violation(x) / r.scale(x))
            .fold(bounds, f64::max)
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.n_vars() && self.max_relative_violation(x) <= tol
    }

    /// Plain-text dump: one objective line followed by one line per row.
    /// [`LinearProgram::from_text`] reads it back exactly.
    pub fn to_text(&self) -> String {
        text::render(self)
    }

    pub fn from_text(src: &str) -> Result<Self> {
        text::parse(src)
    }

    /// Dual of a maximization whose rows are all `<=`: minimize `b'u`
    /// subject to `A'u >= c`, `u >= 0`, with one dual variable per row.
    pub fn dual(&self) -> Result<LinearProgram> {
        self.validate()?;
        if self.sense != Sense::Maximize || self.rows.iter().any(|r| r.relation != Relation::Le) {
            return Err(param("dual is only built for maximizations with <= rows"));
        }
        let mut dual = LinearProgram::minimize(self.rows.iter().map(|r| r.rhs).collect());
        for (j, &c) in self.objective.iter().enumerate() {
            dual.add_row(self.rows.iter().map(|r| r.coeffs[j]).collect(), Relation::Ge, c);
        }
        Ok(dual)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub pivot: f64,
    pub max_pivots: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-9,
            pivot: 1e-12,
            max_pivots: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// No admissible pivot, a pivot limit, or a post-solve feasibility
    /// check failed. Distinct from a proven infeasibility.
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    pub pivots: usize,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, pivots: usize) -> Self {
        Self {
            status,
            x: None,
            objective_value: None,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Point and value of an optimal solution, or an error tagged with `stage`.
    pub fn into_optimal(self, stage: &'static str) -> Result<(Vec<f64>, f64)> {
        match (self.status, self.x, self.objective_value) {
            (LpStatus::Optimal, Some(x), Some(v)) => Ok((x, v)),
            (status, _, _) => Err(crate::Error::Lp { stage, status }),
        }
    }
}

/// An LP whose quantities were divided by `value_unit` before it was built,
/// so the coefficients stay near one. Multiply the LP objective by
/// `value_unit` to get back to the caller's units.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledProgram {
    pub lp: LinearProgram,
    pub value_unit: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
