//! Dense LP, MILP and strongly convex QP solvers plus the implicit KKT
//! backward pass that differentiates a QP minimizer with respect to its data.

mod kkt;
mod lp;
mod milp;
mod qp;
mod text;

use alloc::vec::Vec;

pub use kkt::{qp_backward, QpGradient};
pub use lp::{solve_lp, LpOutcome, LpSolution};
pub use milp::{solve_milp, solve_milp_with, BranchRecord, MilpOptions, MilpSolution};
pub use qp::{solve_qp, ActiveConstraint, QpSolution};
pub use kkt::ACTIVE_DUAL_TOL;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `min c^T x + offset` subject to `H x <= a`, `E x = b`, `lower <= x <= upper`.
/// Bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub ineq: Matrix,
    pub ineq_rhs: Vec<f64>,
    pub eq: Matrix,
    pub eq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// An unconstrained program over `n` nonnegative variables.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            objective_offset: 0.0,
            ineq: Matrix::zeros(0, n),
            ineq_rhs: Vec::new(),
            eq: Matrix::zeros(0, n),
            eq_rhs: Vec::new(),
            lower: alloc::vec![0.0; n],
            upper: alloc::vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_ineq(&mut self, row: &[f64], rhs: f64) -> Result<()> {
        self.ineq.push_row(row)?;
        self.ineq_rhs.push(rhs);
        Ok(())
    }

    pub fn add_eq(&mut self, row: &[f64], rhs: f64) -> Result<()> {
        self.eq.push_row(row)?;
        self.eq_rhs.push(rhs);
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.objective, x) + self.objective_offset
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let mut dims = alloc::vec![
            ("inequality rhs", self.ineq_rhs.len(), self.ineq.rows()),
            ("equality rhs", self.eq_rhs.len(), self.eq.rows()),
            ("lower bounds", self.lower.len(), n),
            ("upper bounds", self.upper.len(), n),
        ];
        if self.ineq.rows() > 0 {
            dims.push(("inequality columns", self.ineq.cols(), n));
        }
        if self.eq.rows() > 0 {
            dims.push(("equality columns", self.eq.cols(), n));
        }
        for (context, found, expected) in dims {
            if found != expected {
                return Err(Error::Dimension {
                    context,
                    expected,
                    found,
                });
            }
        }
        let finite = self
            .objective
            .iter()
            .chain(self.ineq.as_slice())
            .chain(self.eq.as_slice())
            .chain(&self.ineq_rhs)
            .chain(&self.eq_rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("linear program coefficients"));
        }
        for (j, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                return Err(Error::contract(alloc::format!("invalid bounds on variable {j}")));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (i, rhs) in self.ineq_rhs.iter().enumerate() {
            worst = worst.max(crate::linalg::dot(self.ineq.row(i), x) - rhs);
        }
        for (i, rhs) in self.eq_rhs.iter().enumerate() {
            worst = worst.max((crate::linalg::dot(self.eq.row(i), x) - rhs).abs());
        }
        for ((v, l), u) in x.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }
}

/// A linear program with an integrality mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    pub lp: LinearProgram,
    pub integer: Vec<bool>,
}

impl MilpInstance {
    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        if self.integer.len() != self.lp.num_vars() {
            return Err(Error::Dimension {
                context: "integrality mask",
                expected: self.lp.num_vars(),
                found: self.integer.len(),
            });
        }
        Ok(())
    }

    /// The strongly convex relaxation `min xi^T x + rho ||x||^2` over the same
    /// constraints with integrality dropped.
    pub fn relax(&self, rho: f64) -> QpInstance {
        QpInstance {
            lp: self.lp.clone(),
            rho,
        }
    }
}

/// `min xi^T x + rho ||x||^2` over the constraints of `lp`; `xi` is `lp.objective`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    pub lp: LinearProgram,
    pub rho: f64,
}

impl QpInstance {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.lp.value(x) + self.rho * crate::linalg::dot(x, x)
    }
}
