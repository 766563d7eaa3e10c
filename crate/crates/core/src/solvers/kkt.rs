//! Implicit differentiation of a QP minimizer through its active-set KKT system.
//!
//! With active rows `A` (equalities plus inequalities and bounds whose
//! multiplier exceeds [`ACTIVE_DUAL_TOL`]) the adjoint system is
//! `2 rho w + A^T v = g`, `A w = 0`. Eliminating `w` leaves the Schur
//! complement `(A A^T) v = A g`, solved by Cholesky.

use alloc::vec;
use alloc::vec::Vec;

use super::{QpInstance, QpSolution};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, Matrix};

pub const ACTIVE_DUAL_TOL: f64 = 1e-8;

/// Gradients of a scalar loss with respect to the QP data.
#[derive(Debug, Clone, PartialEq)]
pub struct QpGradient {
    pub xi: Vec<f64>,
    pub ineq_rhs: Vec<f64>,
    pub eq_rhs: Vec<f64>,
}

enum Row {
    Ineq(usize),
    Eq(usize),
    Bound(usize),
}

/// Backpropagates `upstream = dL/dx*` to the linear cost and right-hand sides.
pub fn qp_backward(inst: &QpInstance, sol: &QpSolution, upstream: &[f64]) -> Result<QpGradient> {
    let lp = &inst.lp;
    let n = lp.num_vars();
    if upstream.len() != n {
        return Err(Error::Dimension {
            context: "QP upstream gradient",
            expected: n,
            found: upstream.len(),
        });
    }
    if upstream.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("QP upstream gradient"));
    }
    let mut rows = Vec::new();
    for i in 0..lp.eq.rows() {
        rows.push(Row::Eq(i));
    }
    for (i, l) in sol.ineq_dual.iter().enumerate() {
        if *l >= ACTIVE_DUAL_TOL {
            rows.push(Row::Ineq(i));
        }
    }
    for j in 0..n {
        if sol.lower_dual[j] >= ACTIVE_DUAL_TOL || sol.upper_dual[j] >= ACTIVE_DUAL_TOL {
            rows.push(Row::Bound(j));
        }
    }
    // Equality rows that are linear combinations of others carry no information.
    let row_vec = |r: &Row| -> Vec<f64> {
        match *r {
            Row::Ineq(i) => lp.ineq.row(i).to_vec(),
            Row::Eq(i) => lp.eq.row(i).to_vec(),
            Row::Bound(j) => {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            }
        }
    };
    let mut kept: Vec<(Row, Vec<f64>)> = Vec::new();
    for r in rows {
        let v = row_vec(&r);
        if matches!(r, Row::Eq(_)) && in_span(&kept, &v) {
            continue;
        }
        kept.push((r, v));
    }
    let m = kept.len();
    let g = 2.0 * inst.rho;
    let mut v = vec![0.0; m];
    if m > 0 {
        let mut gram = Matrix::zeros(m, m);
        for a in 0..m {
            for b in 0..=a {
                let val = dot(&kept[a].1, &kept[b].1);
                gram[(a, b)] = val;
                gram[(b, a)] = val;
            }
        }
        let rhs: Vec<f64> = kept.iter().map(|(_, r)| dot(r, upstream)).collect();
        let l = cholesky(&gram)?;
        v = cholesky_solve(&l, &rhs);
    }
    let mut w = upstream.to_vec();
    for ((_, r), vi) in kept.iter().zip(&v) {
        crate::linalg::axpy(-vi, r, &mut w);
    }
    let mut grad = QpGradient {
        xi: w.iter().map(|wi| -wi / g).collect(),
        ineq_rhs: vec![0.0; lp.ineq.rows()],
        eq_rhs: vec![0.0; lp.eq.rows()],
    };
    for ((row, _), vi) in kept.iter().zip(&v) {
        match *row {
            Row::Ineq(i) => grad.ineq_rhs[i] = *vi,
            Row::Eq(i) => grad.eq_rhs[i] = *vi,
            Row::Bound(_) => {}
        }
    }
    Ok(grad)
}

/// Whether `v` lies in the span of the kept rows (Gram-Schmidt residual test).
fn in_span<R>(kept: &[(R, Vec<f64>)], v: &[f64]) -> bool {
    if kept.is_empty() {
        return v.iter().all(|x| *x == 0.0);
    }
    let m = kept.len();
    let mut gram = Matrix::zeros(m, m);
    for a in 0..m {
        for b in 0..=a {
            let val = dot(&kept[a].1, &kept[b].1);
            gram[(a, b)] = val;
            gram[(b, a)] = val;
        }
    }
    let Ok(l) = cholesky(&gram) else {
        return false;
    };
    let rhs: Vec<f64> = kept.iter().map(|(_, r)| dot(r, v)).collect();
    let coef = cholesky_solve(&l, &rhs);
    let mut resid = v.to_vec();
    for ((_, r), c) in kept.iter().zip(&coef) {
        crate::linalg::axpy(-c, r, &mut resid);
    }
    dot(&resid, &resid) <= 1e-18 * dot(v, v).max(1.0)
}
