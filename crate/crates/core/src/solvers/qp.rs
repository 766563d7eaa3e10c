//! Goldfarb-Idnani dual active-set method for `min xi^T x + rho ||x||^2`.
//!
//! The Hessian is `2 rho I`, so the method starts from the unconstrained
//! minimizer `-xi / (2 rho)` and adds violated constraints one at a time,
//! keeping `J^T N = [R; 0]` current with Givens rotations. Equalities are
//! added first and never dropped. The final iterate is polished by solving
//! the KKT system on the active set.

use alloc::vec;
use alloc::vec::Vec;

use super::QpInstance;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, norm2, norm_inf, Matrix};

/// A constraint held with equality at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveConstraint {
    Ineq(usize),
    Eq(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers in the convention `2 rho x + xi + H^T lambda + E^T nu - mu_l + mu_u = 0`.
    pub ineq_dual: Vec<f64>,
    pub eq_dual: Vec<f64>,
    pub lower_dual: Vec<f64>,
    pub upper_dual: Vec<f64>,
    pub active: Vec<ActiveConstraint>,
    pub iterations: usize,
}

impl QpSolution {
    /// Largest entry of the stationarity residual.
    pub fn stationarity_residual(&self, inst: &QpInstance) -> f64 {
        let lp = &inst.lp;
        let mut r: Vec<f64> = self
            .x
            .iter()
            .zip(&lp.objective)
            .map(|(x, c)| 2.0 * inst.rho * x + c)
            .collect();
        for (i, l) in self.ineq_dual.iter().enumerate() {
            crate::linalg::axpy(*l, lp.ineq.row(i), &mut r);
        }
        for (i, v) in self.eq_dual.iter().enumerate() {
            crate::linalg::axpy(*v, lp.eq.row(i), &mut r);
        }
        for j in 0..r.len() {
            r[j] += self.upper_dual[j] - self.lower_dual[j];
        }
        norm_inf(&r)
    }
}

/// Constraint in the form `sign * row . x >= rhs`.
#[derive(Debug, Clone, Copy)]
struct Con {
    kind: ActiveConstraint,
    sign: f64,
    rhs: f64,
}

struct Problem<'a> {
    inst: &'a QpInstance,
    cons: Vec<Con>,
}

impl Problem<'_> {
    fn dot(&self, c: &Con, x: &[f64]) -> f64 {
        let lp = &self.inst.lp;
        c.sign
            * match c.kind {
                ActiveConstraint::Ineq(i) => dot(lp.ineq.row(i), x),
                ActiveConstraint::Eq(i) => dot(lp.eq.row(i), x),
                ActiveConstraint::Lower(j) | ActiveConstraint::Upper(j) => x[j],
            }
    }

    fn slack(&self, c: &Con, x: &[f64]) -> f64 {
        self.dot(c, x) - c.rhs
    }

    fn dense(&self, c: &Con) -> Vec<f64> {
        let lp = &self.inst.lp;
        let n = lp.num_vars();
        let mut v = match c.kind {
            ActiveConstraint::Ineq(i) => lp.ineq.row(i).to_vec(),
            ActiveConstraint::Eq(i) => lp.eq.row(i).to_vec(),
            ActiveConstraint::Lower(j) | ActiveConstraint::Upper(j) => {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            }
        };
        for e in v.iter_mut() {
            *e *= c.sign;
        }
        v
    }

    /// `J^T n` for constraint `c`.
    fn jt(&self, c: &Con, j: &Matrix) -> Vec<f64> {
        let n = j.rows();
        match c.kind {
            ActiveConstraint::Lower(k) | ActiveConstraint::Upper(k) => {
                j.row(k).iter().map(|v| c.sign * v).collect()
            }
            _ => {
                let normal = self.dense(c);
                let mut d = vec![0.0; n];
                for (i, &ni) in normal.iter().enumerate() {
                    if ni != 0.0 {
                        crate::linalg::axpy(ni, j.row(i), &mut d);
                    }
                }
                d
            }
        }
    }
}

fn tolerance(rhs: f64) -> f64 {
    1e-9 * rhs.abs().max(1.0)
}

pub fn solve_qp(inst: &QpInstance) -> Result<QpSolution> {
    let lp = &inst.lp;
    lp.validate()?;
    if !(inst.rho > 0.0 && inst.rho.is_finite()) {
        return Err(Error::contract("QP regularization must be positive"));
    }
    let n = lp.num_vars();
    let g = 2.0 * inst.rho;

    let mut cons = Vec::new();
    for i in 0..lp.eq.rows() {
        cons.push(Con {
            kind: ActiveConstraint::Eq(i),
            sign: 1.0,
            rhs: lp.eq_rhs[i],
        });
    }
    let n_eq = cons.len();
    for i in 0..lp.ineq.rows() {
        cons.push(Con {
            kind: ActiveConstraint::Ineq(i),
            sign: -1.0,
            rhs: -lp.ineq_rhs[i],
        });
    }
    for j in 0..n {
        if lp.lower[j].is_finite() {
            cons.push(Con {
                kind: ActiveConstraint::Lower(j),
                sign: 1.0,
                rhs: lp.lower[j],
            });
        }
        if lp.upper[j].is_finite() {
            cons.push(Con {
                kind: ActiveConstraint::Upper(j),
                sign: -1.0,
                rhs: -lp.upper[j],
            });
        }
    }
    let mut prob = Problem { inst, cons };

    let mut x: Vec<f64> = lp.objective.iter().map(|c| -c / g).collect();
    let mut jm = Matrix::zeros(n, n);
    let inv = 1.0 / libm::sqrt(g);
    for i in 0..n {
        jm[(i, i)] = inv;
    }
    let mut r = Matrix::zeros(n, n);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; prob.cons.len()];
    let mut next_eq = 0;
    let max_iter = 20 * (n + prob.cons.len()) + 100;
    let mut iterations = 0;

    'outer: loop {
        // Pick the next constraint to add.
        let p = if next_eq < n_eq {
            let p = next_eq;
            next_eq += 1;
            if prob.slack(&prob.cons[p], &x) > 0.0 {
                prob.cons[p].sign = -prob.cons[p].sign;
                prob.cons[p].rhs = -prob.cons[p].rhs;
            }
            p
        } else {
            let mut pick: Option<(usize, f64)> = None;
            for (k, c) in prob.cons.iter().enumerate().skip(n_eq) {
                if is_active[k] {
                    continue;
                }
                let s = prob.slack(c, &x);
                if s < -tolerance(c.rhs) && pick.is_none_or(|(_, best)| s < best) {
                    pick = Some((k, s));
                }
            }
            match pick {
                Some((k, _)) => k,
                None => break,
            }
        };
        let is_eq = p < n_eq;
        let mut s = prob.slack(&prob.cons[p], &x);
        let mut u_new = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::contract("QP iteration limit reached"));
            }
            let q = active.len();
            let mut d = prob.jt(&prob.cons[p], &jm);
            let mut z = vec![0.0; n];
            for i in 0..n {
                z[i] = dot(&jm.row(i)[q..], &d[q..]);
            }
            let mut rdir = vec![0.0; q];
            for i in (0..q).rev() {
                let mut v = d[i];
                for k in i + 1..q {
                    v -= r[(i, k)] * rdir[k];
                }
                rdir[i] = v / r[(i, i)];
            }
            let znorm = norm2(&z);
            let normal_scale = norm2(&d).max(1e-300);
            let z_zero = znorm <= 1e-10 * normal_scale;
            if z_zero && is_eq && s.abs() <= tolerance(prob.cons[p].rhs) {
                // Linearly dependent and consistent: nothing to enforce.
                continue 'outer;
            }

            let mut t1 = f64::INFINITY;
            let mut drop: Option<usize> = None;
            for (k, &ck) in active.iter().enumerate() {
                if ck < n_eq || rdir[k] <= 1e-12 {
                    continue;
                }
                let ratio = u[k] / rdir[k];
                if ratio < t1 {
                    t1 = ratio;
                    drop = Some(k);
                }
            }
            let t2 = if z_zero {
                f64::INFINITY
            } else {
                let zn = prob.dot(&prob.cons[p], &z);
                -s / zn
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::Infeasible);
            }
            for (uk, rk) in u.iter_mut().zip(&rdir) {
                *uk -= t * rk;
            }
            u_new += t;
            if !z_zero {
                crate::linalg::axpy(t, &z, &mut x);
            }
            if t2 <= t1 {
                // Full step: add p.
                for jcol in (q + 1..n).rev() {
                    let (a, b) = (d[jcol - 1], d[jcol]);
                    if b == 0.0 {
                        continue;
                    }
                    let h = libm::hypot(a, b);
                    let (c, sn) = (a / h, b / h);
                    d[jcol - 1] = h;
                    d[jcol] = 0.0;
                    for i in 0..n {
                        let (ja, jb) = (jm[(i, jcol - 1)], jm[(i, jcol)]);
                        jm[(i, jcol - 1)] = c * ja + sn * jb;
                        jm[(i, jcol)] = -sn * ja + c * jb;
                    }
                }
                for i in 0..=q {
                    r[(i, q)] = d[i];
                }
                active.push(p);
                u.push(u_new);
                is_active[p] = true;
                continue 'outer;
            }
            let k = drop.expect("finite partial step has a blocking constraint");
            is_active[active[k]] = false;
            active.remove(k);
            u.remove(k);
            // Shift columns left and restore triangularity.
            for col in k..q - 1 {
                for i in 0..q {
                    r[(i, col)] = r[(i, col + 1)];
                }
            }
            for i in 0..n {
                r[(i, q - 1)] = 0.0;
            }
            for i in k..q - 1 {
                let (a, b) = (r[(i, i)], r[(i + 1, i)]);
                if b == 0.0 {
                    continue;
                }
                let h = libm::hypot(a, b);
                let (c, sn) = (a / h, b / h);
                for col in i..q - 1 {
                    let (ra, rb) = (r[(i, col)], r[(i + 1, col)]);
                    r[(i, col)] = c * ra + sn * rb;
                    r[(i + 1, col)] = -sn * ra + c * rb;
                }
                r[(i + 1, i)] = 0.0;
                for row in 0..n {
                    let (ja, jb) = (jm[(row, i)], jm[(row, i + 1)]);
                    jm[(row, i)] = c * ja + sn * jb;
                    jm[(row, i + 1)] = -sn * ja + c * jb;
                }
            }
            s = prob.slack(&prob.cons[p], &x);
        }
    }

    polish(&prob, g, &active, &mut x, &mut u);
    let mut sol = QpSolution {
        objective: inst.value(&x),
        x,
        ineq_dual: vec![0.0; lp.ineq.rows()],
        eq_dual: vec![0.0; lp.eq.rows()],
        lower_dual: vec![0.0; n],
        upper_dual: vec![0.0; n],
        active: Vec::with_capacity(active.len()),
        iterations,
    };
    for (&k, &uk) in active.iter().zip(&u) {
        let c = prob.cons[k];
        sol.active.push(c.kind);
        match c.kind {
            ActiveConstraint::Ineq(i) => sol.ineq_dual[i] = uk.max(0.0),
            ActiveConstraint::Eq(i) => sol.eq_dual[i] = -c.sign * uk,
            ActiveConstraint::Lower(j) => sol.lower_dual[j] = uk.max(0.0),
            ActiveConstraint::Upper(j) => sol.upper_dual[j] = uk.max(0.0),
        }
    }
    if sol.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("QP solution"));
    }
    Ok(sol)
}

/// Re-solves stationarity plus the active constraints exactly.
fn polish(prob: &Problem, g: f64, active: &[usize], x: &mut Vec<f64>, u: &mut Vec<f64>) {
    let q = active.len();
    if q == 0 {
        return;
    }
    let xi = &prob.inst.lp.objective;
    let normals: Vec<Vec<f64>> = active.iter().map(|&k| prob.dense(&prob.cons[k])).collect();
    let mut gram = Matrix::zeros(q, q);
    for a in 0..q {
        for b in 0..=a {
            let v = dot(&normals[a], &normals[b]);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let rhs: Vec<f64> = active
        .iter()
        .zip(&normals)
        .map(|(&k, nk)| g * prob.cons[k].rhs + dot(nk, xi))
        .collect();
    let Ok(l) = cholesky(&gram) else {
        return;
    };
    let u2 = cholesky_solve(&l, &rhs);
    let mut x2: Vec<f64> = xi.iter().map(|c| -c).collect();
    for (nk, uk) in normals.iter().zip(&u2) {
        crate::linalg::axpy(*uk, nk, &mut x2);
    }
    for v in x2.iter_mut() {
        *v /= g;
    }
    let viol = |x: &[f64]| {
        prob.cons
            .iter()
            .map(|c| {
                let s = prob.slack(c, x);
                if c.is_eq() {
                    s.abs()
                } else {
                    (-s).max(0.0)
                }
            })
            .fold(0.0_f64, f64::max)
    };
    if x2.iter().all(|v| v.is_finite()) && viol(&x2) <= viol(x) + 1e-9 {
        *x = x2;
        *u = u2;
    }
}

impl Con {
    fn is_eq(&self) -> bool {
        matches!(self.kind, ActiveConstraint::Eq(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::LinearProgram;

    fn qp(lp: LinearProgram, rho: f64) -> QpInstance {
        QpInstance { lp, rho }
    }

    #[test]
    fn unconstrained_minimizer() {
        let mut lp = LinearProgram::new(vec![2.0]);
        lp.lower = vec![f64::NEG_INFINITY];
        let sol = solve_qp(&qp(lp, 1.0)).unwrap();
        assert!((sol.x[0] + 1.0).abs() < 1e-12);
        assert!(sol.active.is_empty());
    }

    #[test]
    fn active_lower_bound_carries_dual() {
        let lp = LinearProgram::new(vec![2.0]);
        let inst = qp(lp, 1.0);
        let sol = solve_qp(&inst).unwrap();
        assert_eq!(sol.x, vec![0.0]);
        assert!((sol.lower_dual[0] - 2.0).abs() < 1e-12);
        assert!(sol.stationarity_residual(&inst) < 1e-12);
    }

    #[test]
    fn projection_onto_simplex() {
        // min ||x - c||^2 over sum x = 1, x >= 0 equals xi = -2c, rho = 1
        let c = [0.9, 0.6, -0.4];
        let mut lp = LinearProgram::new(c.iter().map(|v| -2.0 * v).collect());
        lp.add_eq(&[1.0, 1.0, 1.0], 1.0).unwrap();
        let inst = qp(lp, 1.0);
        let sol = solve_qp(&inst).unwrap();
        // Projection by sorting: threshold 0.25 gives (0.65, 0.35, 0).
        let expect = [0.65, 0.35, 0.0];
        for (a, b) in sol.x.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{:?}", sol.x);
        }
        assert!(sol.stationarity_residual(&inst) < 1e-10);
    }

    fn projected_gradient(xi: &[f64], rho: f64, cap: f64, budget: f64) -> Vec<f64> {
        // Box [0, cap] with sum <= budget: bisection on the budget multiplier.
        let at = |mu: f64| -> Vec<f64> {
            xi.iter()
                .map(|c| ((-c - mu) / (2.0 * rho)).clamp(0.0, cap))
                .collect()
        };
        let x0 = at(0.0);
        if x0.iter().sum::<f64>() <= budget {
            return x0;
        }
        let (mut lo, mut hi) = (0.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid).iter().sum::<f64>() > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    }

    #[test]
    fn box_and_budget_match_bisection_oracle() {
        let xi = [-3.0, -1.0, 0.5, -2.5, -0.2, -4.0];
        let mut lp = LinearProgram::new(xi.to_vec());
        lp.upper = vec![1.2; 6];
        lp.add_ineq(&[1.0; 6], 2.0).unwrap();
        let inst = qp(lp, 0.7);
        let sol = solve_qp(&inst).unwrap();
        let oracle = projected_gradient(&xi, 0.7, 1.2, 2.0);
        for (a, b) in sol.x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{:?} vs {:?}", sol.x, oracle);
        }
        assert!(sol.stationarity_residual(&inst) < 1e-9);
        assert!(inst.lp.max_violation(&sol.x) < 1e-9);
        for (i, l) in sol.ineq_dual.iter().enumerate() {
            let slack = inst.lp.ineq_rhs[i] - dot(inst.lp.ineq.row(i), &sol.x);
            assert!(l * slack < 1e-9);
        }
    }

    #[test]
    fn redundant_equalities_are_skipped() {
        let mut lp = LinearProgram::new(vec![1.0, -1.0]);
        lp.lower = vec![f64::NEG_INFINITY; 2];
        lp.add_eq(&[1.0, 1.0], 1.0).unwrap();
        lp.add_eq(&[2.0, 2.0], 2.0).unwrap();
        let inst = qp(lp, 0.5);
        let sol = solve_qp(&inst).unwrap();
        assert!((sol.x[0] + 0.5).abs() < 1e-12);
        assert!((sol.x[1] - 1.5).abs() < 1e-12);
        assert!(sol.stationarity_residual(&inst) < 1e-12);
    }

    #[test]
    fn infeasible_system_is_reported() {
        let mut lp = LinearProgram::new(vec![0.0]);
        lp.add_ineq(&[1.0], -1.0).unwrap();
        assert_eq!(solve_qp(&qp(lp, 1.0)), Err(Error::Infeasible));
    }

    #[test]
    fn drops_constraints_that_become_slack() {
        // y >= 2 is added first, then 2x + y >= 12 makes it slack.
        let mut lp = LinearProgram::new(vec![0.0, 0.0]);
        lp.lower = vec![f64::NEG_INFINITY; 2];
        lp.add_ineq(&[0.0, -1.0], -2.0).unwrap();
        lp.add_ineq(&[-0.1, -0.05], -0.6).unwrap();
        let inst = qp(lp, 1.0);
        let sol = solve_qp(&inst).unwrap();
        assert!((sol.x[0] - 4.8).abs() < 1e-12);
        assert!((sol.x[1] - 2.4).abs() < 1e-12);
        assert_eq!(sol.ineq_dual[0], 0.0);
        assert_eq!(sol.active, vec![ActiveConstraint::Ineq(1)]);
        assert!(sol.stationarity_residual(&inst) < 1e-12);
    }
}
