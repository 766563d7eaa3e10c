//! Bounded-variable dense tableau simplex.
//!
//! Columns carry explicit `[lb, ub]` bounds (upper may be infinite); nonbasic
//! columns sit at one of their bounds. Phase one drives artificial columns to
//! zero, phase two optimizes with Dantzig pricing and falls back to Bland's
//! rule after a run of degenerate pivots. A dual simplex re-optimizes after
//! bound changes, which branch-and-bound uses to warm-start child nodes.

use alloc::vec;
use alloc::vec::Vec;

use super::LinearProgram;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let form = StandardForm::build(lp);
    let Some(mut engine) = Engine::phase_one(&form)? else {
        return Ok(LpOutcome::Infeasible);
    };
    match engine.primal()? {
        PrimalEnd::Optimal => Ok(LpOutcome::Optimal(form.recover(lp, &engine))),
        PrimalEnd::Unbounded => Ok(LpOutcome::Unbounded),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ColumnMap {
    Direct(usize),
    /// `x = -col`
    Mirror(usize),
    /// `x = pos - neg`
    Split(usize, usize),
}

/// `A x = b` with bounded columns; inequality rows carry a slack column.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub cost: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub map: Vec<ColumnMap>,
}

impl StandardForm {
    pub fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let mut map = Vec::with_capacity(n);
        let mut lb = Vec::new();
        let mut ub = Vec::new();
        let mut cost = Vec::new();
        for j in 0..n {
            let (l, u, c) = (lp.lower[j], lp.upper[j], lp.objective[j]);
            if l.is_finite() {
                map.push(ColumnMap::Direct(lb.len()));
                lb.push(l);
                ub.push(u);
                cost.push(c);
            } else if u.is_finite() {
                map.push(ColumnMap::Mirror(lb.len()));
                lb.push(-u);
                ub.push(f64::INFINITY);
                cost.push(-c);
            } else {
                map.push(ColumnMap::Split(lb.len(), lb.len() + 1));
                lb.extend([0.0, 0.0]);
                ub.extend([f64::INFINITY, f64::INFINITY]);
                cost.extend([c, -c]);
            }
        }
        let n_struct = lb.len();
        let m_in = lp.ineq.rows();
        let m_eq = lp.eq.rows();
        let ncol = n_struct + m_in;
        let mut a = Matrix::zeros(m_in + m_eq, ncol);
        let mut b = Vec::with_capacity(m_in + m_eq);
        let fill = |a: &mut Matrix, row: usize, src: &[f64]| {
            for (j, m) in map.iter().enumerate() {
                let v = src[j];
                match *m {
                    ColumnMap::Direct(c) => a[(row, c)] = v,
                    ColumnMap::Mirror(c) => a[(row, c)] = -v,
                    ColumnMap::Split(p, q) => {
                        a[(row, p)] = v;
                        a[(row, q)] = -v;
                    }
                }
            }
        };
        for i in 0..m_in {
            fill(&mut a, i, lp.ineq.row(i));
            a[(i, n_struct + i)] = 1.0;
            b.push(lp.ineq_rhs[i]);
        }
        for i in 0..m_eq {
            fill(&mut a, m_in + i, lp.eq.row(i));
            b.push(lp.eq_rhs[i]);
        }
        lb.extend(core::iter::repeat_n(0.0, m_in));
        ub.extend(core::iter::repeat_n(f64::INFINITY, m_in));
        cost.extend(core::iter::repeat_n(0.0, m_in));
        StandardForm {
            a,
            b,
            cost,
            lb,
            ub,
            map,
        }
    }

    pub fn original_values(&self, cols: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|m| match *m {
                ColumnMap::Direct(c) => cols[c],
                ColumnMap::Mirror(c) => -cols[c],
                ColumnMap::Split(p, q) => cols[p] - cols[q],
            })
            .collect()
    }

    pub fn recover(&self, lp: &LinearProgram, engine: &Engine) -> LpSolution {
        let x = self.original_values(&engine.values());
        let objective = lp.value(&x);
        LpSolution { x, objective }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Basic,
    Lower,
    Upper,
}

/// A basis snapshot from which an [`Engine`] can be rebuilt.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Basis {
    pub basic: Vec<usize>,
    pub status: Vec<Status>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PrimalEnd {
    Optimal,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DualEnd {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone)]
pub(crate) struct Engine {
    a: Matrix,
    b: Vec<f64>,
    cost: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    tab: Matrix,
    basic: Vec<usize>,
    status: Vec<Status>,
    beta: Vec<f64>,
    d: Vec<f64>,
    bland: bool,
}

impl Engine {
    fn rows(&self) -> usize {
        self.tab.rows()
    }

    fn cols(&self) -> usize {
        self.tab.cols()
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Upper => self.ub[j],
            _ => self.lb[j],
        }
    }

    /// Values of every column.
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.cols()).map(|j| self.nonbasic_value(j)).collect();
        for (i, &j) in self.basic.iter().enumerate() {
            v[j] = self.beta[i];
        }
        v
    }

    pub fn snapshot(&self) -> Basis {
        Basis {
            basic: self.basic.clone(),
            status: self.status.clone(),
        }
    }

    /// Builds the phase-one problem, solves it, and returns a phase-two engine
    /// positioned at a feasible basis, or `None` when infeasible.
    pub fn phase_one(form: &StandardForm) -> Result<Option<Engine>> {
        let m = form.a.rows();
        let n = form.a.cols();
        let start: Vec<f64> = form.lb.clone();
        let mut sign = vec![1.0; m];
        let mut a = Matrix::zeros(m, n + m);
        for i in 0..m {
            let resid = form.b[i] - dot(form.a.row(i), &start);
            sign[i] = if resid < 0.0 { -1.0 } else { 1.0 };
            a.row_mut(i)[..n].copy_from_slice(form.a.row(i));
            a[(i, n + i)] = sign[i];
        }
        let mut lb = form.lb.clone();
        let mut ub = form.ub.clone();
        lb.extend(core::iter::repeat_n(0.0, m));
        ub.extend(core::iter::repeat_n(f64::INFINITY, m));
        let mut cost = vec![0.0; n];
        cost.extend(core::iter::repeat_n(1.0, m));

        let mut status = vec![Status::Lower; n + m];
        let basic: Vec<usize> = (0..m).map(|i| n + i).collect();
        for &j in &basic {
            status[j] = Status::Basic;
        }
        let mut engine = Engine {
            a,
            b: form.b.clone(),
            cost,
            lb,
            ub,
            tab: Matrix::zeros(m, n + m),
            basic,
            status,
            beta: vec![0.0; m],
            d: vec![0.0; n + m],
            bland: false,
        };
        engine.refactor()?;
        if engine.primal()? == PrimalEnd::Unbounded {
            return Err(Error::contract("phase one cannot be unbounded"));
        }
        let scale = form.b.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
        let infeas: f64 = (0..m)
            .filter(|&i| engine.basic[i] >= n)
            .map(|i| engine.beta[i])
            .sum();
        if infeas > 1e-7 * scale {
            return Ok(None);
        }

        // Pivot artificials out of the basis; rows where that is impossible are redundant.
        let mut redundant = Vec::new();
        for r in 0..m {
            if engine.basic[r] < n {
                continue;
            }
            let entering = (0..n)
                .filter(|&j| engine.status[j] != Status::Basic)
                .filter(|&j| engine.tab[(r, j)].abs() > PIVOT_TOL)
                .max_by(|&p, &q| {
                    engine.tab[(r, p)]
                        .abs()
                        .total_cmp(&engine.tab[(r, q)].abs())
                        .then(q.cmp(&p))
                });
            match entering {
                Some(q) => {
                    let value = engine.nonbasic_value(q);
                    let leaving = engine.basic[r];
                    engine.pivot(r, q);
                    engine.status[leaving] = Status::Lower;
                    engine.beta[r] = value;
                }
                None => {
                    let orig = (0..m)
                        .max_by(|&p, &q| {
                            engine.tab[(r, n + p)]
                                .abs()
                                .total_cmp(&engine.tab[(r, n + q)].abs())
                                .then(q.cmp(&p))
                        })
                        .unwrap_or(r);
                    redundant.push((r, orig));
                }
            }
        }

        let drop_rows: Vec<usize> = redundant.iter().map(|&(_, o)| o).collect();
        let drop_tab_rows: Vec<usize> = redundant.iter().map(|&(r, _)| r).collect();
        let keep_rows: Vec<usize> = (0..m).filter(|i| !drop_rows.contains(i)).collect();
        let mut a2 = Matrix::zeros(keep_rows.len(), n);
        let mut b2 = Vec::with_capacity(keep_rows.len());
        for (new_i, &i) in keep_rows.iter().enumerate() {
            a2.row_mut(new_i).copy_from_slice(&form.a.row(i)[..n]);
            b2.push(form.b[i]);
        }
        let basic: Vec<usize> = (0..m)
            .filter(|r| !drop_tab_rows.contains(r))
            .map(|r| engine.basic[r])
            .collect();
        let mut status = engine.status[..n].to_vec();
        for s in status.iter_mut() {
            if *s == Status::Basic {
                *s = Status::Lower;
            }
        }
        for &j in &basic {
            status[j] = Status::Basic;
        }
        let mut phase2 = Engine {
            a: a2,
            b: b2,
            cost: form.cost.clone(),
            lb: form.lb.clone(),
            ub: form.ub.clone(),
            tab: Matrix::zeros(keep_rows.len(), n),
            basic,
            status,
            beta: vec![0.0; keep_rows.len()],
            d: vec![0.0; n],
            bland: false,
        };
        phase2.refactor()?;
        Ok(Some(phase2))
    }

    /// Rebuilds `B^{-1} A`, basic values and reduced costs from the original rows.
    pub fn refactor(&mut self) -> Result<()> {
        let m = self.a.rows();
        let n = self.a.cols();
        if self.basic.len() != m {
            return Err(Error::contract("basis size does not match row count"));
        }
        let mut tab = self.a.clone();
        let mut rhs: Vec<f64> = (0..m)
            .map(|i| {
                let mut r = self.b[i];
                for j in 0..n {
                    if self.status[j] != Status::Basic {
                        let v = self.nonbasic_value(j);
                        if v != 0.0 {
                            r -= self.a[(i, j)] * v;
                        }
                    }
                }
                r
            })
            .collect();
        let mut assigned = vec![false; m];
        let mut new_basic = vec![usize::MAX; m];
        let cols = self.basic.clone();
        for &q in &cols {
            let piv = (0..m)
                .filter(|&i| !assigned[i])
                .max_by(|&p, &r| tab[(p, q)].abs().total_cmp(&tab[(r, q)].abs()).then(r.cmp(&p)));
            let Some(r) = piv else {
                return Err(Error::Degenerate {
                    hint: "basis has more columns than rows",
                });
            };
            let pv = tab[(r, q)];
            if pv.abs() < 1e-11 {
                return Err(Error::Degenerate {
                    hint: "singular simplex basis",
                });
            }
            assigned[r] = true;
            new_basic[r] = q;
            let inv = 1.0 / pv;
            for v in tab.row_mut(r) {
                *v *= inv;
            }
            rhs[r] *= inv;
            let prow = tab.row(r).to_vec();
            for i in 0..m {
                if i != r {
                    let f = tab[(i, q)];
                    if f != 0.0 {
                        for (t, p) in tab.row_mut(i).iter_mut().zip(&prow) {
                            *t -= f * p;
                        }
                        rhs[i] -= f * rhs[r];
                    }
                }
            }
        }
        self.tab = tab;
        self.basic = new_basic;
        self.beta = rhs;
        self.compute_reduced_costs();
        Ok(())
    }

    fn compute_reduced_costs(&mut self) {
        let n = self.cols();
        let mut d = self.cost.clone();
        for (i, &bj) in self.basic.iter().enumerate() {
            let cb = self.cost[bj];
            if cb != 0.0 {
                for (dj, t) in d.iter_mut().zip(self.tab.row(i)) {
                    *dj -= cb * t;
                }
            }
        }
        for &bj in &self.basic {
            d[bj] = 0.0;
        }
        debug_assert_eq!(d.len(), n);
        self.d = d;
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let m = self.rows();
        let pv = self.tab[(r, q)];
        let inv = 1.0 / pv;
        for v in self.tab.row_mut(r) {
            *v *= inv;
        }
        let prow = self.tab.row(r).to_vec();
        for i in 0..m {
            if i != r {
                let f = self.tab[(i, q)];
                if f != 0.0 {
                    for (t, p) in self.tab.row_mut(i).iter_mut().zip(&prow) {
                        *t -= f * p;
                    }
                    self.tab[(i, q)] = 0.0;
                }
            }
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for (dj, p) in self.d.iter_mut().zip(&prow) {
                *dj -= dq * p;
            }
        }
        self.d[q] = 0.0;
        let leaving = self.basic[r];
        self.basic[r] = q;
        self.status[q] = Status::Basic;
        // Caller decides the leaving column's bound.
        self.status[leaving] = Status::Lower;
    }

    fn max_iterations(&self) -> usize {
        50 * (self.rows() + self.cols()) + 1000
    }

    fn choose_entering(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols() {
            if self.lb[j] == self.ub[j] {
                continue;
            }
            let score = match self.status[j] {
                Status::Lower if self.d[j] < -COST_TOL => -self.d[j],
                Status::Upper if self.d[j] > COST_TOL => self.d[j],
                _ => continue,
            };
            if self.bland {
                return Some(j);
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    pub fn primal(&mut self) -> Result<PrimalEnd> {
        let mut degenerate = 0;
        for _ in 0..self.max_iterations() {
            let Some(q) = self.choose_entering() else {
                return Ok(PrimalEnd::Optimal);
            };
            let sigma = if self.status[q] == Status::Lower { 1.0 } else { -1.0 };
            let mut theta = self.ub[q] - self.lb[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_alpha = 0.0;
            for i in 0..self.rows() {
                let alpha = sigma * self.tab[(i, q)];
                let bj = self.basic[i];
                let (limit, to_upper) = if alpha > PIVOT_TOL {
                    ((self.beta[i] - self.lb[bj]) / alpha, false)
                } else if alpha < -PIVOT_TOL && self.ub[bj].is_finite() {
                    ((self.ub[bj] - self.beta[i]) / -alpha, true)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < theta || (limit == theta && !theta.is_finite()),
                    Some((r, _)) => {
                        if limit < theta - 1e-12 {
                            true
                        } else if limit <= theta + 1e-12 {
                            if self.bland {
                                bj < self.basic[r]
                            } else {
                                alpha.abs() > best_alpha
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = limit;
                    leave = Some((i, to_upper));
                    best_alpha = alpha.abs();
                }
            }
            if !theta.is_finite() {
                return Ok(PrimalEnd::Unbounded);
            }
            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_RUN {
                    self.bland = true;
                }
            } else {
                degenerate = 0;
            }
            for i in 0..self.rows() {
                let a = self.tab[(i, q)];
                if a != 0.0 {
                    self.beta[i] -= sigma * theta * a;
                }
            }
            match leave {
                None => {
                    self.status[q] = if sigma > 0.0 {
                        Status::Upper
                    } else {
                        Status::Lower
                    };
                }
                Some((r, to_upper)) => {
                    let entering_value = self.nonbasic_value(q) + sigma * theta;
                    let leaving = self.basic[r];
                    self.pivot(r, q);
                    self.status[leaving] = if to_upper {
                        Status::Upper
                    } else {
                        Status::Lower
                    };
                    self.beta[r] = entering_value;
                }
            }
        }
        Err(Error::contract("simplex iteration limit reached"))
    }

    /// Dual simplex from a dual-feasible basis until primal feasibility.
    pub fn dual(&mut self) -> Result<DualEnd> {
        for _ in 0..self.max_iterations() {
            let mut pick: Option<(usize, f64, bool)> = None;
            for i in 0..self.rows() {
                let bj = self.basic[i];
                let (viol, to_upper) = if self.beta[i] < self.lb[bj] - FEAS_TOL {
                    (self.lb[bj] - self.beta[i], false)
                } else if self.beta[i] > self.ub[bj] + FEAS_TOL {
                    (self.beta[i] - self.ub[bj], true)
                } else {
                    continue;
                };
                if pick.is_none_or(|(_, v, _)| viol > v) {
                    pick = Some((i, viol, to_upper));
                }
            }
            let Some((r, _, to_upper)) = pick else {
                return Ok(DualEnd::Feasible);
            };
            let target = if to_upper {
                self.ub[self.basic[r]]
            } else {
                self.lb[self.basic[r]]
            };
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.cols() {
                if self.status[j] == Status::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let alpha = self.tab[(r, j)];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let at_lower = self.status[j] == Status::Lower;
                // Leaving below its lower bound needs beta_r to rise, i.e. -alpha * dx > 0.
                let eligible = if to_upper {
                    (at_lower && alpha > 0.0) || (!at_lower && alpha < 0.0)
                } else {
                    (at_lower && alpha < 0.0) || (!at_lower && alpha > 0.0)
                };
                if !eligible {
                    continue;
                }
                let ratio = self.d[j].abs() / alpha.abs();
                let better = match entering {
                    None => true,
                    Some((_, best, best_alpha)) => {
                        ratio < best - 1e-12 || (ratio <= best + 1e-12 && alpha.abs() > best_alpha)
                    }
                };
                if better {
                    entering = Some((j, ratio, alpha.abs()));
                }
            }
            let Some((q, _, _)) = entering else {
                return Ok(DualEnd::Infeasible);
            };
            let alpha = self.tab[(r, q)];
            let delta = (self.beta[r] - target) / alpha;
            for i in 0..self.rows() {
                let a = self.tab[(i, q)];
                if a != 0.0 {
                    self.beta[i] -= a * delta;
                }
            }
            let entering_value = self.nonbasic_value(q) + delta;
            let leaving = self.basic[r];
            self.pivot(r, q);
            self.status[leaving] = if to_upper {
                Status::Upper
            } else {
                Status::Lower
            };
            self.beta[r] = entering_value;
        }
        Err(Error::contract("dual simplex iteration limit reached"))
    }

    /// Restores `basis` under new column bounds and re-optimizes.
    pub fn resolve(&mut self, basis: &Basis, lb: &[f64], ub: &[f64]) -> Result<Option<()>> {
        self.lb.copy_from_slice(lb);
        self.ub.copy_from_slice(ub);
        self.basic.clone_from(&basis.basic);
        self.status.clone_from(&basis.status);
        for j in 0..self.cols() {
            if self.status[j] == Status::Upper && !self.ub[j].is_finite() {
                self.status[j] = Status::Lower;
            }
        }
        self.bland = false;
        self.refactor()?;
        if self.dual()? == DualEnd::Infeasible {
            return Ok(None);
        }
        match self.primal()? {
            PrimalEnd::Optimal => Ok(Some(())),
            PrimalEnd::Unbounded => Err(Error::contract("bounded node became unbounded")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn single_lower_bound() {
        // min x s.t. x >= 3 written as -x <= -3
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.lower[0] = f64::NEG_INFINITY;
        lp.add_ineq(&[-1.0], -3.0).unwrap();
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_two_variable() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add_ineq(&[1.0, 0.0], 4.0).unwrap();
        lp.add_ineq(&[0.0, 2.0], 12.0).unwrap();
        lp.add_ineq(&[3.0, 2.0], 18.0).unwrap();
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 6.0).abs() < 1e-9);
        assert!((sol.objective + 36.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded_are_typed() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_ineq(&[1.0], -1.0).unwrap();
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_ineq(&[-1.0, 1.0], 1.0).unwrap();
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn equalities_with_redundant_rows() {
        // x + y = 2 stated twice plus its double; min x - y
        let mut lp = LinearProgram::new(vec![1.0, -1.0]);
        lp.upper = vec![5.0, 1.5];
        lp.add_eq(&[1.0, 1.0], 2.0).unwrap();
        lp.add_eq(&[1.0, 1.0], 2.0).unwrap();
        lp.add_eq(&[2.0, 2.0], 4.0).unwrap();
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-9);
        assert!((sol.x[1] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's cycling example (cycles under naive Dantzig with lowest-index ties).
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_ineq(&[0.25, -60.0, -0.04, 9.0], 0.0).unwrap();
        lp.add_ineq(&[0.5, -90.0, -0.02, 3.0], 0.0).unwrap();
        lp.add_ineq(&[0.0, 0.0, 1.0, 0.0], 1.0).unwrap();
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert!((sol.objective + 0.05).abs() < 1e-9);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x + y with x free, y <= 2 (no lower), x - y >= 1, x + y >= -4
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.lower = vec![f64::NEG_INFINITY, f64::NEG_INFINITY];
        lp.upper = vec![f64::INFINITY, 2.0];
        lp.add_ineq(&[-1.0, 1.0], -1.0).unwrap();
        lp.add_ineq(&[-1.0, -1.0], 4.0).unwrap();
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert!((sol.objective + 4.0).abs() < 1e-9);
        assert!(lp.max_violation(&sol.x) < 1e-9);
    }

    #[test]
    fn upper_bounds_respected() {
        let mut lp = LinearProgram::new(vec![-1.0, -2.0, -3.0]);
        lp.upper = vec![1.0, 1.0, 1.0];
        lp.add_ineq(&[1.0, 1.0, 1.0], 2.5).unwrap();
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert!((sol.objective + 5.5).abs() < 1e-9);
        assert!((sol.x[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn empty_constraint_matrix() {
        let mut lp = LinearProgram::new(vec![2.0, -1.0]);
        lp.upper = vec![3.0, 4.0];
        lp.eq = Matrix::zeros(0, 2);
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_eq!(sol.x, vec![0.0, 4.0]);
    }
}
