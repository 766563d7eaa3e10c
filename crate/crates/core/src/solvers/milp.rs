//! Best-first branch-and-bound over the simplex engine.
//!
//! Nodes are ordered by their parent's LP bound (ties by creation order) and
//! re-solved from the parent basis with the dual simplex. Branching picks the
//! most fractional integer variable, lowest index on ties.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::lp::{Basis, ColumnMap, Engine, PrimalEnd, StandardForm};
use super::MilpInstance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    pub node_limit: usize,
    /// Absolute optimality gap.
    pub gap: f64,
    pub integrality_tol: f64,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            node_limit: 100_000,
            gap: 1e-6,
            integrality_tol: 1e-6,
        }
    }
}

/// One branching decision, kept so runs can be compared for determinism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRecord {
    pub node: usize,
    pub var: usize,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub nodes: usize,
    pub branches: Vec<BranchRecord>,
}

pub fn solve_milp(inst: &MilpInstance) -> Result<MilpSolution> {
    solve_milp_with(inst, &MilpOptions::default())
}

struct Node {
    id: usize,
    bound: f64,
    lb: Vec<f64>,
    ub: Vec<f64>,
    basis: Basis,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then smallest id, ranks highest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.id.cmp(&self.id))
    }
}

pub fn solve_milp_with(inst: &MilpInstance, opts: &MilpOptions) -> Result<MilpSolution> {
    inst.validate()?;
    let lp = &inst.lp;
    let form = StandardForm::build(lp);
    for (j, &int) in inst.integer.iter().enumerate() {
        if int && matches!(form.map[j], ColumnMap::Split(..)) {
            return Err(Error::contract(alloc::format!(
                "integer variable {j} needs a finite bound"
            )));
        }
    }
    let Some(mut engine) = Engine::phase_one(&form)? else {
        return Err(Error::Infeasible);
    };
    if engine.primal()? == PrimalEnd::Unbounded {
        return Err(Error::contract("relaxation is unbounded"));
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        bound: lp.value(&form.original_values(&engine.values())),
        lb: engine.lb.clone(),
        ub: engine.ub.clone(),
        basis: engine.snapshot(),
    });
    let mut next_id = 1;
    let mut nodes = 0;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut branches = Vec::new();

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - opts.gap {
                continue;
            }
        }
        if nodes >= opts.node_limit {
            return Err(Error::NodeBudget {
                nodes,
                incumbent: incumbent.map(|(v, _)| v),
            });
        }
        nodes += 1;
        if engine.resolve(&node.basis, &node.lb, &node.ub)?.is_none() {
            continue;
        }
        let x = form.original_values(&engine.values());
        let value = lp.value(&x);
        if let Some((best, _)) = &incumbent {
            if value >= best - opts.gap {
                continue;
            }
        }
        let mut branch: Option<(usize, f64)> = None;
        for (j, &int) in inst.integer.iter().enumerate() {
            if !int {
                continue;
            }
            let frac = x[j] - libm::floor(x[j]);
            let dist = frac.min(1.0 - frac);
            if dist > opts.integrality_tol && branch.is_none_or(|(_, d)| dist > d) {
                branch = Some((j, dist));
            }
        }
        let Some((var, _)) = branch else {
            let mut x = x;
            for (v, &int) in x.iter_mut().zip(&inst.integer) {
                if int {
                    *v = libm::round(*v);
                }
            }
            let value = lp.value(&x);
            incumbent = Some((value, x));
            continue;
        };

        let v = x[var];
        branches.push(BranchRecord {
            node: node.id,
            var,
            value: v,
            bound: value,
        });
        let basis = engine.snapshot();
        let (down, up) = (libm::floor(v), libm::ceil(v));
        for (is_down, limit) in [(true, down), (false, up)] {
            let mut lb = node.lb.clone();
            let mut ub = node.ub.clone();
            match form.map[var] {
                ColumnMap::Direct(c) => {
                    if is_down {
                        ub[c] = ub[c].min(limit);
                    } else {
                        lb[c] = lb[c].max(limit);
                    }
                }
                ColumnMap::Mirror(c) => {
                    if is_down {
                        lb[c] = lb[c].max(-limit);
                    } else {
                        ub[c] = ub[c].min(-limit);
                    }
                }
                ColumnMap::Split(..) => unreachable!("rejected above"),
            }
            let c = match form.map[var] {
                ColumnMap::Direct(c) | ColumnMap::Mirror(c) => c,
                ColumnMap::Split(..) => unreachable!(),
            };
            if lb[c] > ub[c] {
                continue;
            }
            heap.push(Node {
                id: next_id,
                bound: value,
                lb,
                ub,
                basis: basis.clone(),
            });
            next_id += 1;
        }
    }

    match incumbent {
        Some((objective, x)) => Ok(MilpSolution {
            x,
            objective,
            nodes,
            branches,
        }),
        None => Err(Error::Infeasible),
    }
}
