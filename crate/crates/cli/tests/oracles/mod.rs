//! Reference computations written independently of the library solvers.

use gdf_core::problems::DeploymentNetwork;
use gdf_core::solvers::QpInstance;

/// Per-capita outage-hours `sum_{t>=1} y[t] (t_t - t_{t-1}) / N`.
fn damage(y: &[f64], total: f64, timestamps: &[f64]) -> f64 {
    let mut a = 0.0;
    for t in 1..timestamps.len() {
        a += y[t] * (timestamps[t] - timestamps[t - 1]);
    }
    a / total
}

/// Minimum SAIDI over every selection of at most `budget` units.
pub fn undergrounding_best(outages: &[Vec<f64>], totals: &[f64], timestamps: &[f64], budget: usize) -> f64 {
    let k = totals.len();
    let d: Vec<f64> = (0..k).map(|i| damage(&outages[i], totals[i], timestamps)).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << k) {
        if mask.count_ones() as usize > budget {
            continue;
        }
        let left: f64 = (0..k).filter(|i| mask & (1 << i) == 0).map(|i| d[i]).sum();
        best = best.min(left / k as f64);
    }
    best
}

struct Search<'a> {
    net: &'a DeploymentNetwork,
    outages: &'a [Vec<f64>],
    periods: usize,
    cap: usize,
    /// `sent[t-1][e]`.
    sent: Vec<Vec<usize>>,
    best: f64,
}

impl Search<'_> {
    fn run(&mut self, t: usize, stock: &[f64], cost: f64) {
        if cost >= self.best {
            return;
        }
        if t > self.periods {
            let mut balance = vec![0i64; self.net.nodes()];
            for row in &self.sent {
                for (e, edge) in self.net.edges.iter().enumerate() {
                    balance[edge.from] -= row[e] as i64;
                    balance[edge.to] += row[e] as i64;
                }
            }
            if balance.iter().all(|b| *b == 0) {
                self.best = cost;
            }
            return;
        }
        let m = self.net.edges.len();
        let mut x = vec![0usize; m];
        loop {
            self.sent.push(x.clone());
            let mut q = stock.to_vec();
            let mut step = 0.0;
            for (e, edge) in self.net.edges.iter().enumerate() {
                q[edge.from] -= x[e] as f64;
                if t > edge.delay {
                    q[edge.to] += self.sent[t - 1 - edge.delay][e] as f64;
                }
                step += edge.cost * x[e] as f64;
            }
            if q.iter().all(|v| *v >= -1e-12) {
                for k in 0..self.net.units {
                    step += self.net.operation_cost * q[k];
                    let short = self.outages[k][t] - q[k] * self.net.generator_capacity;
                    if short > 0.0 {
                        step += self.net.interruption_cost * short;
                    }
                }
                self.run(t + 1, &q, cost + step);
            }
            self.sent.pop();
            let mut i = 0;
            while i < m && x[i] == self.cap {
                x[i] = 0;
                i += 1;
            }
            if i == m {
                break;
            }
            x[i] += 1;
        }
    }
}

/// Minimum deployment cost by exhaustive search over integer shipments.
pub fn deployment_best(net: &DeploymentNetwork, outages: &[Vec<f64>], periods: usize) -> f64 {
    let mut stock = vec![0.0; net.nodes()];
    for (w, s) in net.warehouse_stock.iter().enumerate() {
        stock[net.units + w] = *s;
    }
    let mut search = Search {
        net,
        outages,
        periods,
        cap: net.capacity as usize,
        sent: Vec::new(),
        best: f64::INFINITY,
    };
    search.run(1, &stock, 0.0);
    search.best
}

/// Minimizer of `xi^T x + rho |x|^2` by accelerated projected gradient ascent on
/// the dual of the general constraints, with the bounds kept in the inner problem.
pub fn qp_projected_gradient(inst: &QpInstance, max_iters: usize) -> Vec<f64> {
    let lp = &inst.lp;
    let n = lp.objective.len();
    let (mi, me) = (lp.ineq_rhs.len(), lp.eq_rhs.len());
    let rows: Vec<&[f64]> = (0..mi).map(|i| lp.ineq.row(i)).chain((0..me).map(|i| lp.eq.row(i))).collect();
    let rhs: Vec<f64> = lp.ineq_rhs.iter().chain(&lp.eq_rhs).copied().collect();
    let primal = |y: &[f64]| -> Vec<f64> {
        let mut g = lp.objective.clone();
        for (r, yi) in rows.iter().zip(y) {
            for j in 0..n {
                g[j] += yi * r[j];
            }
        }
        (0..n)
            .map(|j| (-g[j] / (2.0 * inst.rho)).clamp(lp.lower[j], lp.upper[j]))
            .collect()
    };
    let ascent = |x: &[f64]| -> Vec<f64> {
        rows.iter()
            .zip(&rhs)
            .map(|(r, b)| r.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b)
            .collect()
    };
    let project = |y: &mut [f64]| {
        for v in y.iter_mut().take(mi) {
            *v = v.max(0.0);
        }
    };
    if rows.is_empty() {
        return primal(&[]);
    }
    let frob: f64 = rows.iter().flat_map(|r| r.iter()).map(|a| a * a).sum();
    let step = 2.0 * inst.rho / frob;
    let m = rows.len();
    let mut y = vec![0.0; m];
    let mut w = y.clone();
    let mut t = 1.0_f64;
    let mut quiet = 0;
    for _ in 0..max_iters {
        let g = ascent(&primal(&w));
        let mut next: Vec<f64> = (0..m).map(|i| w[i] + step * g[i]).collect();
        project(&mut next);
        let moved: Vec<f64> = (0..m).map(|i| next[i] - y[i]).collect();
        let restart = (0..m).map(|i| (w[i] - next[i]) * moved[i]).sum::<f64>() > 0.0;
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        if restart {
            t = 1.0;
            w = next.clone();
        } else {
            w = (0..m).map(|i| next[i] + (t - 1.0) / t_next * moved[i]).collect();
            t = t_next;
        }
        let size = moved.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let scale = next.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        y = next;
        quiet = if size <= 1e-15 * scale { quiet + 1 } else { 0 };
        if quiet >= 50 {
            break;
        }
    }
    primal(&y)
}
