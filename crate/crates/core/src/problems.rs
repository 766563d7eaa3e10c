//! The two decision problems: mobile generator deployment over a
//! time-expanded unit/warehouse graph, and budgeted power line undergrounding.
//!
//! Forecasts and truths are `K x (T+1)` outage matrices on the event grid
//! `t_0..t_T`; decisions are made for periods `1..T`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::solvers::{
    qp_backward, solve_milp_with, solve_qp, LinearProgram, MilpInstance, MilpOptions, QpInstance,
    QpSolution,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
    /// Travel time in periods.
    pub delay: usize,
}

/// Nodes `0..K` are service units, `K..K+W` are warehouses.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentNetwork {
    pub units: usize,
    pub warehouse_stock: Vec<f64>,
    pub edges: Vec<Edge>,
    pub capacity: f64,
    pub generator_capacity: f64,
    pub interruption_cost: f64,
    pub operation_cost: f64,
}

/// Scalar settings for a network where every unit connects to every warehouse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeploymentParams {
    pub interruption_cost: f64,
    pub operation_cost: f64,
    pub transport_cost: f64,
    pub stock_per_warehouse: f64,
    pub travel_time: usize,
    pub generator_capacity: f64,
    pub capacity: f64,
}

impl Default for DeploymentParams {
    fn default() -> Self {
        DeploymentParams {
            interruption_cost: 1.0,
            operation_cost: 2.0,
            transport_cost: 400.0,
            stock_per_warehouse: 5.0,
            travel_time: 10,
            generator_capacity: 100.0,
            capacity: 5.0,
        }
    }
}

impl DeploymentNetwork {
    pub fn uniform(units: usize, warehouses: usize, p: &DeploymentParams) -> Self {
        let mut edges = Vec::with_capacity(2 * units * warehouses);
        for k in 0..units {
            for w in 0..warehouses {
                let wn = units + w;
                for (from, to) in [(wn, k), (k, wn)] {
                    edges.push(Edge {
                        from,
                        to,
                        cost: p.transport_cost,
                        delay: p.travel_time,
                    });
                }
            }
        }
        DeploymentNetwork {
            units,
            warehouse_stock: vec![p.stock_per_warehouse; warehouses],
            edges,
            capacity: p.capacity,
            generator_capacity: p.generator_capacity,
            interruption_cost: p.interruption_cost,
            operation_cost: p.operation_cost,
        }
    }

    pub fn warehouses(&self) -> usize {
        self.warehouse_stock.len()
    }

    pub fn nodes(&self) -> usize {
        self.units + self.warehouses()
    }

    fn initial_stock(&self, v: usize) -> f64 {
        if v < self.units {
            0.0
        } else {
            self.warehouse_stock[v - self.units]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.units == 0 {
            return Err(Error::config("deployment network needs at least one unit"));
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !self.warehouse_stock.iter().all(|q| nonneg(*q)) {
            return Err(Error::config("warehouse stocks must be nonnegative"));
        }
        if !(self.capacity >= 1.0 && self.capacity.is_finite()) {
            return Err(Error::config("edge capacity must be at least 1"));
        }
        if !(self.generator_capacity > 0.0 && self.generator_capacity.is_finite()) {
            return Err(Error::config("generator capacity must be positive"));
        }
        if !nonneg(self.interruption_cost) || !nonneg(self.operation_cost) {
            return Err(Error::config("costs must be nonnegative"));
        }
        for e in &self.edges {
            if e.from >= self.nodes() || e.to >= self.nodes() {
                return Err(Error::config("edge endpoint out of range"));
            }
            if (e.from < self.units) == (e.to < self.units) {
                return Err(Error::config("edges must join a unit and a warehouse"));
            }
            if !nonneg(e.cost) {
                return Err(Error::config("edge costs must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Variable indexing of the deployment program: shipments `x[t][e]`, stocks
/// `q[t][v]` and shortfalls `s[t][k]` (in generators) for `t = 1..T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeploymentLayout {
    pub periods: usize,
    pub edges: usize,
    pub nodes: usize,
    pub units: usize,
}

impl DeploymentLayout {
    pub fn new(net: &DeploymentNetwork, periods: usize) -> Self {
        DeploymentLayout {
            periods,
            edges: net.edges.len(),
            nodes: net.nodes(),
            units: net.units,
        }
    }

    pub fn x(&self, t: usize, e: usize) -> usize {
        (t - 1) * self.edges + e
    }

    pub fn q(&self, t: usize, v: usize) -> usize {
        self.periods * self.edges + (t - 1) * self.nodes + v
    }

    pub fn s(&self, t: usize, k: usize) -> usize {
        self.periods * (self.edges + self.nodes) + (t - 1) * self.units + k
    }

    pub fn num_vars(&self) -> usize {
        self.periods * (self.edges + self.nodes + self.units)
    }

    /// Row of the shortfall inequality for `(t, k)`.
    pub fn shortfall_row(&self, t: usize, k: usize) -> usize {
        (t - 1) * self.units + k
    }
}

fn check_forecast(forecast: &[Vec<f64>], units: usize, periods: usize) -> Result<()> {
    if forecast.len() != units {
        return Err(Error::Dimension {
            context: "forecast units",
            expected: units,
            found: forecast.len(),
        });
    }
    for row in forecast {
        if row.len() < periods + 1 {
            return Err(Error::contract("forecast horizon shorter than the decision horizon"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forecast"));
        }
    }
    Ok(())
}

/// Builds the deployment MILP for `forecast` over periods `1..=periods`.
pub fn build_deployment_instance(
    net: &DeploymentNetwork,
    forecast: &[Vec<f64>],
    periods: usize,
) -> Result<MilpInstance> {
    net.validate()?;
    check_forecast(forecast, net.units, periods)?;
    let lay = DeploymentLayout::new(net, periods);
    let n = lay.num_vars();
    let ng = net.generator_capacity;
    let mut obj = vec![0.0; n];
    for t in 1..=periods {
        for (e, edge) in net.edges.iter().enumerate() {
            obj[lay.x(t, e)] = edge.cost;
        }
        for k in 0..net.units {
            obj[lay.q(t, k)] = net.operation_cost;
            obj[lay.s(t, k)] = net.interruption_cost * ng;
        }
    }
    let mut lp = LinearProgram::new(obj);
    let mut integer = vec![false; n];
    for t in 1..=periods {
        for e in 0..lay.edges {
            lp.upper[lay.x(t, e)] = net.capacity;
            integer[lay.x(t, e)] = true;
        }
        for v in 0..lay.nodes {
            integer[lay.q(t, v)] = true;
        }
    }

    // Shortfall epigraph: s >= yhat / N_g - q.
    let mut row = vec![0.0; n];
    for t in 1..=periods {
        for k in 0..net.units {
            row.fill(0.0);
            row[lay.q(t, k)] = -1.0;
            row[lay.s(t, k)] = -1.0;
            lp.add_ineq(&row, -forecast[k][t].max(0.0) / ng)?;
        }
    }
    // Stock recursion with travel-time lag.
    for t in 1..=periods {
        for v in 0..lay.nodes {
            row.fill(0.0);
            row[lay.q(t, v)] = 1.0;
            let mut rhs = 0.0;
            if t == 1 {
                rhs = net.initial_stock(v);
            } else {
                row[lay.q(t - 1, v)] = -1.0;
            }
            for (e, edge) in net.edges.iter().enumerate() {
                if edge.from == v {
                    row[lay.x(t, e)] += 1.0;
                }
                if edge.to == v && t > edge.delay {
                    row[lay.x(t - edge.delay, e)] -= 1.0;
                }
            }
            lp.add_eq(&row, rhs)?;
        }
    }
    // Flow conservation over the horizon; the last node's row is implied.
    for v in 0..lay.nodes.saturating_sub(1) {
        row.fill(0.0);
        for t in 1..=periods {
            for (e, edge) in net.edges.iter().enumerate() {
                if edge.to == v {
                    row[lay.x(t, e)] += 1.0;
                }
                if edge.from == v {
                    row[lay.x(t, e)] -= 1.0;
                }
            }
        }
        if row.iter().any(|c| *c != 0.0) {
            lp.add_eq(&row, 0.0)?;
        }
    }
    Ok(MilpInstance { lp, integer })
}

/// Shipment schedule `shipments[t-1][e]` for `t = 1..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentPlan {
    pub shipments: Vec<Vec<f64>>,
}

impl DeploymentPlan {
    pub fn zeros(periods: usize, edges: usize) -> Self {
        DeploymentPlan {
            shipments: vec![vec![0.0; edges]; periods],
        }
    }

    pub fn periods(&self) -> usize {
        self.shipments.len()
    }

    pub fn from_solution(net: &DeploymentNetwork, periods: usize, x: &[f64]) -> Self {
        let lay = DeploymentLayout::new(net, periods);
        let shipments = (1..=periods)
            .map(|t| (0..lay.edges).map(|e| x[lay.x(t, e)]).collect())
            .collect();
        DeploymentPlan { shipments }
    }

    pub fn total_shipped(&self) -> f64 {
        self.shipments.iter().flatten().sum()
    }
}

/// Stocks `q[t][v]` for `t = 0..T` implied by a plan, after checking every
/// deployment constraint.
pub fn plan_stocks(net: &DeploymentNetwork, plan: &DeploymentPlan) -> Result<Vec<Vec<f64>>> {
    let periods = plan.periods();
    let nodes = net.nodes();
    let tol = 1e-6;
    let mut q = vec![vec![0.0; nodes]; periods + 1];
    for v in 0..nodes {
        q[0][v] = net.initial_stock(v);
    }
    let mut balance = vec![0.0; nodes];
    for t in 1..=periods {
        let row = &plan.shipments[t - 1];
        if row.len() != net.edges.len() {
            return Err(Error::Dimension {
                context: "plan edges",
                expected: net.edges.len(),
                found: row.len(),
            });
        }
        q[t] = q[t - 1].clone();
        for (e, edge) in net.edges.iter().enumerate() {
            let x = row[e];
            if !(x >= -tol && x <= net.capacity + tol) || (x - libm::round(x)).abs() > tol {
                return Err(Error::contract(alloc::format!(
                    "shipment on edge {e} at period {t} must be an integer in [0, C]"
                )));
            }
            q[t][edge.from] -= x;
            balance[edge.from] -= x;
            balance[edge.to] += x;
            if t > edge.delay {
                q[t][edge.to] += plan.shipments[t - 1 - edge.delay][e];
            }
        }
        if let Some(v) = q[t].iter().position(|s| *s < -tol) {
            return Err(Error::contract(alloc::format!(
                "negative stock at node {v} in period {t}"
            )));
        }
    }
    if let Some(v) = balance.iter().position(|b| b.abs() > tol) {
        return Err(Error::contract(alloc::format!(
            "flow conservation violated at node {v}"
        )));
    }
    Ok(q)
}

/// Transport, operation and outage cost of a plan against true outages.
pub fn deployment_cost(net: &DeploymentNetwork, plan: &DeploymentPlan, truth: &[Vec<f64>]) -> Result<f64> {
    let periods = plan.periods();
    check_forecast(truth, net.units, periods)?;
    let q = plan_stocks(net, plan)?;
    let mut cost = 0.0;
    for t in 1..=periods {
        for (e, edge) in net.edges.iter().enumerate() {
            cost += edge.cost * plan.shipments[t - 1][e];
        }
        for k in 0..net.units {
            cost += net.operation_cost * q[t][k];
            let short = truth[k][t] - q[t][k] * net.generator_capacity;
            cost += net.interruption_cost * short.max(0.0);
        }
    }
    Ok(cost)
}

/// Per-capita damage `A_k / N_k` with `A_k = sum_{t>=1} Y_k(t) dt_t`.
pub fn per_capita_damage(outages: &[Vec<f64>], totals: &[f64], timestamps: &[f64]) -> Result<Vec<f64>> {
    let periods = timestamps.len().saturating_sub(1);
    check_forecast(outages, totals.len(), periods)?;
    Ok(outages
        .iter()
        .zip(totals)
        .map(|(y, n)| {
            (1..=periods)
                .map(|t| y[t] * (timestamps[t] - timestamps[t - 1]))
                .sum::<f64>()
                / n
        })
        .collect())
}

/// Budgeted selection minimizing forecast SAIDI.
pub fn build_undergrounding_instance(
    forecast: &[Vec<f64>],
    totals: &[f64],
    timestamps: &[f64],
    budget: usize,
) -> Result<MilpInstance> {
    let k = totals.len();
    if budget > k {
        return Err(Error::config("undergrounding budget exceeds the number of units"));
    }
    let damage = per_capita_damage(forecast, totals, timestamps)?;
    let scale = 1.0 / k as f64;
    let mut lp = LinearProgram::new(damage.iter().map(|d| -scale * d).collect());
    lp.objective_offset = damage.iter().sum::<f64>() * scale;
    lp.upper = vec![1.0; k];
    lp.add_ineq(&vec![1.0; k], budget as f64)?;
    Ok(MilpInstance {
        lp,
        integer: vec![true; k],
    })
}

pub fn saidi(selected: &[bool], truth: &[Vec<f64>], totals: &[f64], timestamps: &[f64]) -> Result<f64> {
    if selected.len() != totals.len() {
        return Err(Error::Dimension {
            context: "undergrounding selection",
            expected: totals.len(),
            found: selected.len(),
        });
    }
    let damage = per_capita_damage(truth, totals, timestamps)?;
    let sum: f64 = damage
        .iter()
        .zip(selected)
        .filter(|(_, s)| !**s)
        .map(|(d, _)| d)
        .sum();
    Ok(sum / totals.len() as f64)
}

/// Excess true cost of a decision over the true-optimal one.
pub fn regret(decision_cost: f64, optimal_cost: f64) -> f64 {
    decision_cost - optimal_cost
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Deployment(DeploymentPlan),
    Undergrounding(Vec<bool>),
}

/// A decision problem bound to one event's grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Deployment(DeploymentNetwork),
    Undergrounding { budget: usize },
}

/// Event-specific data the problems need besides the forecast.
#[derive(Debug, Clone, Copy)]
pub struct EventGrid<'a> {
    pub totals: &'a [f64],
    pub timestamps: &'a [f64],
}

impl EventGrid<'_> {
    pub fn periods(&self) -> usize {
        self.timestamps.len().saturating_sub(1)
    }
}

/// Relaxed decision together with what the backward pass needs.
#[derive(Debug, Clone)]
pub struct RelaxedDecision {
    pub instance: QpInstance,
    pub solution: QpSolution,
}

impl Problem {
    pub fn build(&self, forecast: &[Vec<f64>], grid: EventGrid) -> Result<MilpInstance> {
        match self {
            Problem::Deployment(net) => build_deployment_instance(net, forecast, grid.periods()),
            Problem::Undergrounding { budget } => {
                build_undergrounding_instance(forecast, grid.totals, grid.timestamps, *budget)
            }
        }
    }

    /// Integer-optimal decision for `forecast`.
    pub fn solve(&self, forecast: &[Vec<f64>], grid: EventGrid, opts: &MilpOptions) -> Result<Decision> {
        let inst = self.build(forecast, grid)?;
        let sol = solve_milp_with(&inst, opts)?;
        Ok(match self {
            Problem::Deployment(net) => {
                Decision::Deployment(DeploymentPlan::from_solution(net, grid.periods(), &sol.x))
            }
            Problem::Undergrounding { .. } => {
                let damage = per_capita_damage(forecast, grid.totals, grid.timestamps)?;
                let selected = sol.x.iter().map(|v| *v > 0.5).collect();
                Decision::Undergrounding(canonical_selection(selected, &damage))
            }
        })
    }

    /// True cost (deployment currency or SAIDI) of a decision.
    pub fn cost(&self, decision: &Decision, truth: &[Vec<f64>], grid: EventGrid) -> Result<f64> {
        match (self, decision) {
            (Problem::Deployment(net), Decision::Deployment(plan)) => {
                deployment_cost(net, plan, truth)
            }
            (Problem::Undergrounding { .. }, Decision::Undergrounding(sel)) => {
                saidi(sel, truth, grid.totals, grid.timestamps)
            }
            _ => Err(Error::contract("decision kind does not match the problem")),
        }
    }

    pub fn relaxed(&self, forecast: &[Vec<f64>], grid: EventGrid, rho: f64) -> Result<RelaxedDecision> {
        let instance = self.build(forecast, grid)?.relax(rho);
        let solution = solve_qp(&instance)?;
        Ok(RelaxedDecision { instance, solution })
    }

    /// True cost of a relaxed decision vector and its gradient in `x`.
    pub fn relaxed_true_cost(&self, x: &[f64], truth: &[Vec<f64>], grid: EventGrid) -> Result<(f64, Vec<f64>)> {
        match self {
            Problem::Deployment(net) => {
                let periods = grid.periods();
                check_forecast(truth, net.units, periods)?;
                let lay = DeploymentLayout::new(net, periods);
                let mut grad = vec![0.0; x.len()];
                let mut cost = 0.0;
                let ng = net.generator_capacity;
                for t in 1..=periods {
                    for (e, edge) in net.edges.iter().enumerate() {
                        let i = lay.x(t, e);
                        cost += edge.cost * x[i];
                        grad[i] = edge.cost;
                    }
                    for k in 0..net.units {
                        let i = lay.q(t, k);
                        let short = truth[k][t] - x[i] * ng;
                        cost += net.operation_cost * x[i] + net.interruption_cost * short.max(0.0);
                        grad[i] = net.operation_cost
                            - if short > 0.0 {
                                net.interruption_cost * ng
                            } else {
                                0.0
                            };
                    }
                }
                Ok((cost, grad))
            }
            Problem::Undergrounding { .. } => {
                let damage = per_capita_damage(truth, grid.totals, grid.timestamps)?;
                let scale = 1.0 / damage.len() as f64;
                let grad: Vec<f64> = damage.iter().map(|d| -scale * d).collect();
                let cost = damage.iter().sum::<f64>() * scale + crate::linalg::dot(&grad, x);
                Ok((cost, grad))
            }
        }
    }

    /// Chains `dL/dx*` of a relaxed decision back to `dL/dforecast` (`K x (T+1)`).
    pub fn forecast_gradient(
        &self,
        relaxed: &RelaxedDecision,
        upstream: &[f64],
        grid: EventGrid,
    ) -> Result<Vec<Vec<f64>>> {
        let g = qp_backward(&relaxed.instance, &relaxed.solution, upstream)?;
        let periods = grid.periods();
        let units = grid.totals.len();
        let mut out = vec![vec![0.0; periods + 1]; units];
        match self {
            Problem::Deployment(net) => {
                let lay = DeploymentLayout::new(net, periods);
                for t in 1..=periods {
                    for k in 0..units {
                        out[k][t] = -g.ineq_rhs[lay.shortfall_row(t, k)] / net.generator_capacity;
                    }
                }
            }
            Problem::Undergrounding { .. } => {
                let scale = 1.0 / units as f64;
                for k in 0..units {
                    for t in 1..=periods {
                        let dt = grid.timestamps[t] - grid.timestamps[t - 1];
                        out[k][t] = -g.xi[k] * scale * dt / grid.totals[k];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn units(&self, grid: EventGrid) -> usize {
        match self {
            Problem::Deployment(net) => net.units,
            Problem::Undergrounding { .. } => grid.totals.len(),
        }
    }
}

/// Among units of equal damage, prefers selecting the lower index.
fn canonical_selection(mut selected: Vec<bool>, damage: &[f64]) -> Vec<bool> {
    let n = selected.len();
    for i in 0..n {
        if selected[i] {
            continue;
        }
        for j in i + 1..n {
            let tie = (damage[i] - damage[j]).abs() <= 1e-12 * damage[i].abs().max(1.0);
            if selected[j] && tie {
                selected.swap(i, j);
                break;
            }
        }
    }
    selected
}
