//! Comparison policies: forecasts from an MSE-trained model fed to the exact
//! program, and a reactive shipper acting on lagged observations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ode::OutageModel;
use crate::problems::{Decision, DeploymentNetwork, DeploymentPlan, EventGrid, Problem};
use crate::solvers::MilpOptions;
use crate::training::Labeled;

/// Integer decision on the model's forecast.
pub fn two_stage(model: &OutageModel, problem: &Problem, item: &Labeled, opts: &MilpOptions) -> Result<Decision> {
    let forecast = model.predict_outages(item.event)?;
    problem.solve(&forecast, item.grid(), opts)
}

fn edge_index(net: &DeploymentNetwork, from: usize, to: usize) -> Option<usize> {
    net.edges.iter().position(|e| e.from == from && e.to == to)
}

/// Greedy shipper that sees outages `lag` periods late.
///
/// At period `t` every unit requests `ceil(y[t-lag] / N_g)` generators minus
/// those it holds or has in transit; warehouses serve units in ascending
/// order and only ship when the delivery lands by the horizon. Generators
/// still at units are shipped back to their source warehouse at the end.
pub fn online_policy(net: &DeploymentNetwork, observed: &[Vec<f64>], grid: EventGrid, lag: usize) -> Result<DeploymentPlan> {
    net.validate()?;
    if lag == 0 {
        return Err(Error::config("online lag must be at least one period"));
    }
    let periods = grid.periods();
    if observed.len() != net.units {
        return Err(Error::Dimension {
            context: "online observations",
            expected: net.units,
            found: observed.len(),
        });
    }
    if let Some(row) = observed.iter().find(|r| r.len() != periods + 1) {
        return Err(Error::Dimension {
            context: "online observation length",
            expected: periods + 1,
            found: row.len(),
        });
    }
    let k_units = net.units;
    let w_count = net.warehouses();
    let mut plan = DeploymentPlan::zeros(periods, net.edges.len());
    let mut stock = net.warehouse_stock.clone();
    // committed[k][w]: generators dispatched from w to k, arrived or not.
    let mut committed = vec![vec![0.0_f64; w_count]; k_units];
    // arrivals[k][t]: generators reaching unit k at period t.
    let mut arrivals = vec![vec![0.0_f64; periods + 1]; k_units];

    for t in 1..=periods {
        if t < lag {
            continue;
        }
        for k in 0..k_units {
            let y = observed[k][t - lag];
            let need = libm::ceil(y / net.generator_capacity - 1e-9).max(0.0);
            let held: f64 = committed[k].iter().sum();
            let mut demand = (need - held).max(0.0);
            for w in 0..w_count {
                if demand <= 0.0 {
                    break;
                }
                let Some(e) = edge_index(net, k_units + w, k) else {
                    continue;
                };
                let edge = net.edges[e];
                if t + edge.delay > periods || edge_index(net, k, k_units + w).is_none() {
                    continue;
                }
                let amount = demand.min(stock[w]).min(net.capacity);
                if amount <= 0.0 {
                    continue;
                }
                plan.shipments[t - 1][e] += amount;
                stock[w] -= amount;
                committed[k][w] += amount;
                arrivals[k][t + edge.delay] += amount;
                demand -= amount;
            }
        }
    }

    // Returns go out as late as edge capacity and on-hand stock allow.
    for k in 0..k_units {
        let mut on_hand = vec![0.0; periods + 1];
        let mut acc = 0.0;
        for t in 1..=periods {
            acc += arrivals[k][t];
            on_hand[t] = acc;
        }
        let mut leaving_later = 0.0;
        for w in 0..w_count {
            let mut remaining = committed[k][w];
            if remaining <= 0.0 {
                continue;
            }
            let e = edge_index(net, k, k_units + w).ok_or(Error::Infeasible)?;
            let mut t = periods;
            let mut scheduled = 0.0;
            while remaining > 0.0 {
                if t == 0 {
                    return Err(Error::Infeasible);
                }
                let room = (on_hand[t] - leaving_later - scheduled).max(0.0);
                let r = remaining.min(net.capacity - plan.shipments[t - 1][e]).min(room);
                if r > 0.0 {
                    plan.shipments[t - 1][e] += r;
                    scheduled += r;
                    remaining -= r;
                }
                if remaining > 0.0 {
                    t -= 1;
                }
            }
            leaving_later += committed[k][w];
        }
    }
    Ok(plan)
}
