//! MSE pretraining, decision-focused finetuning and evaluation.
//!
//! Optimization targets are scale-free: the prediction term divides each
//! squared error by `N_k^2`, and the regret term divides by the cost of taking
//! no action on the event. Reported metrics use raw units.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{NodeId, Tape, Tensor};
use crate::error::{Error, Result};
use crate::ode::{HazardEvent, OutageModel, TapedModel};
use crate::problems::{Decision, EventGrid, Problem};
use crate::solvers::MilpOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub lr_pretrain: f64,
    pub lr_finetune: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub rho: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            pretrain_epochs: 300,
            finetune_epochs: 20,
            lr_pretrain: 0.5,
            lr_finetune: 0.1,
            lambda: 1.0,
            batch_size: 2,
            rho: 0.1,
            clip_norm: 10.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.lr_pretrain) || !pos(self.lr_finetune) {
            return Err(Error::config("learning rates must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !pos(self.rho) {
            return Err(Error::config("rho must be positive"));
        }
        if !pos(self.clip_norm) {
            return Err(Error::config("clip norm must be positive"));
        }
        Ok(())
    }
}

/// An event paired with the outage series its decisions are judged against.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub event: &'a HazardEvent,
    pub truth: &'a [Vec<f64>],
}

impl<'a> Labeled<'a> {
    /// Judges decisions against the event's own observations.
    pub fn observed(event: &'a HazardEvent) -> Self {
        Labeled {
            event,
            truth: &event.outages,
        }
    }

    pub fn grid(&self) -> EventGrid<'a> {
        EventGrid {
            totals: &self.event.totals,
            timestamps: &self.event.timestamps,
        }
    }
}

/// Mean squared error over units and periods `1..T` of every event.
pub fn mse_loss(model: &OutageModel, events: &[HazardEvent]) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::contract("MSE needs at least one event"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for ev in events {
        let pred = model.predict_outages(ev)?;
        for (p, y) in pred.iter().zip(&ev.outages) {
            for j in 1..y.len() {
                let d = y[j] - p[j];
                sum += d * d;
                count += 1;
            }
        }
    }
    Ok(sum / count.max(1) as f64)
}

fn clip(grad: &mut [f64], max_norm: f64) {
    let norm = crate::linalg::norm2(grad);
    if norm > max_norm {
        let f = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= f;
        }
    }
}

fn column_constant(tape: &mut Tape, data: Vec<f64>) -> NodeId {
    tape.constant(Tensor::column(data))
}

fn accumulate(tape: &mut Tape, acc: Option<NodeId>, term: NodeId) -> Result<NodeId> {
    match acc {
        None => Ok(term),
        Some(a) => tape.add(a, term),
    }
}

/// Scaled MSE `mean ((y - yhat) / N_k)^2` over a batch and its parameter gradient.
pub fn scaled_mse_and_grad(model: &OutageModel, events: &[&HazardEvent]) -> Result<(f64, Vec<f64>)> {
    if events.is_empty() {
        return Err(Error::contract("MSE needs at least one event"));
    }
    let mut tape = Tape::new();
    let taped = TapedModel::new(&mut tape, model)?;
    let mut total: Option<NodeId> = None;
    let mut count = 0usize;
    for ev in events {
        let graph = taped.record_event(&mut tape, &model.normalizer, ev)?;
        let inv_n = column_constant(&mut tape, ev.totals.iter().map(|n| 1.0 / n).collect());
        for (j, &yhat) in graph.outaged.iter().enumerate().skip(1) {
            let obs = column_constant(&mut tape, ev.outages.iter().map(|s| s[j]).collect());
            let diff = tape.sub(yhat, obs)?;
            let rel = tape.mul(diff, inv_n)?;
            let sq = tape.square(rel)?;
            let s = tape.sum(sq)?;
            total = Some(accumulate(&mut tape, total, s)?);
            count += ev.units();
        }
    }
    let total = total.ok_or_else(|| Error::contract("events have no periods"))?;
    let loss = tape.scale(total, 1.0 / count as f64)?;
    let grads = tape.backward(loss)?;
    Ok((tape.value(loss).item(), taped.flat_gradient(&grads, &tape)))
}

/// Cost of doing nothing on an event; the regret normalizer.
pub fn inaction_cost(problem: &Problem, item: &Labeled) -> Result<f64> {
    let grid = item.grid();
    let idle = match problem {
        Problem::Deployment(net) => Decision::Deployment(crate::problems::DeploymentPlan::zeros(
            grid.periods(),
            net.edges.len(),
        )),
        Problem::Undergrounding { .. } => Decision::Undergrounding(vec![false; item.event.units()]),
    };
    let c = problem.cost(&idle, item.truth, grid)?;
    Ok(c.max(1e-9))
}

/// Relaxed decision loss `g(x_rho(yhat), S)` of an event and its parameter
/// gradient, both divided by `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct GdfStep {
    /// True cost of the relaxed decision, unscaled.
    pub relaxed_cost: f64,
    pub gradient: Vec<f64>,
}

pub fn gdf_cost_and_grad(
    model: &OutageModel,
    item: &Labeled,
    problem: &Problem,
    rho: f64,
    scale: f64,
) -> Result<GdfStep> {
    let ev = item.event;
    let grid = item.grid();
    let mut tape = Tape::new();
    let taped = TapedModel::new(&mut tape, model)?;
    let graph = taped.record_event(&mut tape, &model.normalizer, ev)?;
    let k = ev.units();
    let forecast: Vec<Vec<f64>> = (0..k)
        .map(|u| graph.outaged.iter().map(|&id| tape.value(id).data()[u]).collect())
        .collect();
    let relaxed = problem.relaxed(&forecast, grid, rho)?;
    let (cost, dcost) = problem.relaxed_true_cost(&relaxed.solution.x, item.truth, grid)?;
    let dforecast = problem.forecast_gradient(&relaxed, &dcost, grid)?;

    // Scalar surrogate whose gradient in yhat is dforecast / scale.
    let mut total: Option<NodeId> = None;
    for (j, &yhat) in graph.outaged.iter().enumerate().skip(1) {
        let w = column_constant(&mut tape, dforecast.iter().map(|row| row[j] / scale).collect());
        let prod = tape.mul(w, yhat)?;
        let s = tape.sum(prod)?;
        total = Some(accumulate(&mut tape, total, s)?);
    }
    let gradient = match total {
        Some(t) => {
            let grads = tape.backward(t)?;
            taped.flat_gradient(&grads, &tape)
        }
        None => vec![0.0; model.num_params()],
    };
    if !cost.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("decision-focused gradient"));
    }
    Ok(GdfStep {
        relaxed_cost: cost,
        gradient,
    })
}

/// Relaxed-decision regret of a forecast model against the relaxed decision
/// made on the truth itself.
pub fn gdf_loss(model: &OutageModel, item: &Labeled, problem: &Problem, rho: f64) -> Result<f64> {
    let grid = item.grid();
    let pred = model.predict_outages(item.event)?;
    let mine = problem.relaxed(&pred, grid, rho)?;
    let reference = problem.relaxed(item.truth, grid, rho)?;
    let (a, _) = problem.relaxed_true_cost(&mine.solution.x, item.truth, grid)?;
    let (b, _) = problem.relaxed_true_cost(&reference.solution.x, item.truth, grid)?;
    Ok(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Finetune,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    /// Raw training MSE after the epoch.
    pub mse: f64,
    /// Mean relaxed decision cost over training events during the epoch (finetune only).
    pub relaxed_cost: Option<f64>,
}

fn check_finite(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { epoch })
    }
}

fn apply_step(model: &mut OutageModel, grad: &[f64], lr: f64, epoch: usize) -> Result<()> {
    let mut p = model.params();
    for (v, g) in p.iter_mut().zip(grad) {
        *v -= lr * g;
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { epoch });
    }
    model.set_params(&p)
}

fn mse_epoch(
    model: &mut OutageModel,
    events: &[HazardEvent],
    cfg: &TrainConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
    epoch: usize,
    clip_norm: Option<f64>,
) -> Result<()> {
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.shuffle(rng);
    for batch in order.chunks(cfg.batch_size) {
        let refs: Vec<&HazardEvent> = batch.iter().map(|&i| &events[i]).collect();
        let (loss, mut grad) = scaled_mse_and_grad(model, &refs)?;
        check_finite(loss, epoch)?;
        if let Some(c) = clip_norm {
            clip(&mut grad, c);
        }
        apply_step(model, &grad, lr, epoch)?;
    }
    Ok(())
}

/// Mini-batch gradient descent on the scaled MSE.
pub fn pretrain(
    model: &OutageModel,
    events: &[HazardEvent],
    cfg: &TrainConfig,
) -> Result<(OutageModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    if events.is_empty() {
        return Err(Error::contract("pretraining needs at least one event"));
    }
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.pretrain_epochs);
    for epoch in 1..=cfg.pretrain_epochs {
        mse_epoch(&mut model, events, cfg, cfg.lr_pretrain, &mut rng, epoch, None)?;
        let mse = mse_loss(&model, events)?;
        check_finite(mse, epoch)?;
        curve.push(EpochRecord {
            phase: Phase::Pretrain,
            epoch,
            mse,
            relaxed_cost: None,
        });
    }
    Ok((model, curve))
}

/// Per-event decision-focused steps followed by MSE steps, on the loss
/// `(regret + lambda * mse) / (1 + lambda)`.
pub fn finetune_gdf(
    model: &OutageModel,
    events: &[HazardEvent],
    truths: &[Vec<Vec<f64>>],
    problem: &Problem,
    cfg: &TrainConfig,
) -> Result<(OutageModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    if events.len() != truths.len() {
        return Err(Error::Dimension {
            context: "finetune truths",
            expected: events.len(),
            found: truths.len(),
        });
    }
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let items: Vec<Labeled> = events
        .iter()
        .zip(truths)
        .map(|(event, truth)| Labeled { event, truth })
        .collect();
    let scales: Vec<f64> = items
        .iter()
        .map(|it| inaction_cost(problem, it))
        .collect::<Result<_>>()?;
    let mut curve = Vec::with_capacity(cfg.finetune_epochs);
    for epoch in 1..=cfg.finetune_epochs {
        let mut cost_sum = 0.0;
        for (item, &scale) in items.iter().zip(&scales) {
            let mut step = gdf_cost_and_grad(&model, item, problem, cfg.rho, scale)?;
            check_finite(step.relaxed_cost, epoch)?;
            cost_sum += step.relaxed_cost;
            clip(&mut step.gradient, cfg.clip_norm);
            apply_step(&mut model, &step.gradient, cfg.lr_finetune / (1.0 + cfg.lambda), epoch)?;
        }
        if cfg.lambda > 0.0 {
            let lr = cfg.lr_finetune * cfg.lambda / (1.0 + cfg.lambda);
            mse_epoch(&mut model, events, cfg, lr, &mut rng, epoch, Some(cfg.clip_norm))?;
        }
        let mse = mse_loss(&model, events)?;
        check_finite(mse, epoch)?;
        curve.push(EpochRecord {
            phase: Phase::Finetune,
            epoch,
            mse,
            relaxed_cost: Some(cost_sum / items.len().max(1) as f64),
        });
    }
    Ok((model, curve))
}

/// Metrics of one decision on one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventMetrics {
    pub event_id: usize,
    /// Forecast MSE; absent for methods that do not forecast.
    pub mse: Option<f64>,
    pub cost: f64,
    pub optimal_cost: f64,
    pub regret: f64,
}

/// The true-optimal decision and its cost for an event, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub decision: Decision,
    pub cost: f64,
}

pub fn reference(problem: &Problem, item: &Labeled, opts: &MilpOptions) -> Result<Reference> {
    let grid = item.grid();
    let decision = problem.solve(item.truth, grid, opts)?;
    let cost = problem.cost(&decision, item.truth, grid)?;
    Ok(Reference { decision, cost })
}

/// Scores a decision against the cached reference.
pub fn score(
    problem: &Problem,
    item: &Labeled,
    decision: &Decision,
    forecast_mse: Option<f64>,
    reference: &Reference,
) -> Result<EventMetrics> {
    let cost = problem.cost(decision, item.truth, item.grid())?;
    Ok(EventMetrics {
        event_id: item.event.id,
        mse: forecast_mse,
        cost,
        optimal_cost: reference.cost,
        regret: crate::problems::regret(cost, reference.cost),
    })
}

/// Forecast, integer decision and metrics of `model` on one event.
pub fn evaluate_event(
    model: &OutageModel,
    problem: &Problem,
    item: &Labeled,
    reference: &Reference,
    opts: &MilpOptions,
) -> Result<(Decision, EventMetrics)> {
    let forecast = model.predict_outages(item.event)?;
    let mse = mse_loss(model, core::slice::from_ref(item.event))?;
    let decision = problem.solve(&forecast, item.grid(), opts)?;
    let metrics = score(problem, item, &decision, Some(mse), reference)?;
    Ok((decision, metrics))
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var))
}
