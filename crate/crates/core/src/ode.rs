//! SIR-style outage compartments driven by covariate-conditioned rates.
//!
//! Each service unit carries `(U, Y, R)`: unaffected, outaged and restored
//! customers. The failure rate multiplies the `U * Y` contact term and the
//! restoration rate drains `Y` into `R`. Units evolve independently.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{sigmoid, NodeId, Tape, Tensor};
use crate::error::{Error, Result};

/// Default cap on the population-normalized failure rate `phi_U * N_k`.
pub const DEFAULT_FAILURE_CAP: f64 = 5.0;
/// Default cap on the restoration rate `phi_R`.
pub const DEFAULT_RESTORATION_CAP: f64 = 1.0;
/// Hidden width of each rate network.
pub const DEFAULT_HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompartmentState {
    pub unaffected: f64,
    pub outaged: f64,
    pub restored: f64,
}

impl CompartmentState {
    pub fn new(unaffected: f64, outaged: f64, restored: f64) -> Self {
        CompartmentState {
            unaffected,
            outaged,
            restored,
        }
    }

    pub fn total(&self) -> f64 {
        self.unaffected + self.outaged + self.restored
    }

    /// Sum matches `total` within 1e-6 relative and no component is below -1e-9.
    pub fn is_consistent(&self, total: f64) -> bool {
        (self.total() - total).abs() <= 1e-6 * total.max(1.0)
            && self.unaffected >= -1e-9
            && self.outaged >= -1e-9
            && self.restored >= -1e-9
    }
}

/// Time derivative of a [`CompartmentState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub unaffected: f64,
    pub restored: f64,
    pub outaged: f64,
}

/// Per-customer failure rate and restoration rate for one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub failure: f64,
    pub restoration: f64,
}

pub fn ode_rhs(state: &CompartmentState, rates: Rates) -> Derivative {
    let contact = state.outaged * state.unaffected;
    let unaffected = -(rates.failure * contact);
    let restored = rates.restoration * state.outaged;
    Derivative {
        unaffected,
        restored,
        outaged: -(unaffected + restored),
    }
}

/// One explicit Euler step followed by the clamp safeguard: `U` is clipped at
/// zero, `R` is capped so that `U + R <= N`, and `Y` takes the remainder.
pub fn euler_step(state: &CompartmentState, rates: Rates, total: f64, dt: f64) -> CompartmentState {
    let contact = state.outaged * state.unaffected;
    let du = -dt * (rates.failure * contact);
    let dr = dt * (rates.restoration * state.outaged);
    let u_raw = state.unaffected + du;
    let r_raw = state.restored + dr;
    let u = if u_raw > 0.0 { u_raw } else { 0.0 };
    let room = total - u;
    let r = if r_raw < room { r_raw } else { room };
    CompartmentState {
        unaffected: u,
        outaged: room - r,
        restored: r,
    }
}

pub fn check_timestamps(timestamps: &[f64]) -> Result<()> {
    if timestamps.is_empty() {
        return Err(Error::contract("at least one timestamp is required"));
    }
    for (i, w) in timestamps.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotoneTimestamps { index: i + 1 });
        }
    }
    Ok(())
}

/// Integrates one unit over `timestamps`; the first entry of the result is `state0`.
pub fn euler_integrate(
    state0: CompartmentState,
    rates: Rates,
    total: f64,
    timestamps: &[f64],
) -> Result<Vec<CompartmentState>> {
    check_timestamps(timestamps)?;
    let mut out = Vec::with_capacity(timestamps.len());
    let mut s = state0;
    out.push(s);
    for w in timestamps.windows(2) {
        s = euler_step(&s, rates, total, w[1] - w[0]);
        out.push(s);
    }
    Ok(out)
}

/// Initial state for a unit: one customer-equivalent outage at minimum, otherwise
/// the first observation, so the `Y = 0` fixed point is avoided.
pub fn seed_state(total: f64, first_observation: Option<f64>) -> CompartmentState {
    let y0 = first_observation.unwrap_or(0.0).max(1.0).min(total);
    CompartmentState::new(total - y0, y0, 0.0)
}

/// Two-layer perceptron `scale * sigmoid(w2 . relu(W1^T z + b1) + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateNetwork {
    pub input_dim: usize,
    pub hidden: usize,
    /// Row-major `input_dim x hidden`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub rate_scale: f64,
}

impl RateNetwork {
    pub fn zeros(input_dim: usize, hidden: usize, rate_scale: f64) -> Self {
        RateNetwork {
            input_dim,
            hidden,
            w1: vec![0.0; input_dim * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            rate_scale,
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rate_scale: f64, rng: &mut R) -> Self {
        let mut net = RateNetwork::zeros(input_dim, hidden, rate_scale);
        let b_in = 1.0 / libm::sqrt(input_dim.max(1) as f64);
        let b_hid = 1.0 / libm::sqrt(hidden.max(1) as f64);
        for w in net.w1.iter_mut().chain(net.b1.iter_mut()) {
            *w = rng.random_range(-b_in..=b_in);
        }
        for w in net.w2.iter_mut() {
            *w = rng.random_range(-b_hid..=b_hid);
        }
        net.b2 = rng.random_range(-b_hid..=b_hid);
        net
    }

    pub fn num_params(&self) -> usize {
        self.input_dim * self.hidden + 2 * self.hidden + 1
    }

    /// Pre-sigmoid output.
    fn logit(&self, z: &[f64]) -> f64 {
        let h = self.hidden;
        let mut out = 0.0;
        for j in 0..h {
            let mut acc = 0.0;
            for (p, &zp) in z.iter().enumerate() {
                if zp != 0.0 {
                    acc += zp * self.w1[p * h + j];
                }
            }
            let a = acc + self.b1[j];
            let a = if a > 0.0 { a } else { 0.0 };
            if a != 0.0 {
                out += a * self.w2[j];
            }
        }
        out + self.b2
    }

    pub fn apply(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.input_dim {
            return Err(Error::Dimension {
                context: "rate network input",
                expected: self.input_dim,
                found: z.len(),
            });
        }
        Ok(self.rate_scale * sigmoid(self.logit(z)))
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
    }

    fn read_params(&mut self, params: &[f64]) -> usize {
        let (p, h) = (self.input_dim, self.hidden);
        let mut at = 0;
        self.w1.copy_from_slice(&params[at..at + p * h]);
        at += p * h;
        self.b1.copy_from_slice(&params[at..at + h]);
        at += h;
        self.w2.copy_from_slice(&params[at..at + h]);
        at += h;
        self.b2 = params[at];
        at + 1
    }
}

/// Either a covariate-conditioned network or the compact single-coefficient form.
#[derive(Debug, Clone, PartialEq)]
pub enum RateModel {
    Network(RateNetwork),
    /// `rate_scale * sigmoid(logit)`, independent of covariates.
    Constant { logit: f64, rate_scale: f64 },
}

impl RateModel {
    pub fn rate_scale(&self) -> f64 {
        match self {
            RateModel::Network(n) => n.rate_scale,
            RateModel::Constant { rate_scale, .. } => *rate_scale,
        }
    }

    pub fn set_rate_scale(&mut self, scale: f64) {
        match self {
            RateModel::Network(n) => n.rate_scale = scale,
            RateModel::Constant { rate_scale, .. } => *rate_scale = scale,
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            RateModel::Network(n) => n.num_params(),
            RateModel::Constant { .. } => 1,
        }
    }

    pub fn apply(&self, z: &[f64]) -> Result<f64> {
        match self {
            RateModel::Network(n) => n.apply(z),
            RateModel::Constant { logit, rate_scale } => Ok(rate_scale * sigmoid(*logit)),
        }
    }
}

/// Per-feature z-score statistics fitted on training covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(events: &[HazardEvent]) -> Result<Self> {
        let dim = events
            .first()
            .map(HazardEvent::covariate_dim)
            .ok_or_else(|| Error::contract("cannot fit normalizer on zero events"))?;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0.0;
        for ev in events {
            for z in &ev.covariates {
                if z.len() != dim {
                    return Err(Error::Dimension {
                        context: "covariate vector",
                        expected: dim,
                        found: z.len(),
                    });
                }
                for (p, v) in z.iter().enumerate() {
                    sum[p] += v;
                    sq[p] += v * v;
                }
                n += 1.0;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = (s / n - m * m).max(0.0);
                let sd = libm::sqrt(var);
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalizer { mean, std })
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Rate networks for failures and restorations plus the covariate normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageModel {
    /// Output is the population-normalized failure rate `phi_U * N_k`.
    pub failure: RateModel,
    pub restoration: RateModel,
    pub normalizer: Normalizer,
}

impl OutageModel {
    pub fn new_network(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let failure = RateNetwork::init(input_dim, hidden, DEFAULT_FAILURE_CAP, &mut rng);
        let restoration = RateNetwork::init(input_dim, hidden, DEFAULT_RESTORATION_CAP, &mut rng);
        OutageModel {
            failure: RateModel::Network(failure),
            restoration: RateModel::Network(restoration),
            normalizer: Normalizer::identity(input_dim),
        }
    }

    /// Compact two-coefficient variant.
    pub fn new_compact(input_dim: usize, failure_logit: f64, restoration_logit: f64) -> Self {
        OutageModel {
            failure: RateModel::Constant {
                logit: failure_logit,
                rate_scale: DEFAULT_FAILURE_CAP,
            },
            restoration: RateModel::Constant {
                logit: restoration_logit,
                rate_scale: DEFAULT_RESTORATION_CAP,
            },
            normalizer: Normalizer::identity(input_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.normalizer.mean.len()
    }

    pub fn num_params(&self) -> usize {
        self.failure.num_params() + self.restoration.num_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for m in [&self.failure, &self.restoration] {
            match m {
                RateModel::Network(n) => n.write_params(&mut out),
                RateModel::Constant { logit, .. } => out.push(*logit),
            }
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension {
                context: "model parameter vector",
                expected: self.num_params(),
                found: params.len(),
            });
        }
        let mut at = 0;
        for m in [&mut self.failure, &mut self.restoration] {
            match m {
                RateModel::Network(n) => at += n.read_params(&params[at..]),
                RateModel::Constant { logit, .. } => {
                    *logit = params[at];
                    at += 1;
                }
            }
        }
        Ok(())
    }

    /// Rates for a unit with raw covariates `z` and `total` customers.
    pub fn rates(&self, z: &[f64], total: f64) -> Result<Rates> {
        if z.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "covariate vector",
                expected: self.input_dim(),
                found: z.len(),
            });
        }
        let zn = self.normalizer.apply(z);
        Ok(Rates {
            failure: self.failure.apply(&zn)? / total,
            restoration: self.restoration.apply(&zn)?,
        })
    }

    /// Predicted trajectories for every unit, seeded from the first observation.
    pub fn predict_event(&self, event: &HazardEvent) -> Result<Vec<Vec<CompartmentState>>> {
        event.units_iter().try_fold(Vec::new(), |mut acc, k| {
            let rates = self.rates(&event.covariates[k], event.totals[k])?;
            let s0 = seed_state(event.totals[k], event.outages[k].first().copied());
            acc.push(euler_integrate(
                s0,
                rates,
                event.totals[k],
                &event.timestamps,
            )?);
            Ok(acc)
        })
    }

    /// Predicted outage counts `Y_k(t_j)`, `K x (T+1)`.
    pub fn predict_outages(&self, event: &HazardEvent) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .predict_event(event)?
            .into_iter()
            .map(|traj| traj.iter().map(|s| s.outaged).collect())
            .collect())
    }
}

/// One hazard event: static per-unit covariates and observed outage series.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardEvent {
    pub id: usize,
    /// `K x p` raw covariates.
    pub covariates: Vec<Vec<f64>>,
    /// Customers per unit.
    pub totals: Vec<f64>,
    /// `t_0 .. t_T`, event-relative.
    pub timestamps: Vec<f64>,
    /// `K x (T+1)` observed outaged customers.
    pub outages: Vec<Vec<f64>>,
}

impl HazardEvent {
    pub fn units(&self) -> usize {
        self.totals.len()
    }

    fn units_iter(&self) -> core::ops::Range<usize> {
        0..self.units()
    }

    /// Number of periods `T` (timestamps minus one).
    pub fn periods(&self) -> usize {
        self.timestamps.len().saturating_sub(1)
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariates.first().map_or(0, Vec::len)
    }

    /// Step length of period `t` (1-based): `t_t - t_{t-1}`.
    pub fn step(&self, t: usize) -> f64 {
        self.timestamps[t] - self.timestamps[t - 1]
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.units();
        if k == 0 {
            return Err(Error::contract("event has no units"));
        }
        check_timestamps(&self.timestamps)?;
        for (what, len) in [("covariate rows", self.covariates.len()), ("outage rows", self.outages.len())] {
            if len != k {
                return Err(Error::Dimension {
                    context: what,
                    expected: k,
                    found: len,
                });
            }
        }
        let p = self.covariate_dim();
        for (unit, z) in self.covariates.iter().enumerate() {
            if z.len() != p {
                return Err(Error::Dimension {
                    context: "covariate vector",
                    expected: p,
                    found: z.len(),
                });
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::contract(alloc::format!(
                    "non-finite covariate for unit {unit}"
                )));
            }
        }
        for (unit, (series, &total)) in self.outages.iter().zip(&self.totals).enumerate() {
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::contract(alloc::format!(
                    "unit {unit} has non-positive customer total"
                )));
            }
            if series.len() != self.timestamps.len() {
                return Err(Error::Dimension {
                    context: "outage series length",
                    expected: self.timestamps.len(),
                    found: series.len(),
                });
            }
            if let Some(j) = series.iter().position(|&y| !(0.0..=total).contains(&y)) {
                return Err(Error::contract(alloc::format!(
                    "outage count out of [0, N] for unit {unit} at index {j}"
                )));
            }
        }
        Ok(())
    }

    /// Drops leading timestamps until the system-wide outage fraction reaches
    /// `threshold`, then re-bases time so the trigger point is `t = 0`.
    pub fn apply_trigger(&self, threshold: f64) -> Result<HazardEvent> {
        let total: f64 = self.totals.iter().sum();
        let start = (0..self.timestamps.len())
            .find(|&j| {
                let out: f64 = self.outages.iter().map(|s| s[j]).sum();
                out / total >= threshold
            })
            .ok_or_else(|| {
                Error::contract(alloc::format!(
                    "event {} never reaches the {threshold} outage trigger",
                    self.id
                ))
            })?;
        if self.timestamps.len() - start < 2 {
            return Err(Error::contract(alloc::format!(
                "event {} has fewer than two timestamps after the trigger",
                self.id
            )));
        }
        let t0 = self.timestamps[start];
        Ok(HazardEvent {
            id: self.id,
            covariates: self.covariates.clone(),
            totals: self.totals.clone(),
            timestamps: self.timestamps[start..].iter().map(|t| t - t0).collect(),
            outages: self.outages.iter().map(|s| s[start..].to_vec()).collect(),
        })
    }
}

/// Parameter leaves of one rate model on a tape.
#[derive(Debug, Clone, Copy)]
enum RateLeaves {
    Network {
        w1: NodeId,
        b1: NodeId,
        w2: NodeId,
        b2: NodeId,
    },
    Constant {
        logit: NodeId,
    },
}

/// An [`OutageModel`] whose parameters live on a tape as trainable leaves.
#[derive(Debug, Clone)]
pub struct TapedModel {
    failure: RateLeaves,
    restoration: RateLeaves,
    failure_scale: f64,
    restoration_scale: f64,
    input_dim: usize,
}

/// Taped forward pass for one event.
#[derive(Debug, Clone)]
pub struct EventGraph {
    /// Predicted outages per timestamp, each of shape `[K, 1]`.
    pub outaged: Vec<NodeId>,
    pub unaffected: Vec<NodeId>,
    pub restored: Vec<NodeId>,
}

fn net_leaves(tape: &mut Tape, model: &RateModel) -> Result<RateLeaves> {
    Ok(match model {
        RateModel::Network(n) => RateLeaves::Network {
            w1: tape.leaf(Tensor::matrix(n.input_dim, n.hidden, n.w1.clone())?),
            b1: tape.leaf(Tensor::matrix(1, n.hidden, n.b1.clone())?),
            w2: tape.leaf(Tensor::matrix(n.hidden, 1, n.w2.clone())?),
            b2: tape.leaf(Tensor::matrix(1, 1, vec![n.b2])?),
        },
        RateModel::Constant { logit, .. } => RateLeaves::Constant {
            logit: tape.leaf(Tensor::matrix(1, 1, vec![*logit])?),
        },
    })
}

impl TapedModel {
    pub fn new(tape: &mut Tape, model: &OutageModel) -> Result<Self> {
        Ok(TapedModel {
            failure: net_leaves(tape, &model.failure)?,
            restoration: net_leaves(tape, &model.restoration)?,
            failure_scale: model.failure.rate_scale(),
            restoration_scale: model.restoration.rate_scale(),
            input_dim: model.input_dim(),
        })
    }

    fn rate_nodes(
        tape: &mut Tape,
        leaves: RateLeaves,
        scale: f64,
        z: NodeId,
        ones: NodeId,
    ) -> Result<NodeId> {
        let logit = match leaves {
            RateLeaves::Network { w1, b1, w2, b2 } => {
                let zw = tape.matmul(z, w1)?;
                let bias = tape.matmul(ones, b1)?;
                let pre = tape.add(zw, bias)?;
                let h = tape.relu(pre)?;
                let hw = tape.matmul(h, w2)?;
                let bias2 = tape.matmul(ones, b2)?;
                tape.add(hw, bias2)?
            }
            RateLeaves::Constant { logit } => tape.matmul(ones, logit)?,
        };
        let s = tape.sigmoid(logit)?;
        tape.scale(s, scale)
    }

    /// Records the Euler unroll of every unit of `event` (seeded from its first
    /// observation) and returns the per-timestamp compartment nodes.
    pub fn record_event(
        &self,
        tape: &mut Tape,
        normalizer: &Normalizer,
        event: &HazardEvent,
    ) -> Result<EventGraph> {
        let k = event.units();
        check_timestamps(&event.timestamps)?;
        let mut zdata = Vec::with_capacity(k * self.input_dim);
        for z in &event.covariates {
            if z.len() != self.input_dim {
                return Err(Error::Dimension {
                    context: "covariate vector",
                    expected: self.input_dim,
                    found: z.len(),
                });
            }
            zdata.extend(normalizer.apply(z));
        }
        let z = tape.constant(Tensor::matrix(k, self.input_dim, zdata)?);
        let ones = tape.constant(Tensor::column(vec![1.0; k]));

        let per_capita = Self::rate_nodes(tape, self.failure, self.failure_scale, z, ones)?;
        let inv_n = tape.constant(Tensor::column(event.totals.iter().map(|n| 1.0 / n).collect()));
        let phi_u = tape.mul(per_capita, inv_n)?;
        let phi_r = Self::rate_nodes(tape, self.restoration, self.restoration_scale, z, ones)?;

        let n = tape.constant(Tensor::column(event.totals.clone()));
        let seeds: Vec<CompartmentState> = (0..k)
            .map(|u| seed_state(event.totals[u], event.outages[u].first().copied()))
            .collect();
        let mut u = tape.constant(Tensor::column(seeds.iter().map(|s| s.unaffected).collect()));
        let mut y = tape.constant(Tensor::column(seeds.iter().map(|s| s.outaged).collect()));
        let mut r = tape.constant(Tensor::column(seeds.iter().map(|s| s.restored).collect()));

        let mut graph = EventGraph {
            outaged: vec![y],
            unaffected: vec![u],
            restored: vec![r],
        };
        for w in event.timestamps.windows(2) {
            let dt = w[1] - w[0];
            let contact = tape.mul(y, u)?;
            let infl = tape.mul(phi_u, contact)?;
            let du = tape.scale(infl, -dt)?;
            let u_raw = tape.add(u, du)?;
            let rest = tape.mul(phi_r, y)?;
            let dr = tape.scale(rest, dt)?;
            let r_raw = tape.add(r, dr)?;
            let u_new = tape.hinge(u_raw)?;
            let room = tape.sub(n, u_new)?;
            let over = tape.sub(r_raw, room)?;
            let excess = tape.hinge(over)?;
            let r_new = tape.sub(r_raw, excess)?;
            let y_new = tape.sub(room, r_new)?;
            u = u_new;
            r = r_new;
            y = y_new;
            graph.outaged.push(y);
            graph.unaffected.push(u);
            graph.restored.push(r);
        }
        Ok(graph)
    }

    /// Flattens leaf gradients in the same order as [`OutageModel::params`].
    pub fn flat_gradient(&self, grads: &crate::autodiff::Gradients, tape: &Tape) -> Vec<f64> {
        let mut out = Vec::new();
        for leaves in [self.failure, self.restoration] {
            let ids: Vec<NodeId> = match leaves {
                RateLeaves::Network { w1, b1, w2, b2 } => vec![w1, b1, w2, b2],
                RateLeaves::Constant { logit } => vec![logit],
            };
            for id in ids {
                let shape = tape.value(id).shape().to_vec();
                out.extend_from_slice(grads.get_or_zeros(id, &shape).data());
            }
        }
        out
    }
}
