//! Synthetic hazard events from a ground-truth SIR process whose rates are a
//! fixed logistic function of per-unit weather-severity covariates.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ode::{euler_step, CompartmentState, HazardEvent, Rates};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub units: usize,
    /// Customers per unit; length `units`.
    pub customers: Vec<f64>,
    pub covariate_dim: usize,
    pub periods: usize,
    pub dt: f64,
    pub events: usize,
    /// Population-normalized failure rate scale `a` in `phi_U = a sigmoid(w.z + c) / N`.
    pub failure_scale: f64,
    pub failure_weights: Vec<f64>,
    pub failure_bias: f64,
    pub restoration_scale: f64,
    pub restoration_weights: Vec<f64>,
    pub restoration_bias: f64,
    /// Standard deviation of the multiplicative lognormal observation noise.
    pub noise: f64,
    /// Initial outaged fraction of each unit.
    pub seed_fraction: f64,
    /// Integration substeps per period for the hidden trajectory.
    pub substeps: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            units: 3,
            customers: alloc::vec![800.0, 1200.0, 1600.0],
            covariate_dim: 3,
            periods: 24,
            dt: 1.0,
            events: 8,
            failure_scale: 1.2,
            failure_weights: alloc::vec![1.2, 0.8, -0.4],
            failure_bias: 0.0,
            restoration_scale: 0.3,
            restoration_weights: alloc::vec![-0.6, 0.3, 0.2],
            restoration_bias: -0.5,
            noise: 0.15,
            seed_fraction: 0.02,
            substeps: 8,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.units == 0 {
            return Err(Error::config("synthetic data needs at least one unit"));
        }
        if self.events < 2 {
            return Err(Error::config("synthetic data needs at least two events"));
        }
        if self.customers.len() != self.units {
            return Err(Error::config("customers must list one total per unit"));
        }
        if self.customers.iter().any(|n| !(*n >= 1.0 && n.is_finite())) {
            return Err(Error::config("customer totals must be at least 1"));
        }
        if self.covariate_dim == 0
            || self.failure_weights.len() != self.covariate_dim
            || self.restoration_weights.len() != self.covariate_dim
        {
            return Err(Error::config("rate weights must match the covariate dimension"));
        }
        if self.periods == 0 || !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("horizon and step must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise level must be nonnegative"));
        }
        if !(self.seed_fraction > 0.0 && self.seed_fraction < 1.0) {
            return Err(Error::config("seed fraction must lie in (0, 1)"));
        }
        if self.substeps == 0 {
            return Err(Error::config("substeps must be at least 1"));
        }
        if !(self.failure_scale >= 0.0 && self.restoration_scale >= 0.0) {
            return Err(Error::config("rate scales must be nonnegative"));
        }
        Ok(())
    }

    /// Ground-truth rates for raw covariates in `[0, 1]^p`.
    pub fn true_rates(&self, z: &[f64], total: f64) -> Rates {
        // Uniform[0,1] standardized to zero mean, unit variance.
        let zs: Vec<f64> = z.iter().map(|v| (v - 0.5) * libm::sqrt(12.0)).collect();
        let lin = |w: &[f64], b: f64| w.iter().zip(&zs).map(|(a, x)| a * x).sum::<f64>() + b;
        Rates {
            failure: self.failure_scale * crate::autodiff::sigmoid(lin(&self.failure_weights, self.failure_bias)) / total,
            restoration: self.restoration_scale
                * crate::autodiff::sigmoid(lin(&self.restoration_weights, self.restoration_bias)),
        }
    }
}

/// An observed event together with its hidden noise-free outage series.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEvent {
    pub event: HazardEvent,
    /// `K x (T+1)` true outaged customers.
    pub truth: Vec<Vec<f64>>,
}

pub fn generate_event(config: &SyntheticConfig, index: usize) -> Result<SyntheticEvent> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);
    let k = config.units;
    let covariates: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..config.covariate_dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let timestamps: Vec<f64> = (0..=config.periods).map(|j| j as f64 * config.dt).collect();
    let h = config.dt / config.substeps as f64;
    let mut truth = Vec::with_capacity(k);
    for (z, &n) in covariates.iter().zip(&config.customers) {
        let rates = config.true_rates(z, n);
        let y0 = config.seed_fraction * n;
        let mut s = CompartmentState::new(n - y0, y0, 0.0);
        let mut series = Vec::with_capacity(config.periods + 1);
        series.push(s.outaged);
        for _ in 0..config.periods {
            for _ in 0..config.substeps {
                s = euler_step(&s, rates, n, h);
            }
            series.push(s.outaged);
        }
        truth.push(series);
    }
    let outages: Vec<Vec<f64>> = truth
        .iter()
        .zip(&config.customers)
        .map(|(series, &n)| {
            series
                .iter()
                .map(|&y| {
                    if config.noise == 0.0 {
                        return y;
                    }
                    let eps: f64 = rng.sample(StandardNormal);
                    (y * libm::exp(config.noise * eps)).clamp(0.0, n)
                })
                .collect()
        })
        .collect();
    let event = HazardEvent {
        id: index,
        covariates,
        totals: config.customers.clone(),
        timestamps,
        outages,
    };
    event.validate()?;
    Ok(SyntheticEvent { event, truth })
}

pub fn generate(config: &SyntheticConfig) -> Result<Vec<SyntheticEvent>> {
    config.validate()?;
    (0..config.events).map(|i| generate_event(config, i)).collect()
}

/// Deterministic split by index: the first `round(fraction * n)` events train,
/// clamped so both sides are nonempty.
pub fn split<T: Clone>(events: &[T], train_fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    let n = events.len();
    if n < 2 {
        return Err(Error::contract("splitting needs at least two events"));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::config("train fraction must lie in [0, 1]"));
    }
    let cut = (libm::round(train_fraction * n as f64) as usize).clamp(1, n - 1);
    Ok((events[..cut].to_vec(), events[cut..].to_vec()))
}
