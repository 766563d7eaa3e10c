//! TOML experiment configuration. Every section and key is optional; unknown
//! keys are rejected.
//!
//! ```toml
//! [model]
//! variant = "network"      # or "compact"
//! hidden = 32
//!
//! [problem]
//! kind = "deployment"      # or "undergrounding"
//! warehouses = 1
//! travel_time = 10
//! transport_cost = 400.0
//! interruption_cost = 1.0
//! operation_cost = 2.0
//! stock_per_warehouse = 5.0
//! generator_capacity = 100.0
//! capacity = 5.0
//! budget = 1
//!
//! [training]
//! pretrain_epochs = 300
//! finetune_epochs = 20
//! lr_pretrain = 0.5
//! lr_finetune = 0.1
//! lambda = 1.0
//! batch_size = 2
//! rho = 0.1
//! clip_norm = 10.0
//!
//! [experiment]
//! seed = 0
//! seeds = [0, 1, 2]
//! events = 16
//! customers = [800.0, 1200.0, 1600.0]
//! periods = 24
//! dt = 1.0
//! noise = 0.15
//! train_fraction = 0.5
//! lags = [1, 3, 5]
//! lambdas = [0.0, 1.0, 10.0, 100.0]
//! node_limit = 100000
//! trigger = 0.01           # optional start-of-event outage fraction for ingested data
//! ```

use std::path::Path;

use gdf_core::experiment::{ExperimentConfig, ModelVariant, ProblemSpec};
use gdf_core::problems::DeploymentParams;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Deployment,
    Undergrounding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Network,
    Compact,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Option<Variant>,
    pub hidden: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: Option<ProblemKind>,
    pub warehouses: Option<usize>,
    pub travel_time: Option<usize>,
    pub transport_cost: Option<f64>,
    pub interruption_cost: Option<f64>,
    pub operation_cost: Option<f64>,
    pub stock_per_warehouse: Option<f64>,
    pub generator_capacity: Option<f64>,
    pub capacity: Option<f64>,
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub pretrain_epochs: Option<usize>,
    pub finetune_epochs: Option<usize>,
    pub lr_pretrain: Option<f64>,
    pub lr_finetune: Option<f64>,
    pub lambda: Option<f64>,
    pub batch_size: Option<usize>,
    pub rho: Option<f64>,
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub events: Option<usize>,
    pub customers: Option<Vec<f64>>,
    pub periods: Option<usize>,
    pub dt: Option<f64>,
    pub noise: Option<f64>,
    pub train_fraction: Option<f64>,
    pub lags: Option<Vec<usize>>,
    pub lambdas: Option<Vec<f64>>,
    pub node_limit: Option<usize>,
    pub trigger: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lambdas: Option<Vec<f64>>,
    pub problem: Option<ProblemKind>,
}

/// Resolved settings of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
    pub trigger: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self, over: &Overrides) -> CliResult<Settings> {
        let kind = over
            .problem
            .or(self.problem.kind)
            .unwrap_or(ProblemKind::Deployment);
        let p = &self.problem;
        let budget = p.budget.unwrap_or(1);
        let mut cfg = match kind {
            ProblemKind::Deployment => ExperimentConfig::default(),
            ProblemKind::Undergrounding => ExperimentConfig::undergrounding(budget),
        };
        if kind == ProblemKind::Deployment {
            let d = DeploymentParams::default();
            cfg.problem = ProblemSpec::Deployment {
                params: DeploymentParams {
                    interruption_cost: p.interruption_cost.unwrap_or(d.interruption_cost),
                    operation_cost: p.operation_cost.unwrap_or(d.operation_cost),
                    transport_cost: p.transport_cost.unwrap_or(d.transport_cost),
                    stock_per_warehouse: p.stock_per_warehouse.unwrap_or(d.stock_per_warehouse),
                    travel_time: p.travel_time.unwrap_or(d.travel_time),
                    generator_capacity: p.generator_capacity.unwrap_or(d.generator_capacity),
                    capacity: p.capacity.unwrap_or(d.capacity),
                },
                warehouses: p.warehouses.unwrap_or(1),
            };
        }

        cfg.model = match self.model.variant.unwrap_or(Variant::Network) {
            Variant::Network => ModelVariant::Network {
                hidden: self.model.hidden.unwrap_or(32),
            },
            Variant::Compact => ModelVariant::Compact,
        };

        let t = &self.training;
        let tc = &mut cfg.training;
        set(&mut tc.pretrain_epochs, t.pretrain_epochs);
        set(&mut tc.finetune_epochs, t.finetune_epochs);
        set(&mut tc.lr_pretrain, t.lr_pretrain);
        set(&mut tc.lr_finetune, t.lr_finetune);
        set(&mut tc.lambda, t.lambda);
        set(&mut tc.batch_size, t.batch_size);
        set(&mut tc.rho, t.rho);
        set(&mut tc.clip_norm, t.clip_norm);

        let e = &self.experiment;
        let data = &mut cfg.data;
        set(&mut data.events, e.events);
        if let Some(c) = &e.customers {
            data.units = c.len();
            data.customers = c.clone();
        }
        set(&mut data.periods, e.periods);
        set(&mut data.dt, e.dt);
        set(&mut data.noise, e.noise);
        set(&mut cfg.train_fraction, e.train_fraction);
        if let Some(l) = &e.lags {
            cfg.lags = l.clone();
        }
        if kind == ProblemKind::Undergrounding {
            cfg.lags.clear();
        }
        set(&mut cfg.milp.node_limit, e.node_limit);

        let seed = over.seed.or(e.seed).unwrap_or(0);
        let seeds = match (over.seed, &e.seeds) {
            (Some(s), _) => vec![s],
            (None, Some(v)) if !v.is_empty() => v.clone(),
            (None, _) => vec![seed],
        };
        let lambdas = over
            .lambdas
            .clone()
            .or_else(|| e.lambdas.clone())
            .unwrap_or_else(|| vec![cfg.training.lambda]);
        if let Some([single]) = over.lambdas.as_deref() {
            cfg.training.lambda = *single;
        }
        if lambdas.is_empty() {
            return Err(CliError::Config("experiment.lambdas must not be empty".into()));
        }
        if let Some(tr) = e.trigger {
            if !(tr > 0.0 && tr < 1.0) {
                return Err(CliError::Config("experiment.trigger must lie in (0, 1)".into()));
            }
        }
        let cfg = cfg.with_seed(seed);
        cfg.validate()?;
        Ok(Settings {
            experiment: cfg,
            seed,
            seeds,
            lambdas,
            trigger: e.trigger,
        })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
