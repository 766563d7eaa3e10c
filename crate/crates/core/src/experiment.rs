//! One benchmark run: generate events, train the two-stage and decision-focused
//! models, and score every method against the true-optimal decision.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::baselines::online_policy;
use crate::error::{Error, Result};
use crate::ode::{HazardEvent, Normalizer, OutageModel};
use crate::problems::{Decision, DeploymentNetwork, DeploymentParams, Problem};
use crate::solvers::MilpOptions;
use crate::synthdata::{generate, split, SyntheticConfig};
use crate::training::{
    evaluate_event, finetune_gdf, mse_loss, pretrain, reference, score, EpochRecord, EventMetrics, Labeled,
    TrainConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Deployment { params: DeploymentParams, warehouses: usize },
    Undergrounding { budget: usize },
}

impl ProblemSpec {
    pub fn instantiate(&self, units: usize) -> Result<Problem> {
        match self {
            ProblemSpec::Deployment { params, warehouses } => {
                if *warehouses == 0 {
                    return Err(Error::config("deployment needs at least one warehouse"));
                }
                let net = DeploymentNetwork::uniform(units, *warehouses, params);
                net.validate()?;
                Ok(Problem::Deployment(net))
            }
            ProblemSpec::Undergrounding { budget } => {
                if *budget > units {
                    return Err(Error::config("undergrounding budget exceeds the number of units"));
                }
                Ok(Problem::Undergrounding { budget: *budget })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    Network { hidden: usize },
    /// One trainable coefficient per rate, ignoring covariates.
    Compact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: SyntheticConfig,
    pub model: ModelVariant,
    pub model_seed: u64,
    pub train_fraction: f64,
    pub training: TrainConfig,
    pub problem: ProblemSpec,
    /// Online baseline lags; ignored for undergrounding.
    pub lags: Vec<usize>,
    pub milp: MilpOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: SyntheticConfig {
                events: 16,
                ..SyntheticConfig::default()
            },
            model: ModelVariant::Network { hidden: 32 },
            model_seed: 0,
            train_fraction: 0.5,
            training: TrainConfig::default(),
            problem: ProblemSpec::Deployment {
                params: DeploymentParams::default(),
                warehouses: 1,
            },
            lags: alloc::vec![1, 3, 5],
            milp: MilpOptions::default(),
        }
    }
}

impl ExperimentConfig {
    /// Default benchmark with the undergrounding problem and its training settings.
    pub fn undergrounding(budget: usize) -> Self {
        let mut c = ExperimentConfig {
            problem: ProblemSpec::Undergrounding { budget },
            lags: Vec::new(),
            ..ExperimentConfig::default()
        };
        c.training.rho = 0.5;
        c.training.lr_finetune = 0.4;
        c
    }

    /// Copy with every random stream keyed to `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.data.seed = seed;
        c.model_seed = seed;
        c.training.seed = seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.training.validate()?;
        if self.model == (ModelVariant::Network { hidden: 0 }) {
            return Err(Error::config("hidden width must be at least 1"));
        }
        if self.lags.contains(&0) {
            return Err(Error::config("online lags must be at least 1"));
        }
        self.problem.instantiate(self.data.units).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Optimal,
    Gdf,
    TwoStage,
    Online { lag: usize },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Optimal => "optimal".into(),
            Method::Gdf => "gdf".into(),
            Method::TwoStage => "two-stage".into(),
            Method::Online { lag } => format!("online-lag{lag}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub metrics: EventMetrics,
}

/// Mean of one method's metrics over the test events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub method: Method,
    pub mse: Option<f64>,
    pub cost: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub two_stage: OutageModel,
    pub gdf: OutageModel,
    pub curve: Vec<EpochRecord>,
}

/// Builds the untrained model with covariate scaling fit on `train`.
pub fn initial_model(cfg: &ExperimentConfig, train: &[HazardEvent]) -> Result<OutageModel> {
    let dim = train
        .first()
        .map(HazardEvent::covariate_dim)
        .ok_or_else(|| Error::contract("training needs at least one event"))?;
    let mut model = match cfg.model {
        ModelVariant::Network { hidden } => OutageModel::new_network(dim, hidden, cfg.model_seed),
        ModelVariant::Compact => OutageModel::new_compact(dim, 0.0, 0.0),
    };
    model.normalizer = Normalizer::fit(train)?;
    Ok(model)
}

/// Pretrains on MSE, then finetunes a copy with the decision-focused loss.
pub fn train_models(cfg: &ExperimentConfig, train: &[HazardEvent], problem: &Problem) -> Result<Trained> {
    let init = initial_model(cfg, train)?;
    let (two_stage, mut curve) = pretrain(&init, train, &cfg.training)?;
    let truths: Vec<Vec<Vec<f64>>> = train.iter().map(|e| e.outages.clone()).collect();
    let (gdf, fine) = finetune_gdf(&two_stage, train, &truths, problem, &cfg.training)?;
    curve.extend(fine);
    Ok(Trained { two_stage, gdf, curve })
}

/// Scores the models, and with `baselines` also the optimal and online
/// decisions, on every test event; decisions are judged against the observations.
pub fn evaluate_methods(
    cfg: &ExperimentConfig,
    problem: &Problem,
    models: &[(Method, &OutageModel)],
    test: &[HazardEvent],
    baselines: bool,
) -> Result<Vec<MethodRow>> {
    let mut rows = Vec::new();
    for ev in test {
        let item = Labeled::observed(ev);
        let best = reference(problem, &item, &cfg.milp)?;
        if baselines {
            rows.push(MethodRow {
                method: Method::Optimal,
                metrics: score(problem, &item, &best.decision, None, &best)?,
            });
        }
        for (method, model) in models {
            let (_, metrics) = evaluate_event(model, problem, &item, &best, &cfg.milp)?;
            rows.push(MethodRow {
                method: *method,
                metrics,
            });
        }
        if let (true, Problem::Deployment(net)) = (baselines, problem) {
            for &lag in &cfg.lags {
                let plan = online_policy(net, &ev.outages, item.grid(), lag)?;
                rows.push(MethodRow {
                    method: Method::Online { lag },
                    metrics: score(problem, &item, &Decision::Deployment(plan), None, &best)?,
                });
            }
        }
    }
    Ok(rows)
}

pub fn summarize(rows: &[MethodRow]) -> Vec<Summary> {
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|method| {
            let mine: Vec<&EventMetrics> = rows.iter().filter(|r| r.method == method).map(|r| &r.metrics).collect();
            let n = mine.len() as f64;
            let mean = |f: fn(&EventMetrics) -> f64| mine.iter().map(|m| f(m)).sum::<f64>() / n;
            let mses: Vec<f64> = mine.iter().filter_map(|m| m.mse).collect();
            Summary {
                method,
                mse: (!mses.is_empty()).then(|| mses.iter().sum::<f64>() / mses.len() as f64),
                cost: mean(|m| m.cost),
                regret: mean(|m| m.regret),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub trained: Trained,
    pub rows: Vec<MethodRow>,
    pub summary: Vec<Summary>,
    pub initial_mse: f64,
}

impl RunReport {
    pub fn summary_of(&self, method: Method) -> Option<&Summary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn regret_of(&self, method: Method) -> Option<f64> {
        self.summary_of(method).map(|s| s.regret)
    }
}

/// Synthetic events of the benchmark for `seed`.
pub fn benchmark_events(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<HazardEvent>> {
    let cfg = cfg.with_seed(seed);
    Ok(generate(&cfg.data)?.into_iter().map(|e| e.event).collect())
}

fn event_units(events: &[HazardEvent]) -> Result<usize> {
    events
        .first()
        .map(HazardEvent::units)
        .ok_or_else(|| Error::contract("no events"))
}

/// Full benchmark run for one seed on synthetic events.
pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    run_on_events(cfg, seed, &benchmark_events(cfg, seed)?)
}

/// Splits `events`, trains both models with streams keyed to `seed` and scores every method.
pub fn run_on_events(cfg: &ExperimentConfig, seed: u64, events: &[HazardEvent]) -> Result<RunReport> {
    let cfg = cfg.with_seed(seed);
    cfg.validate()?;
    let (train, test) = split(events, cfg.train_fraction)?;
    let problem = cfg.problem.instantiate(event_units(events)?)?;
    let initial_mse = mse_loss(&initial_model(&cfg, &train)?, &train)?;
    let trained = train_models(&cfg, &train, &problem)?;
    let models = [(Method::Gdf, &trained.gdf), (Method::TwoStage, &trained.two_stage)];
    let rows = evaluate_methods(&cfg, &problem, &models, &test, true)?;
    let summary = summarize(&rows);
    Ok(RunReport {
        seed,
        trained,
        rows,
        summary,
        initial_mse,
    })
}

/// Finetuned model and test rows for one value of `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub model: OutageModel,
    pub rows: Vec<MethodRow>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSweep {
    pub seed: u64,
    pub two_stage: OutageModel,
    /// Optimal, two-stage and online rows, shared by every point.
    pub baseline_rows: Vec<MethodRow>,
    pub baseline_summary: Vec<Summary>,
    pub points: Vec<SweepPoint>,
}

impl LambdaSweep {
    pub fn baseline_regret(&self, method: Method) -> Option<f64> {
        self.baseline_summary.iter().find(|s| s.method == method).map(|s| s.regret)
    }
}

/// One pretraining shared by a finetuning run per `lambda`.
pub fn lambda_sweep(cfg: &ExperimentConfig, seed: u64, events: &[HazardEvent], lambdas: &[f64]) -> Result<LambdaSweep> {
    let cfg = cfg.with_seed(seed);
    cfg.validate()?;
    let (train, test) = split(events, cfg.train_fraction)?;
    let problem = cfg.problem.instantiate(event_units(events)?)?;
    let init = initial_model(&cfg, &train)?;
    let (two_stage, _) = pretrain(&init, &train, &cfg.training)?;
    let baseline_rows = evaluate_methods(&cfg, &problem, &[(Method::TwoStage, &two_stage)], &test, true)?;
    let baseline_summary = summarize(&baseline_rows);
    let truths: Vec<Vec<Vec<f64>>> = train.iter().map(|e| e.outages.clone()).collect();
    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut c = cfg.clone();
        c.training.lambda = lambda;
        let (model, _) = finetune_gdf(&two_stage, &train, &truths, &problem, &c.training)?;
        let rows = evaluate_methods(&c, &problem, &[(Method::Gdf, &model)], &test, false)?;
        let summary = summarize(&rows)[0];
        points.push(SweepPoint {
            lambda,
            model,
            rows,
            summary,
        });
    }
    Ok(LambdaSweep {
        seed,
        two_stage,
        baseline_rows,
        baseline_summary,
        points,
    })
}
