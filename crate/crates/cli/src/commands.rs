//! The `generate`, `train`, `evaluate` and `sweep` commands.

use std::fs;
use std::path::Path;

use gdf_core::experiment::{
    benchmark_events, evaluate_methods, lambda_sweep, summarize, train_models, LambdaSweep, Method, MethodRow,
};
use gdf_core::ode::{HazardEvent, OutageModel};
use gdf_core::synthdata::{generate, split};
use gdf_core::training::Phase;
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint;
use crate::config::Settings;
use crate::data::{read_dataset, write_dataset};
use crate::error::{CliError, CliResult};

pub const GDF_CHECKPOINT: &str = "gdf.ckpt";
pub const TWO_STAGE_CHECKPOINT: &str = "two_stage.ckpt";
pub const CURVE: &str = "curve.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";

/// Worker pool capped by `GDF_THREADS` when set.
pub fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let threads = match std::env::var("GDF_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("GDF_THREADS must be a positive integer, found `{v}`")))?,
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let fail = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    write_text(path, &(text + "\n"))
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a synthetic dataset; nothing is written when the settings are invalid.
pub fn cmd_generate(settings: &Settings, out: &Path) -> CliResult<usize> {
    let cfg = &settings.experiment;
    cfg.data.validate()?;
    let events: Vec<HazardEvent> = generate(&cfg.data)?.into_iter().map(|e| e.event).collect();
    write_dataset(out, &events)?;
    Ok(events.len())
}

fn train_test(settings: &Settings, data: &Path) -> CliResult<(Vec<HazardEvent>, Vec<HazardEvent>)> {
    let events = read_dataset(data, settings.trigger)?;
    Ok(split(&events, settings.experiment.train_fraction)?)
}

/// Pretrains and finetunes on the training split of `data`; writes both checkpoints and the curve.
pub fn cmd_train(settings: &Settings, data: &Path, out: &Path) -> CliResult<()> {
    let cfg = &settings.experiment;
    let (train, _) = train_test(settings, data)?;
    let problem = cfg.problem.instantiate(train[0].units())?;
    let trained = train_models(cfg, &train, &problem)?;
    ensure_dir(out)?;
    checkpoint::save(&out.join(TWO_STAGE_CHECKPOINT), &trained.two_stage)?;
    checkpoint::save(&out.join(GDF_CHECKPOINT), &trained.gdf)?;
    let rows: Vec<Vec<String>> = trained
        .curve
        .iter()
        .map(|r| {
            let phase = match r.phase {
                Phase::Pretrain => "pretrain",
                Phase::Finetune => "finetune",
            };
            vec![phase.into(), r.epoch.to_string(), r.mse.to_string(), num(r.relaxed_cost)]
        })
        .collect();
    write_csv(&out.join(CURVE), &["phase", "epoch", "mse", "relaxed_cost"], &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub method: String,
    pub event_id: Option<usize>,
    pub status: &'static str,
    pub mse: Option<f64>,
    pub cost: Option<f64>,
    pub optimal_cost: Option<f64>,
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub method: String,
    pub status: &'static str,
    pub events: usize,
    pub mse: Option<f64>,
    pub cost: Option<f64>,
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub problem: &'static str,
    pub events: Vec<EventRecord>,
    pub summary: Vec<SummaryRecord>,
}

fn event_record(row: &MethodRow) -> EventRecord {
    let m = &row.metrics;
    EventRecord {
        method: row.method.label(),
        event_id: Some(m.event_id),
        status: "ok",
        mse: m.mse,
        cost: Some(m.cost),
        optimal_cost: Some(m.optimal_cost),
        regret: Some(m.regret),
    }
}

fn evaluate_parallel(
    settings: &Settings,
    models: &[(Method, &OutageModel)],
    test: &[HazardEvent],
) -> CliResult<Vec<MethodRow>> {
    let cfg = &settings.experiment;
    let problem = cfg.problem.instantiate(test[0].units())?;
    let pool = thread_pool()?;
    let per_event: Vec<gdf_core::Result<Vec<MethodRow>>> = pool.install(|| {
        test.par_iter()
            .map(|ev| evaluate_methods(cfg, &problem, models, std::slice::from_ref(ev), true))
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_event {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Scores the checkpoints in `models_dir` and the baselines on the test split of `data`.
pub fn cmd_evaluate(settings: &Settings, data: &Path, models_dir: &Path, out: &Path) -> CliResult<EvaluationReport> {
    let cfg = &settings.experiment;
    let load = |name: &str| -> CliResult<Option<OutageModel>> {
        let path = models_dir.join(name);
        if path.exists() {
            checkpoint::load(&path).map(Some)
        } else {
            Ok(None)
        }
    };
    let gdf = load(GDF_CHECKPOINT)?;
    let two_stage = load(TWO_STAGE_CHECKPOINT)?;
    if gdf.is_none() && two_stage.is_none() {
        return Err(CliError::Data(format!("{}: no checkpoints found", models_dir.display())));
    }
    let (_, test) = train_test(settings, data)?;
    let mut models = Vec::new();
    let mut missing = Vec::new();
    for (method, model) in [(Method::Gdf, &gdf), (Method::TwoStage, &two_stage)] {
        match model {
            Some(m) => models.push((method, m)),
            None => missing.push(method),
        }
    }
    let rows = evaluate_parallel(settings, &models, &test)?;

    let mut events: Vec<EventRecord> = rows.iter().map(event_record).collect();
    let mut summary: Vec<SummaryRecord> = summarize(&rows)
        .into_iter()
        .map(|s| SummaryRecord {
            method: s.method.label(),
            status: "ok",
            events: test.len(),
            mse: s.mse,
            cost: Some(s.cost),
            regret: Some(s.regret),
        })
        .collect();
    for method in missing {
        events.push(EventRecord {
            method: method.label(),
            event_id: None,
            status: "missing",
            mse: None,
            cost: None,
            optimal_cost: None,
            regret: None,
        });
        summary.push(SummaryRecord {
            method: method.label(),
            status: "missing",
            events: 0,
            mse: None,
            cost: None,
            regret: None,
        });
    }
    let report = EvaluationReport {
        problem: match cfg.problem {
            gdf_core::experiment::ProblemSpec::Deployment { .. } => "deployment",
            gdf_core::experiment::ProblemSpec::Undergrounding { .. } => "undergrounding",
        },
        events,
        summary,
    };

    ensure_dir(out)?;
    let event_rows: Vec<Vec<String>> = report
        .events
        .iter()
        .map(|e| {
            vec![
                e.method.clone(),
                e.event_id.map(|i| i.to_string()).unwrap_or_default(),
                e.status.into(),
                num(e.mse),
                num(e.cost),
                num(e.optimal_cost),
                num(e.regret),
            ]
        })
        .collect();
    write_csv(
        &out.join(METRICS_CSV),
        &["method", "event_id", "status", "mse", "cost", "optimal_cost", "regret"],
        &event_rows,
    )?;
    let summary_rows: Vec<Vec<String>> = report
        .summary
        .iter()
        .map(|s| {
            vec![
                s.method.clone(),
                s.status.into(),
                s.events.to_string(),
                num(s.mse),
                num(s.cost),
                num(s.regret),
            ]
        })
        .collect();
    write_csv(
        &out.join(SUMMARY_CSV),
        &["method", "status", "events", "mse", "cost", "regret"],
        &summary_rows,
    )?;
    write_json(&out.join(METRICS_JSON), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub lambda: Option<f64>,
    pub method: String,
    pub mse: Option<f64>,
    pub cost: f64,
    pub regret: f64,
}

fn sweep_records(s: &LambdaSweep) -> Vec<SweepRecord> {
    let mut out: Vec<SweepRecord> = s
        .baseline_summary
        .iter()
        .map(|b| SweepRecord {
            seed: s.seed,
            lambda: None,
            method: b.method.label(),
            mse: b.mse,
            cost: b.cost,
            regret: b.regret,
        })
        .collect();
    out.extend(s.points.iter().map(|p| SweepRecord {
        seed: s.seed,
        lambda: Some(p.lambda),
        method: p.summary.method.label(),
        mse: p.summary.mse,
        cost: p.summary.cost,
        regret: p.summary.regret,
    }));
    out
}

/// Trains one two-stage model per seed and one finetuned model per (seed, lambda).
/// Without `data`, each seed draws its own synthetic benchmark.
pub fn cmd_sweep(settings: &Settings, data: Option<&Path>, out: &Path) -> CliResult<Vec<SweepRecord>> {
    let cfg = &settings.experiment;
    let shared = match data {
        Some(d) => Some(read_dataset(d, settings.trigger)?),
        None => None,
    };
    let pool = thread_pool()?;
    let runs: Vec<CliResult<LambdaSweep>> = pool.install(|| {
        settings
            .seeds
            .par_iter()
            .map(|&seed| {
                let events = match &shared {
                    Some(e) => e.clone(),
                    None => benchmark_events(cfg, seed)?,
                };
                Ok(lambda_sweep(cfg, seed, &events, &settings.lambdas)?)
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in runs {
        records.extend(sweep_records(&r?));
    }
    ensure_dir(out)?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                num(r.lambda),
                r.method.clone(),
                num(r.mse),
                r.cost.to_string(),
                r.regret.to_string(),
            ]
        })
        .collect();
    write_csv(&out.join(SWEEP_CSV), &["seed", "lambda", "method", "mse", "cost", "regret"], &rows)?;
    write_json(&out.join(SWEEP_JSON), &records)?;
    Ok(records)
}
