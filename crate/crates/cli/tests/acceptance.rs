//! Acceptance checks. Prints one PASS/FAIL line per criterion and a tally.
//! Exits with status 1 on any failure when `GDF_ACCEPTANCE_STRICT=1`, so a
//! workspace test run still reaches the remaining suites otherwise.

mod oracles;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use gdf_core::autodiff::{Tape, Tensor};
use gdf_core::experiment::{
    benchmark_events, evaluate_methods, initial_model, run, summarize, ExperimentConfig, Method, MethodRow,
    ProblemSpec,
};
use gdf_core::ode::{euler_integrate, seed_state, CompartmentState, HazardEvent, Normalizer, OutageModel, RateNetwork};
use gdf_core::problems::{
    build_deployment_instance, build_undergrounding_instance, DeploymentNetwork, DeploymentParams, Edge, Problem,
};
use gdf_core::solvers::{solve_milp, solve_qp, LinearProgram, QpInstance, QpSolution};
use gdf_core::synthdata::{generate, split, SyntheticConfig};
use gdf_core::training::{finetune_gdf, gdf_cost_and_grad, pretrain, scaled_mse_and_grad, Labeled};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

fn conservation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut violations, mut clamped, mut steps_total) = (0.0_f64, 0usize, 0usize, 0usize);
    for i in 0..1000u64 {
        let p = 3;
        let mut model = OutageModel::new_network(p, 8, i);
        let boost = rng.random_range(0.5..20.0);
        let params: Vec<f64> = model.params().iter().map(|v| v * boost).collect();
        model.set_params(&params).unwrap();
        model.failure.set_rate_scale(rng.random_range(0.1..50.0));
        model.restoration.set_rate_scale(rng.random_range(0.01..5.0));
        let z: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let total = rng.random_range(1.0..5000.0);
        let y0 = rng.random_range(0.0..total);
        let r0 = rng.random_range(0.0..total - y0);
        let dt = rng.random_range(0.01..5.0);
        let steps = rng.random_range(5..60);
        let ts: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
        let rates = model.rates(&z, total).unwrap();
        let traj = euler_integrate(CompartmentState::new(total - y0 - r0, y0, r0), rates, total, &ts).unwrap();
        for w in traj.windows(2) {
            let (a, b) = (w[0], w[1]);
            steps_total += 1;
            worst = worst.max((b.unaffected + b.outaged + b.restored - total).abs() / total);
            let negative = b.unaffected < 0.0 || b.restored < 0.0 || b.outaged < -1e-9 * total;
            if b.unaffected > a.unaffected || b.restored < a.restored || negative {
                violations += 1;
            }
            let u_raw = a.unaffected - dt * rates.failure * a.outaged * a.unaffected;
            let r_raw = a.restored + dt * rates.restoration * a.outaged;
            if u_raw < 0.0 || r_raw + u_raw.max(0.0) > total {
                clamped += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-9 && violations == 0 && clamped > 0 && secs < 10.0,
        format!(
            "1000 integrations, {steps_total} steps, max |U+Y+R-N|/N = {worst:.1e}, \
             monotonicity violations {violations}, safeguard active on {clamped} steps, {secs:.2}s"
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Compares `grad . v` with a central difference of `f` along `v`. Returns
/// `None` when the one-sided slopes disagree, which marks a kink inside the stencil.
fn directional(f: &dyn Fn(&[f64]) -> f64, theta: &[f64], grad: &[f64], v: &[f64], h: f64) -> Option<f64> {
    let at = |s: f64| {
        let p: Vec<f64> = theta.iter().zip(v).map(|(a, b)| a + s * b).collect();
        f(&p)
    };
    let (fp, f0, fm) = (at(h), at(0.0), at(-h));
    let floor = 1e-8 * (1.0 + f0.abs());
    let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
    if (fwd - bwd).abs() > 1e-2 * fwd.abs().max(bwd.abs()).max(floor) {
        return None;
    }
    let numeric = (fp - fm) / (2.0 * h);
    let analytic: f64 = grad.iter().zip(v).map(|(a, b)| a * b).sum();
    Some((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor))
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

#[derive(Default)]
struct ProbeStats {
    accepted: usize,
    skipped: usize,
    worst: f64,
}

impl ProbeStats {
    fn add(&mut self, r: Option<f64>) {
        match r {
            Some(e) => {
                self.accepted += 1;
                self.worst = self.worst.max(e);
            }
            None => self.skipped += 1,
        }
    }

    fn ok(&self, tol: f64) -> bool {
        self.accepted >= 100 && self.worst < tol && self.skipped * 10 <= self.accepted + self.skipped
    }

    fn describe(&self, name: &str) -> String {
        format!("{name} worst {:.1e} over {} probes ({} at kinks)", self.worst, self.accepted, self.skipped)
    }
}

fn net_params(n: &RateNetwork) -> Vec<f64> {
    n.w1.iter().chain(&n.b1).chain(&n.w2).copied().chain([n.b2]).collect()
}

fn with_net_params(n: &RateNetwork, p: &[f64]) -> RateNetwork {
    let mut m = n.clone();
    let (a, b) = (n.w1.len(), n.b1.len());
    m.w1.copy_from_slice(&p[..a]);
    m.b1.copy_from_slice(&p[a..a + b]);
    m.w2.copy_from_slice(&p[a + b..a + 2 * b]);
    m.b2 = p[a + 2 * b];
    m
}

/// Reverse-mode gradient of the rate network output in its parameters.
fn taped_rate_gradient(n: &RateNetwork, z: &[f64]) -> Vec<f64> {
    let (p, h) = (n.input_dim, n.hidden);
    let mut tape = Tape::new();
    let zc = tape.constant(Tensor::matrix(1, p, z.to_vec()).unwrap());
    let w1 = tape.leaf(Tensor::matrix(p, h, n.w1.clone()).unwrap());
    let b1 = tape.leaf(Tensor::matrix(1, h, n.b1.clone()).unwrap());
    let w2 = tape.leaf(Tensor::matrix(h, 1, n.w2.clone()).unwrap());
    let b2 = tape.leaf(Tensor::matrix(1, 1, vec![n.b2]).unwrap());
    let a = tape.matmul(zc, w1).unwrap();
    let a = tape.add(a, b1).unwrap();
    let a = tape.relu(a).unwrap();
    let o = tape.matmul(a, w2).unwrap();
    let o = tape.add(o, b2).unwrap();
    let s = tape.sigmoid(o).unwrap();
    let s = tape.scale(s, n.rate_scale).unwrap();
    let out = tape.sum(s).unwrap();
    let g = tape.backward(out).unwrap();
    [(w1, vec![p, h]), (b1, vec![1, h]), (w2, vec![h, 1]), (b2, vec![1, 1])]
        .iter()
        .flat_map(|(id, shape)| g.get_or_zeros(*id, shape).into_data())
        .collect()
}

fn probe_events(rng: &mut ChaCha8Rng, periods: usize) -> Vec<HazardEvent> {
    let cfg = SyntheticConfig {
        events: 2,
        periods,
        seed: rng.random(),
        ..SyntheticConfig::default()
    };
    generate(&cfg).unwrap().into_iter().map(|e| e.event).collect()
}

fn probe_model(rng: &mut ChaCha8Rng, events: &[HazardEvent]) -> OutageModel {
    let mut m = OutageModel::new_network(3, rng.random_range(3..9), rng.random());
    m.normalizer = Normalizer::fit(events).unwrap();
    m
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let mut rate = ProbeStats::default();
    while rate.accepted < 120 {
        let p = rng.random_range(1..6);
        let net = RateNetwork::init(p, rng.random_range(2..12), rng.random_range(0.5..5.0), &mut rng);
        let z: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let theta = net_params(&net);
        let g = taped_rate_gradient(&net, &z);
        let f = |q: &[f64]| with_net_params(&net, q).apply(&z).unwrap();
        let v = unit_direction(&mut rng, theta.len());
        rate.add(directional(&f, &theta, &g, &v, 1e-5));
    }

    let mut mse = ProbeStats::default();
    while mse.accepted < 120 {
        let periods = rng.random_range(4..14);
        let events = probe_events(&mut rng, periods);
        let mut model = probe_model(&mut rng, &events);
        let theta = model.params();
        let ev = &events[0];
        let (_, g) = scaled_mse_and_grad(&model, &[ev]).unwrap();
        let f = |q: &[f64]| {
            let mut m = model.clone();
            m.set_params(q).unwrap();
            scaled_mse_and_grad(&m, &[ev]).unwrap().0
        };
        let v = unit_direction(&mut rng, theta.len());
        mse.add(directional(&f, &theta, &g, &v, 1e-6));
        model.set_params(&theta).unwrap();
    }

    let params = DeploymentParams {
        transport_cost: 50.0,
        travel_time: 2,
        ..DeploymentParams::default()
    };
    let mut gdf = ProbeStats::default();
    let mut probe = 0usize;
    while gdf.accepted < 120 {
        probe += 1;
        let events = probe_events(&mut rng, 8);
        let model = probe_model(&mut rng, &events);
        let ev = &events[0];
        let item = Labeled::observed(ev);
        let (problem, rho) = if probe % 2 == 0 {
            (Problem::Deployment(DeploymentNetwork::uniform(ev.units(), 1, &params)), 0.1)
        } else {
            (Problem::Undergrounding { budget: 1 }, 0.5)
        };
        let theta = model.params();
        let g = gdf_cost_and_grad(&model, &item, &problem, rho, 1.0).unwrap().gradient;
        let f = |q: &[f64]| {
            let mut m = model.clone();
            m.set_params(q).unwrap();
            gdf_cost_and_grad(&m, &item, &problem, rho, 1.0).unwrap().relaxed_cost
        };
        let v = unit_direction(&mut rng, theta.len());
        gdf.add(directional(&f, &theta, &g, &v, 1e-5));
    }

    outcome(
        rate.ok(1e-5) && mse.ok(1e-4) && gdf.ok(1e-2),
        format!(
            "{}; {}; {}",
            rate.describe("rate network"),
            mse.describe("MSE"),
            gdf.describe("end-to-end GDF")
        ),
    )
}

// ---------------------------------------------------------------- 3

fn random_grid(rng: &mut ChaCha8Rng, units: usize, periods: usize, peak: f64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let totals: Vec<f64> = (0..units).map(|_| rng.random_range(50.0..2000.0)).collect();
    let mut timestamps = vec![0.0];
    for _ in 0..periods {
        let last = *timestamps.last().unwrap();
        timestamps.push(last + rng.random_range(0.5..2.0));
    }
    let outages = totals
        .iter()
        .map(|n| (0..=periods).map(|_| rng.random_range(0.0..peak.min(*n))).collect())
        .collect();
    (outages, totals, timestamps)
}

fn random_network(rng: &mut ChaCha8Rng, units: usize) -> DeploymentNetwork {
    let mut edges = Vec::new();
    for k in 0..units {
        for (from, to) in [(units, k), (k, units)] {
            edges.push(Edge {
                from,
                to,
                cost: rng.random_range(0.0..300.0),
                delay: rng.random_range(0..3),
            });
        }
    }
    DeploymentNetwork {
        units,
        warehouse_stock: vec![rng.random_range(0..3) as f64],
        edges,
        capacity: rng.random_range(1..3) as f64,
        generator_capacity: rng.random_range(10.0..100.0),
        interruption_cost: rng.random_range(0.5..3.0),
        operation_cost: rng.random_range(0.0..5.0),
    }
}

fn random_qp(rng: &mut ChaCha8Rng) -> QpInstance {
    let n = rng.random_range(2..7);
    let mut lp = LinearProgram::new((0..n).map(|_| rng.random_range(-5.0..5.0)).collect());
    let mut x0 = vec![0.0; n];
    for j in 0..n {
        lp.lower[j] = if rng.random_bool(0.3) { f64::NEG_INFINITY } else { rng.random_range(-2.0..0.0) };
        lp.upper[j] = if rng.random_bool(0.3) { f64::INFINITY } else { rng.random_range(0.5..3.0) };
        x0[j] = lp.lower[j].max(-1.0) + rng.random_range(0.0..0.5);
    }
    for _ in 0..rng.random_range(0..4) {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rhs = row.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(0.0..1.0);
        lp.add_ineq(&row, rhs).unwrap();
    }
    if rng.random_bool(0.4) {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rhs = row.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>();
        lp.add_eq(&row, rhs).unwrap();
    }
    QpInstance {
        lp,
        rho: rng.random_range(0.05..2.0),
    }
}

/// Stationarity, primal feasibility and complementary slackness residuals.
fn kkt_residuals(inst: &QpInstance, sol: &QpSolution) -> (f64, f64, f64) {
    let lp = &inst.lp;
    let n = lp.objective.len();
    let dot = |r: &[f64]| r.iter().zip(&sol.x).map(|(a, b)| a * b).sum::<f64>();
    let mut g: Vec<f64> = (0..n).map(|j| 2.0 * inst.rho * sol.x[j] + lp.objective[j]).collect();
    let (mut primal, mut slack) = (0.0_f64, 0.0_f64);
    for (i, l) in sol.ineq_dual.iter().enumerate() {
        let row = lp.ineq.row(i);
        (0..n).for_each(|j| g[j] += l * row[j]);
        let s = dot(row) - lp.ineq_rhs[i];
        primal = primal.max(s);
        slack = slack.max((l * s).abs()).max(-l);
    }
    for (i, v) in sol.eq_dual.iter().enumerate() {
        let row = lp.eq.row(i);
        (0..n).for_each(|j| g[j] += v * row[j]);
        primal = primal.max((dot(row) - lp.eq_rhs[i]).abs());
    }
    for j in 0..n {
        let (ml, mu) = (sol.lower_dual[j], sol.upper_dual[j]);
        g[j] += mu - ml;
        primal = primal.max(lp.lower[j] - sol.x[j]).max(sol.x[j] - lp.upper[j]);
        if lp.lower[j].is_finite() {
            slack = slack.max((ml * (sol.x[j] - lp.lower[j])).abs());
        }
        if lp.upper[j].is_finite() {
            slack = slack.max((mu * (lp.upper[j] - sol.x[j])).abs());
        }
        slack = slack.max(-ml).max(-mu);
    }
    let xi_norm = lp.objective.iter().map(|a| a * a).sum::<f64>().sqrt();
    let stat = g.iter().map(|a| a * a).sum::<f64>().sqrt() / (1.0 + xi_norm);
    (stat, primal, slack)
}

fn solvers() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut und = (0usize, 0.0_f64);
    for _ in 0..60 {
        let k = rng.random_range(1..7);
        let periods = rng.random_range(1..7);
        let (y, totals, ts) = random_grid(&mut rng, k, periods, 2000.0);
        let budget = rng.random_range(0..=k);
        let inst = build_undergrounding_instance(&y, &totals, &ts, budget).unwrap();
        let sol = solve_milp(&inst).unwrap();
        let oracle = oracles::undergrounding_best(&y, &totals, &ts, budget);
        let integral = sol.x.iter().all(|v| (v - v.round()).abs() < 1e-9);
        let err = if integral && inst.lp.max_violation(&sol.x) < 1e-9 {
            (sol.objective - oracle).abs()
        } else {
            f64::INFINITY
        };
        und = (und.0 + 1, und.1.max(err));
    }

    let mut dep = (0usize, 0.0_f64);
    let mut qps: Vec<QpInstance> = (0..60).map(|_| random_qp(&mut rng)).collect();
    for _ in 0..25 {
        let k = rng.random_range(1..3);
        let periods = rng.random_range(1..5);
        let net = random_network(&mut rng, k);
        let (y, _, _) = random_grid(&mut rng, k, periods, 150.0);
        let inst = build_deployment_instance(&net, &y, periods).unwrap();
        let sol = solve_milp(&inst).unwrap();
        let oracle = oracles::deployment_best(&net, &y, periods);
        let err = if inst.lp.max_violation(&sol.x) < 1e-9 {
            (sol.objective - oracle).abs()
        } else {
            f64::INFINITY
        };
        dep = (dep.0 + 1, dep.1.max(err));
        qps.push(inst.relax(rng.random_range(0.05..1.0)));
    }

    let (mut qp_err, mut stat, mut primal, mut slack) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for inst in &qps {
        let sol = solve_qp(inst).unwrap();
        let pg = oracles::qp_projected_gradient(inst, 2_000_000);
        let d = sol.x.iter().zip(&pg).fold(0.0_f64, |a, (u, v)| a.max((u - v).abs()));
        qp_err = qp_err.max(d);
        let (s, p, c) = kkt_residuals(inst, &sol);
        stat = stat.max(s);
        primal = primal.max(p);
        slack = slack.max(c);
    }
    let pass = und.1 <= 1e-6 && dep.1 <= 1e-6 && qp_err <= 1e-6 && stat <= 1e-7 && primal <= 1e-8 && slack <= 1e-8;
    outcome(
        pass,
        format!(
            "MILP vs enumeration: {} undergrounding (max gap {:.1e}), {} deployment (max gap {:.1e}); \
             QP vs projected gradient on {} instances max |dx| {:.1e}; KKT stationarity {:.1e}, \
             primal {:.1e}, complementarity {:.1e}",
            und.0,
            und.1,
            dep.0,
            dep.1,
            qps.len(),
            qp_err,
            stat,
            primal,
            slack
        ),
    )
}

// ---------------------------------------------------------------- 4-8

const SEEDS: [u64; 3] = [0, 1, 2];

struct Pretrained {
    seed: u64,
    cfg: ExperimentConfig,
    train: Vec<HazardEvent>,
    test: Vec<HazardEvent>,
    two_stage: OutageModel,
}

fn pretrained(seed: u64) -> Pretrained {
    let cfg = ExperimentConfig::default().with_seed(seed);
    let events = benchmark_events(&cfg, seed).unwrap();
    let (train, test) = split(&events, cfg.train_fraction).unwrap();
    let init = initial_model(&cfg, &train).unwrap();
    let (two_stage, _) = pretrain(&init, &train, &cfg.training).unwrap();
    Pretrained {
        seed,
        cfg,
        train,
        test,
        two_stage,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Variant {
    travel_time: usize,
    transport_cost: f64,
    lambda: f64,
}

const DEFAULT_VARIANT: Variant = Variant {
    travel_time: 10,
    transport_cost: 400.0,
    lambda: 1.0,
};

/// Finetunes the shared two-stage model for one problem variant and scores every method.
fn deployment_rows(p: &Pretrained, v: Variant) -> Vec<MethodRow> {
    let mut cfg = p.cfg.clone();
    cfg.training.lambda = v.lambda;
    cfg.problem = ProblemSpec::Deployment {
        params: DeploymentParams {
            travel_time: v.travel_time,
            transport_cost: v.transport_cost,
            ..DeploymentParams::default()
        },
        warehouses: 1,
    };
    let problem = cfg.problem.instantiate(p.train[0].units()).unwrap();
    let truths: Vec<Vec<Vec<f64>>> = p.train.iter().map(|e| e.outages.clone()).collect();
    let (gdf, _) = finetune_gdf(&p.two_stage, &p.train, &truths, &problem, &cfg.training).unwrap();
    let models = [(Method::Gdf, &gdf), (Method::TwoStage, &p.two_stage)];
    evaluate_methods(&cfg, &problem, &models, &p.test, true).unwrap()
}

fn mean_regret(rows: &[MethodRow], method: Method) -> f64 {
    summarize(rows).iter().find(|s| s.method == method).map(|s| s.regret).unwrap()
}

type Runs = BTreeMap<(u64, usize, u64, u64), Vec<MethodRow>>;

fn key(seed: u64, v: Variant) -> (u64, usize, u64, u64) {
    (seed, v.travel_time, v.transport_cost.to_bits(), v.lambda.to_bits())
}

fn deployment_runs() -> Runs {
    let models: Vec<Pretrained> = SEEDS.par_iter().map(|&s| pretrained(s)).collect();
    let mut jobs = Vec::new();
    for p in &models {
        for travel_time in [1, 5, 10] {
            jobs.push((p, Variant { travel_time, ..DEFAULT_VARIANT }));
        }
        for transport_cost in [500.0, 1000.0] {
            jobs.push((p, Variant { transport_cost, ..DEFAULT_VARIANT }));
        }
        if p.seed == SEEDS[0] {
            for lambda in [0.0, 10.0, 100.0] {
                jobs.push((p, Variant { lambda, ..DEFAULT_VARIANT }));
            }
        }
    }
    jobs.par_iter()
        .map(|(p, v)| (key(p.seed, *v), deployment_rows(p, *v)))
        .collect()
}

fn regret_nonnegative(runs: &Runs, underground: &[Vec<MethodRow>]) -> Outcome {
    let rows: Vec<&MethodRow> = runs.values().chain(underground).flatten().collect();
    let worst = rows.iter().map(|r| r.metrics.regret).fold(f64::INFINITY, f64::min);
    outcome(
        worst >= -1e-6,
        format!("{} (event, method) pairs, min regret {worst:.3e}", rows.len()),
    )
}

fn travel_time_sweep(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut last_gap = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for travel_time in [1, 5, 10] {
        let v = Variant { travel_time, ..DEFAULT_VARIANT };
        let (mut wins, mut gdf, mut two) = (0, 0.0, 0.0);
        for &s in &SEEDS {
            let rows = &runs[&key(s, v)];
            let (g, t) = (mean_regret(rows, Method::Gdf), mean_regret(rows, Method::TwoStage));
            wins += usize::from(g < t);
            gdf += g / SEEDS.len() as f64;
            two += t / SEEDS.len() as f64;
        }
        let gap = two - gdf;
        pass &= wins >= 2 && gap >= last_gap;
        last_gap = gap;
        parts.push(format!(
            "delta={travel_time}: gdf {gdf:.1} vs two-stage {two:.1}, wins {wins}/3, gap {gap:.1}"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn transport_cost_sweep(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for transport_cost in [500.0, 1000.0] {
        let v = Variant { transport_cost, ..DEFAULT_VARIANT };
        let mean = |m: Method| SEEDS.iter().map(|&s| mean_regret(&runs[&key(s, v)], m)).sum::<f64>() / 3.0;
        let (gdf, two) = (mean(Method::Gdf), mean(Method::TwoStage));
        let [l1, l3, l5] = [1, 3, 5].map(|lag| mean(Method::Online { lag }));
        pass &= l1 > gdf && l1 > two && l5 >= l3 && l3 >= l1;
        parts.push(format!(
            "cost {transport_cost}: gdf {gdf:.1}, two-stage {two:.1}, online lag1/3/5 {l1:.1}/{l3:.1}/{l5:.1}"
        ));
    }
    outcome(pass, parts.join("; "))
}

/// SAIDI of GDF and two-stage, GDF regret, and all rows, per seed.
fn undergrounding_runs() -> Vec<(f64, f64, f64, Vec<MethodRow>)> {
    SEEDS
        .par_iter()
        .map(|&s| {
            let r = run(&ExperimentConfig::undergrounding(1), s).unwrap();
            let g = r.summary_of(Method::Gdf).unwrap();
            let t = r.summary_of(Method::TwoStage).unwrap();
            (g.cost, t.cost, g.regret, r.rows.clone())
        })
        .collect()
}

fn undergrounding(per_seed: &[(f64, f64, f64, Vec<MethodRow>)]) -> Outcome {
    let n = per_seed.len() as f64;
    let gdf = per_seed.iter().map(|r| r.0).sum::<f64>() / n;
    let two = per_seed.iter().map(|r| r.1).sum::<f64>() / n;
    let zero = per_seed.iter().filter(|r| r.2 <= 1e-12).count();
    let regrets: Vec<String> = per_seed.iter().map(|r| format!("{:.4}", r.2)).collect();
    outcome(
        gdf <= two && zero >= 1,
        format!(
            "SAIDI gdf {gdf:.4} vs two-stage {two:.4}; gdf regret per seed [{}]",
            regrets.join(", ")
        ),
    )
}

fn lambda_ablation(runs: &Runs) -> Outcome {
    let seed = SEEDS[0];
    let at = |lambda: f64| &runs[&key(seed, Variant { lambda, ..DEFAULT_VARIANT })];
    let two = mean_regret(at(1.0), Method::TwoStage);
    let mut pass = true;
    let mut parts = vec![format!("two-stage {two:.1}")];
    for lambda in [0.0, 1.0, 10.0] {
        let g = mean_regret(at(lambda), Method::Gdf);
        pass &= g <= two;
        parts.push(format!("lambda={lambda}: {g:.1}"));
    }
    let limit = mean_regret(at(100.0), Method::Gdf);
    pass &= (limit - two).abs() <= 0.1 * two;
    parts.push(format!("lambda=100: {limit:.1}"));
    outcome(pass, parts.join(", "))
}

// ---------------------------------------------------------------- 9

fn max_deviation(coarse: &[CompartmentState], fine: &[CompartmentState], stride: usize) -> f64 {
    coarse
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let b = fine[i * stride];
            (a.unaffected - b.unaffected)
                .abs()
                .max((a.outaged - b.outaged).abs())
                .max((a.restored - b.restored).abs())
        })
        .fold(0.0, f64::max)
}

fn euler_convergence() -> Outcome {
    let cfg = SyntheticConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ratios = Vec::new();
    for k in 0..cfg.units {
        let z: Vec<f64> = (0..cfg.covariate_dim).map(|_| rng.random()).collect();
        let total = cfg.customers[k];
        let rates = cfg.true_rates(&z, total);
        let s0 = seed_state(total, Some(cfg.seed_fraction * total));
        let grid = |m: usize| -> Vec<f64> { (0..=cfg.periods * m).map(|j| j as f64 * cfg.dt / m as f64).collect() };
        let reference = euler_integrate(s0, rates, total, &grid(64)).unwrap();
        let errors: Vec<f64> = [1, 2, 4, 8, 16]
            .iter()
            .map(|&m| {
                let coarse: Vec<CompartmentState> = euler_integrate(s0, rates, total, &grid(m))
                    .unwrap()
                    .into_iter()
                    .step_by(m)
                    .collect();
                max_deviation(&coarse, &reference, 64)
            })
            .collect();
        ratios.extend(errors.windows(2).map(|w| w[0] / w[1]));
    }
    let pass = ratios.iter().all(|r| (1.5..=2.5).contains(r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    outcome(pass, format!("error ratios per halving [{}]", shown.join(", ")))
}

// ---------------------------------------------------------------- 10

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let config = "[training]\npretrain_epochs = 30\nfinetune_epochs = 2\n\n[problem]\ntravel_time = 2\n\n\
                  [experiment]\nevents = 6\nperiods = 10\nseeds = [0, 1]\nlags = [1, 2]\n";
    fs::write(p.join("c.toml"), config).unwrap();
    let commands: [&[&str]; 4] = [
        &["generate", "--config", "c.toml", "--out", "data{}"],
        &["train", "--config", "c.toml", "--data", "data{}", "--out", "models{}"],
        &["evaluate", "--config", "c.toml", "--data", "data{}", "--checkpoints", "models{}", "--out", "eval{}"],
        &["sweep", "--config", "c.toml", "--lambda", "0,1", "--out", "sweep{}"],
    ];
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (round, threads) in [(1, "1"), (2, "3")] {
        for cmd in &commands {
            let args: Vec<String> = cmd.iter().map(|a| a.replace("{}", &round.to_string())).collect();
            let out = Command::new(env!("CARGO_BIN_EXE_gdf"))
                .args(&args)
                .current_dir(p)
                .env("GDF_THREADS", threads)
                .output()
                .unwrap();
            if !out.status.success() {
                return outcome(false, format!("`gdf {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
            }
        }
    }
    for name in ["data", "models", "eval", "sweep"] {
        let (a, b) = (snapshot(&p.join(format!("{name}1"))), snapshot(&p.join(format!("{name}2"))));
        compared += a.len();
        if a != b {
            mismatched.push(name);
        }
    }
    outcome(
        mismatched.is_empty(),
        format!(
            "generate/train/evaluate/sweep rerun with different thread counts: {compared} files compared, \
             differing outputs: {mismatched:?}"
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, start: Instant, o: Outcome| {
        let status = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("[{status}] {n:>2} {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), o.detail);
    };

    let t = Instant::now();
    report(1, "conservation", t, conservation());
    let t = Instant::now();
    report(2, "gradients", t, gradients());
    let t = Instant::now();
    report(3, "solver oracles", t, solvers());

    let t = Instant::now();
    let runs = deployment_runs();
    let underground = undergrounding_runs();
    let underground_rows: Vec<Vec<MethodRow>> = underground.iter().map(|r| r.3.clone()).collect();
    let heavy = t.elapsed().as_secs_f64();
    println!("       benchmark runs finished in {heavy:.0}s");
    let t = Instant::now();
    report(4, "regret nonnegativity", t, regret_nonnegative(&runs, &underground_rows));
    report(5, "travel-time sweep", t, travel_time_sweep(&runs));
    report(6, "transport-cost sweep", t, transport_cost_sweep(&runs));
    report(7, "undergrounding", t, undergrounding(&underground));
    report(8, "lambda ablation", t, lambda_ablation(&runs));

    let t = Instant::now();
    report(9, "euler convergence", t, euler_convergence());
    let t = Instant::now();
    report(10, "determinism", t, determinism());

    println!("acceptance: {} of 10 criteria passed, {failed} failed", 10 - failed);
    if failed > 0 && std::env::var("GDF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
