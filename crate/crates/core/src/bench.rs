//! Timing harnesses: environment overhead against direct solving, and
//! observation extraction cost.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::{BranchingRule, EngineError, SolverParams, SolverState};
use crate::envs::{BranchingDynamics, EnvError, Environment};
use crate::features::{AnyObservationFunction, NothingFunction, ObservationFunction, ObservationKind};
use crate::policies::first_candidate;
use crate::problem::Problem;
use crate::rewards::{Reward, RewardExpr};

#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub family: String,
    pub problem: Arc<Problem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub instance: String,
    pub family: String,
    pub nodes_env: u64,
    pub nodes_direct: u64,
    pub nodes_equal: bool,
    pub objective_env: Option<f64>,
    pub objective_direct: Option<f64>,
    pub objective_equal: bool,
    /// Best of the repetitions, in seconds.
    pub time_env: f64,
    pub time_direct: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub t_statistic: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// One-sample Student t-test of `samples` against `mu`.
pub fn t_test(samples: &[f64], mu: f64) -> TTest {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let (t_statistic, p_value) = if n < 2 {
        (f64::NAN, f64::NAN)
    } else if sd == 0.0 {
        if mean == mu {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean - mu), 0.0)
        }
    } else {
        let t = (mean - mu) / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("degrees of freedom are positive");
        (t, 2.0 * (1.0 - dist.cdf(t.abs())))
    };
    TTest { n, mean, sd, t_statistic, p_value }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub node_limit: u64,
    pub repetitions: usize,
    /// Rows were timed while other episodes ran in parallel.
    pub concurrent: bool,
    pub rows: Vec<OverheadRow>,
    pub ratio_test: TTest,
    pub all_nodes_equal: bool,
    pub all_objectives_equal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RunStats {
    nodes: u64,
    objective: Option<f64>,
    elapsed: Duration,
}

fn direct_run(problem: &Arc<Problem>, node_limit: u64) -> Result<RunStats, EngineError> {
    let params = SolverParams {
        node_limit: Some(node_limit),
        internal_branching: BranchingRule::FirstFractional,
        ..SolverParams::default()
    };
    let started = Instant::now();
    let mut state = SolverState::new(Arc::clone(problem), params)?;
    state.run_to_completion()?;
    let elapsed = started.elapsed();
    Ok(RunStats { nodes: state.nodes_processed(), objective: state.incumbent().map(|i| i.objective), elapsed })
}

fn env_run(problem: &Arc<Problem>, node_limit: u64) -> Result<RunStats, EnvError> {
    let params = SolverParams { node_limit: Some(node_limit), ..SolverParams::default() };
    let started = Instant::now();
    let mut env = Environment::new(BranchingDynamics, NothingFunction, Reward::new(RewardExpr::nnodes()), params);
    let mut r = env.reset(Arc::clone(problem))?;
    while !r.done {
        let set = r.action_set.as_deref().unwrap_or(&[]);
        let action = first_candidate(set).expect("decision points have candidates");
        r = env.step(action)?;
    }
    let elapsed = started.elapsed();
    let state = env.state().expect("episode ran");
    Ok(RunStats { nodes: state.nodes_processed(), objective: state.incumbent().map(|i| i.objective), elapsed })
}

fn overhead_row(inst: &BenchInstance, node_limit: u64, repetitions: usize) -> Result<OverheadRow, EnvError> {
    let mut env_best: Option<RunStats> = None;
    let mut direct_best: Option<RunStats> = None;
    let keep = |best: &mut Option<RunStats>, s: RunStats| {
        if best.map_or(true, |b| s.elapsed < b.elapsed) {
            *best = Some(s);
        }
    };
    for rep in 0..repetitions.max(1) {
        // Alternate the order so neither variant always runs on a warm cache.
        if rep % 2 == 0 {
            keep(&mut env_best, env_run(&inst.problem, node_limit)?);
            keep(&mut direct_best, direct_run(&inst.problem, node_limit)?);
        } else {
            keep(&mut direct_best, direct_run(&inst.problem, node_limit)?);
            keep(&mut env_best, env_run(&inst.problem, node_limit)?);
        }
    }
    let (e, d) = (env_best.expect("ran"), direct_best.expect("ran"));
    let (te, td) = (e.elapsed.as_secs_f64(), d.elapsed.as_secs_f64());
    Ok(OverheadRow {
        instance: inst.problem.name.clone(),
        family: inst.family.clone(),
        nodes_env: e.nodes,
        nodes_direct: d.nodes,
        nodes_equal: e.nodes == d.nodes,
        objective_env: e.objective,
        objective_direct: d.objective,
        objective_equal: e.objective.map(f64::to_bits) == d.objective.map(f64::to_bits),
        time_env: te,
        time_direct: td,
        ratio: te / td,
    })
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool")
}

/// Times an environment-driven first-candidate rollout against a direct
/// solve with the equivalent internal rule on every instance.
pub fn bench_overhead(
    instances: &[BenchInstance],
    node_limit: u64,
    repetitions: usize,
    jobs: usize,
) -> Result<OverheadReport, EnvError> {
    let rows: Vec<OverheadRow> = if jobs > 1 {
        pool(jobs).install(|| {
            instances.par_iter().map(|inst| overhead_row(inst, node_limit, repetitions)).collect::<Result<_, _>>()
        })?
    } else {
        instances.iter().map(|inst| overhead_row(inst, node_limit, repetitions)).collect::<Result<_, _>>()?
    };
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(OverheadReport {
        node_limit,
        repetitions,
        concurrent: jobs > 1,
        all_nodes_equal: rows.iter().all(|r| r.nodes_equal),
        all_objectives_equal: rows.iter().all(|r| r.objective_equal),
        ratio_test: t_test(&ratios, 1.0),
        rows,
    })
}

/// Observation function wrapper that accumulates time spent extracting.
#[derive(Debug, Clone)]
pub struct Timed<O> {
    pub inner: O,
    pub elapsed: Duration,
    pub calls: u64,
}

impl<O> Timed<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, elapsed: Duration::ZERO, calls: 0 }
    }
}

impl<O: ObservationFunction> ObservationFunction for Timed<O> {
    type Output = O::Output;

    fn before_reset(&mut self, state: &SolverState) {
        let started = Instant::now();
        self.inner.before_reset(state);
        self.elapsed += started.elapsed();
    }

    fn extract(&mut self, state: &SolverState, done: bool) -> Option<O::Output> {
        let started = Instant::now();
        let out = self.inner.extract(state, done);
        self.elapsed += started.elapsed();
        self.calls += 1;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTiming {
    pub instance: String,
    pub family: String,
    pub extractions: u64,
    /// Total extraction time over the episode, in seconds.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyTiming {
    pub family: String,
    pub instances: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub observation: ObservationKind,
    pub cache: bool,
    pub node_limit: u64,
    pub concurrent: bool,
    pub instances: Vec<FeatureTiming>,
    /// One row per family, in first-appearance order.
    pub families: Vec<FamilyTiming>,
}

/// Extraction-only time of one first-candidate episode.
pub fn time_features(inst: &BenchInstance, kind: ObservationKind, cache: bool, node_limit: u64) -> Result<FeatureTiming, EnvError> {
    let params = SolverParams { node_limit: Some(node_limit), ..SolverParams::default() };
    let obs = Timed::new(AnyObservationFunction::new(kind, cache));
    let mut env = Environment::new(BranchingDynamics, obs, Reward::new(RewardExpr::constant(0.0)), params);
    let mut r = env.reset(Arc::clone(&inst.problem))?;
    while !r.done {
        let set = r.action_set.as_deref().unwrap_or(&[]);
        r = env.step(first_candidate(set).expect("decision points have candidates"))?;
    }
    let timed = env.observation_function();
    Ok(FeatureTiming {
        instance: inst.problem.name.clone(),
        family: inst.family.clone(),
        extractions: timed.calls,
        time: timed.elapsed.as_secs_f64(),
    })
}

pub fn bench_features(
    instances: &[BenchInstance],
    kind: ObservationKind,
    cache: bool,
    node_limit: u64,
    jobs: usize,
) -> Result<FeatureReport, EnvError> {
    let run = |inst: &BenchInstance| time_features(inst, kind, cache, node_limit);
    let timings: Vec<FeatureTiming> = if jobs > 1 {
        pool(jobs).install(|| instances.par_iter().map(run).collect::<Result<_, _>>())?
    } else {
        instances.iter().map(run).collect::<Result<_, _>>()?
    };
    let mut order: Vec<String> = Vec::new();
    for t in &timings {
        if !order.contains(&t.family) {
            order.push(t.family.clone());
        }
    }
    let families = order
        .into_iter()
        .map(|family| {
            let xs: Vec<f64> = timings.iter().filter(|t| t.family == family).map(|t| t.time).collect();
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            FamilyTiming { family, instances: n, mean, sd }
        })
        .collect();
    Ok(FeatureReport { observation: kind, cache, node_limit, concurrent: jobs > 1, instances: timings, families })
}
