//! Episode rollouts, their JSON trace records, and trace replay.
//!
//! Trace layout:
//!
//! ```text
//! {
//!   "instance": "set_cover_0_3",
//!   "seed": 0,
//!   "env": "branching" | "configuring",
//!   "policy": "first_candidate" | ... | null,
//!   "observation_function": "nothing" | "node_bipartite" | "candidates",
//!   "cache": true,
//!   "reward_expr": "(lp_iterations ^ 2)",
//!   "params": { solver parameters },
//!   "steps": [
//!     { "t": 0, "action_set": [..] | {schema} | null, "action": null,
//!       "reward": 12.0, "done": false, "info": {..}, "observation": {..}? },
//!     { "t": 1, "action": 4, ... }
//!   ]
//! }
//! ```
//!
//! Step 0 is the reset transition. Non-finite rewards are written as the
//! strings `"NaN"`, `"inf"` and `"-inf"`. Observations are stored only on
//! request, as matrices `{columns, n_rows, data}` in row-major order.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{SolverParams, TerminationReason};
use crate::envs::{BranchingDynamics, ConfiguringDynamics, EnvError, Environment, Info, ParamMapping};
use crate::features::{
    AnyObservationFunction, FeatureMatrix, Observation, ObservationKind, CANDIDATE_FEATURES, CONSTRAINT_FEATURES,
    VARIABLE_FEATURES,
};
use crate::policies::{Policy, PolicyError, PolicyKind};
use crate::problem::Problem;
use crate::rewards::{Metric, ParseError, Reward, RewardExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Branching,
    Configuring,
}

impl std::str::FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "branching" => Ok(Self::Branching),
            "configuring" => Ok(Self::Configuring),
            _ => Err(format!("unknown environment '{s}' (branching, configuring)")),
        }
    }
}

mod finite_or_text {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_str("NaN")
        } else if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(serde::de::Error::custom(format!("invalid reward '{t}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub action_set: Option<Value>,
    pub action: Option<Value>,
    #[serde(with = "finite_or_text")]
    pub reward: f64,
    pub done: bool,
    pub info: Info,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub instance: String,
    pub seed: u64,
    pub env: EnvKind,
    pub policy: Option<PolicyKind>,
    pub observation_function: ObservationKind,
    pub cache: bool,
    pub reward_expr: String,
    pub params: SolverParams,
    pub steps: Vec<StepRecord>,
}

impl EpisodeRecord {
    /// Actions in step order (the reset transition has none).
    pub fn actions(&self) -> impl Iterator<Item = &Value> {
        self.steps.iter().filter_map(|s| s.action.as_ref())
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub instance: String,
    pub nodes: u64,
    pub lp_iterations: u64,
    pub steps: usize,
    #[serde(with = "finite_or_text")]
    pub total_reward: f64,
    pub wall_time: f64,
    pub termination_reason: Option<TerminationReason>,
}

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    RewardExpr(#[from] ParseError),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("replay diverged at step {t}: {field} differs (recorded {recorded}, replayed {replayed})")]
    ReplayMismatch { t: usize, field: &'static str, recorded: String, replayed: String },
}

#[derive(Debug, Clone)]
pub struct RolloutConfig {
    pub env: EnvKind,
    pub policy: PolicyKind,
    pub observation: ObservationKind,
    pub cache: bool,
    pub reward: RewardExpr,
    pub params: SolverParams,
    /// The single action of a configuring episode.
    pub configuring_action: ParamMapping,
    /// Seeds the random policy.
    pub seed: u64,
    pub store_observations: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Branching,
            policy: PolicyKind::FirstCandidate,
            observation: ObservationKind::Nothing,
            cache: true,
            reward: RewardExpr::lp_iterations(),
            params: SolverParams::default(),
            configuring_action: ParamMapping::new(),
            seed: 0,
            store_observations: false,
        }
    }
}

fn matrix_json(m: &FeatureMatrix, columns: &[&str]) -> Value {
    json!({ "columns": columns, "n_rows": m.n_rows, "data": m.data })
}

/// Trace representation of an observation.
pub fn observation_json(obs: &Observation) -> Value {
    match obs {
        Observation::NodeBipartite(o) => json!({
            "kind": "node_bipartite",
            "variable_features": matrix_json(&o.variable_features, &VARIABLE_FEATURES),
            "constraint_features": matrix_json(&o.constraint_features, &CONSTRAINT_FEATURES),
            "edge_indices": o.edge_indices,
            "edge_values": o.edge_values,
        }),
        Observation::Candidates(o) => json!({
            "kind": "candidates",
            "candidates": o.candidates,
            "features": matrix_json(&o.features, &CANDIDATE_FEATURES),
        }),
    }
}

struct Recorder {
    steps: Vec<StepRecord>,
    store_observations: bool,
}

impl Recorder {
    fn push(&mut self, action_set: Option<Value>, action: Option<Value>, reward: f64, done: bool, info: Info, obs: Option<&Observation>) {
        let observation = if self.store_observations { obs.map(observation_json) } else { None };
        let t = self.steps.len();
        self.steps.push(StepRecord { t, action_set, action, reward, done, info, observation });
    }
}

/// Where the actions of an episode come from.
enum ActionSource<'a> {
    Live { policy: Policy, configuring_action: &'a ParamMapping },
    Replay(&'a [StepRecord]),
}

impl ActionSource<'_> {
    fn replayed(&self, t: usize) -> Result<Value, RolloutError> {
        match self {
            ActionSource::Replay(steps) => steps
                .get(t)
                .and_then(|s| s.action.clone())
                .ok_or_else(|| RolloutError::MalformedTrace(format!("step {t} has no action"))),
            ActionSource::Live { .. } => unreachable!(),
        }
    }

    fn branching(&mut self, t: usize, obs: Option<&Observation>, set: &[usize]) -> Result<usize, RolloutError> {
        match self {
            ActionSource::Live { policy, .. } => Ok(policy.choose(obs, set)?),
            ActionSource::Replay(_) => {
                let v = self.replayed(t)?;
                v.as_u64()
                    .map(|v| v as usize)
                    .ok_or_else(|| RolloutError::MalformedTrace(format!("step {t}: action {v} is not an index")))
            }
        }
    }

    fn configuring(&mut self, t: usize) -> Result<ParamMapping, RolloutError> {
        match self {
            ActionSource::Live { configuring_action, .. } => Ok((*configuring_action).clone()),
            ActionSource::Replay(_) => {
                let v = self.replayed(t)?;
                serde_json::from_value(v).map_err(|e| RolloutError::MalformedTrace(format!("step {t}: {e}")))
            }
        }
    }
}

fn run_episode(
    problem: Arc<Problem>,
    header: &EpisodeRecord,
    reward: &RewardExpr,
    mut source: ActionSource<'_>,
    store_observations: bool,
) -> Result<Vec<StepRecord>, RolloutError> {
    let obs_fn = AnyObservationFunction::new(header.observation_function, header.cache);
    let reward_fn = Reward::new(reward.clone());
    let mut rec = Recorder { steps: Vec::new(), store_observations };

    match header.env {
        EnvKind::Branching => {
            let mut env = Environment::new(BranchingDynamics, obs_fn, reward_fn, header.params.clone());
            let mut r = env.reset(problem)?;
            rec.push(r.action_set.as_ref().map(to_value), None, r.reward, r.done, r.info.clone(), r.observation.as_ref());
            while !r.done {
                let set = r.action_set.clone().unwrap_or_default();
                let t = rec.steps.len();
                let action = source.branching(t, r.observation.as_ref(), &set)?;
                r = env.step(action)?;
                rec.push(r.action_set.as_ref().map(to_value), Some(json!(action)), r.reward, r.done, r.info.clone(), r.observation.as_ref());
            }
        }
        EnvKind::Configuring => {
            let mut env = Environment::new(ConfiguringDynamics, obs_fn, reward_fn, header.params.clone());
            let mut r = env.reset(problem)?;
            rec.push(r.action_set.as_ref().map(to_value), None, r.reward, r.done, r.info.clone(), r.observation.as_ref());
            while !r.done {
                let t = rec.steps.len();
                let action = source.configuring(t)?;
                let action_json = json!(action);
                r = env.step(action)?;
                rec.push(None, Some(action_json), r.reward, r.done, r.info.clone(), r.observation.as_ref());
            }
        }
    }
    Ok(rec.steps)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("action sets serialize to JSON")
}

/// Runs one episode and records it.
pub fn rollout(problem: Arc<Problem>, cfg: &RolloutConfig) -> Result<(EpisodeRecord, EpisodeSummary), RolloutError> {
    let mut record = EpisodeRecord {
        instance: problem.name.clone(),
        seed: cfg.seed,
        env: cfg.env,
        policy: (cfg.env == EnvKind::Branching).then_some(cfg.policy),
        observation_function: cfg.observation,
        cache: cfg.cache,
        reward_expr: cfg.reward.to_string(),
        params: cfg.params.clone(),
        steps: Vec::new(),
    };
    let source = ActionSource::Live { policy: Policy::new(cfg.policy, cfg.seed), configuring_action: &cfg.configuring_action };
    let started = Instant::now();
    record.steps = run_episode(problem, &record, &cfg.reward, source, cfg.store_observations)?;
    let wall_time = started.elapsed().as_secs_f64();
    let last = &record.steps.last().expect("every episode has a reset step").info;
    let summary = EpisodeSummary {
        instance: record.instance.clone(),
        nodes: last.nodes_processed,
        lp_iterations: last.lp_iterations,
        steps: record.steps.len() - 1,
        total_reward: record.total_reward(),
        wall_time,
        termination_reason: last.termination_reason,
    };
    Ok((record, summary))
}

fn uses_time(expr: &RewardExpr) -> bool {
    match expr {
        RewardExpr::Metric(m) => *m == Metric::SolvingTime,
        RewardExpr::Constant(_) => false,
        RewardExpr::Unary(_, a) => uses_time(a),
        RewardExpr::Binary(_, a, b) => uses_time(a) || uses_time(b),
    }
}

fn mismatch(t: usize, field: &'static str, recorded: impl std::fmt::Debug, replayed: impl std::fmt::Debug) -> RolloutError {
    RolloutError::ReplayMismatch { t, field, recorded: format!("{recorded:?}"), replayed: format!("{replayed:?}") }
}

/// Re-executes the recorded actions of `record` on `problem` and returns the
/// replayed steps.
pub fn replay(record: &EpisodeRecord, problem: Arc<Problem>) -> Result<Vec<StepRecord>, RolloutError> {
    let reward: RewardExpr = record.reward_expr.parse()?;
    let store = record.steps.iter().any(|s| s.observation.is_some());
    run_episode(problem, record, &reward, ActionSource::Replay(&record.steps), store)
}

/// Replays `record` and checks that every step matches bit for bit.
///
/// Rewards built on `solving_time` measure the clock and are not compared.
pub fn verify_replay(record: &EpisodeRecord, problem: Arc<Problem>) -> Result<(), RolloutError> {
    let replayed = replay(record, problem)?;
    let compare_rewards = !uses_time(&record.reward_expr.parse()?);
    if replayed.len() != record.steps.len() {
        return Err(mismatch(replayed.len().min(record.steps.len()), "length", record.steps.len(), replayed.len()));
    }
    for (a, b) in record.steps.iter().zip(&replayed) {
        let t = a.t;
        if a.done != b.done {
            return Err(mismatch(t, "done", a.done, b.done));
        }
        if a.action_set != b.action_set {
            return Err(mismatch(t, "action_set", &a.action_set, &b.action_set));
        }
        if !same_info(&a.info, &b.info) {
            return Err(mismatch(t, "info", &a.info, &b.info));
        }
        if compare_rewards && a.reward.to_bits() != b.reward.to_bits() && !(a.reward.is_nan() && b.reward.is_nan()) {
            return Err(mismatch(t, "reward", a.reward, b.reward));
        }
        if a.observation.is_some() && a.observation != b.observation {
            return Err(mismatch(t, "observation", "stored", "different"));
        }
    }
    Ok(())
}

fn same_bits(a: Option<f64>, b: Option<f64>) -> bool {
    a.map(f64::to_bits) == b.map(f64::to_bits)
}

fn same_info(a: &Info, b: &Info) -> bool {
    a.nodes_processed == b.nodes_processed
        && a.lp_iterations == b.lp_iterations
        && same_bits(a.dual_bound, b.dual_bound)
        && same_bits(a.primal_bound, b.primal_bound)
        && a.termination_reason == b.termination_reason
}
