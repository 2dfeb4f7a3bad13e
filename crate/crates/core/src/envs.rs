//! Solver control exposed as Markov decision processes.
//!
//! An [`Environment`] pairs a [`Dynamics`] (what an action means and where
//! the solver pauses) with an observation function and a reward function.
//! `reset` starts an episode on an instance and runs the solver up to the
//! first decision point; `step` applies one action and runs up to the next.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{BranchingRule, EngineError, NodeSelection, SolverParams, SolverState, TerminationReason};
use crate::features::ObservationFunction;
use crate::problem::Problem;
use crate::rewards::RewardFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("no episode in progress; call reset first")]
    OutOfEpisode,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("invalid value for parameter '{name}': {message}")]
    InvalidParameterValue { name: String, message: String },
}

/// Transition rules of an environment.
pub trait Dynamics {
    type Action;
    type ActionSet: Clone;

    /// Brings a freshly created solver to the first decision point. Returns
    /// whether the episode is already over and the available actions.
    fn reset_dynamics(&mut self, state: &mut SolverState) -> Result<(bool, Option<Self::ActionSet>), EnvError>;

    fn step_dynamics(
        &mut self,
        state: &mut SolverState,
        action: Self::Action,
    ) -> Result<(bool, Option<Self::ActionSet>), EnvError>;
}

/// Variable selection at every branching decision. Actions are variable
/// indices drawn from the current candidate list.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchingDynamics;

impl BranchingDynamics {
    fn outcome(state: &SolverState) -> (bool, Option<Vec<usize>>) {
        if state.is_finished() {
            (true, None)
        } else {
            (false, Some(state.candidates().to_vec()))
        }
    }
}

impl Dynamics for BranchingDynamics {
    type Action = usize;
    type ActionSet = Vec<usize>;

    fn reset_dynamics(&mut self, state: &mut SolverState) -> Result<(bool, Option<Vec<usize>>), EnvError> {
        state.start()?;
        Ok(Self::outcome(state))
    }

    fn step_dynamics(&mut self, state: &mut SolverState, action: usize) -> Result<(bool, Option<Vec<usize>>), EnvError> {
        state.branch(action)?;
        Ok(Self::outcome(state))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Null,
    Int(i64),
    Float(f64),
    Text(String),
}

pub type ParamMapping = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamKind {
    Integer { min: i64, nullable: bool },
    Real { min: f64, min_exclusive: bool, nullable: bool },
    Choice { options: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

/// Action set of the configuring environment: every settable parameter.
pub type ParamSchema = Vec<ParamSpec>;

pub fn param_schema() -> ParamSchema {
    let spec = |name: &str, kind| ParamSpec { name: name.to_string(), kind };
    let choice = |opts: &[&str]| ParamKind::Choice { options: opts.iter().map(|s| s.to_string()).collect() };
    vec![
        spec("node_limit", ParamKind::Integer { min: 0, nullable: true }),
        spec("time_limit", ParamKind::Real { min: 0.0, min_exclusive: true, nullable: true }),
        spec("gap_tol", ParamKind::Real { min: 0.0, min_exclusive: false, nullable: false }),
        spec("node_selection", choice(&["best_bound", "dfs"])),
        spec("internal_branching", choice(&["first_fractional", "most_fractional", "pseudocost"])),
        spec("seed", ParamKind::Integer { min: 0, nullable: false }),
    ]
}

fn bad(name: &str, message: impl Into<String>) -> EnvError {
    EnvError::InvalidParameterValue { name: name.to_string(), message: message.into() }
}

fn as_int(name: &str, value: &ParamValue, min: i64) -> Result<i64, EnvError> {
    let v = match value {
        ParamValue::Int(v) => *v,
        ParamValue::Float(f) if f.fract() == 0.0 && f.abs() < 9.0e15 => *f as i64,
        other => return Err(bad(name, format!("expected an integer, got {other:?}"))),
    };
    if v < min {
        return Err(bad(name, format!("must be >= {min}, got {v}")));
    }
    Ok(v)
}

fn as_real(name: &str, value: &ParamValue) -> Result<f64, EnvError> {
    match value {
        ParamValue::Int(v) => Ok(*v as f64),
        ParamValue::Float(f) if f.is_finite() => Ok(*f),
        other => Err(bad(name, format!("expected a finite number, got {other:?}"))),
    }
}

fn as_text<'a>(name: &str, value: &'a ParamValue) -> Result<&'a str, EnvError> {
    match value {
        ParamValue::Text(s) => Ok(s),
        other => Err(bad(name, format!("expected a string, got {other:?}"))),
    }
}

/// Overlays `mapping` on `base`. Nothing is applied if any entry is invalid.
pub fn apply_params(base: &SolverParams, mapping: &ParamMapping) -> Result<SolverParams, EnvError> {
    let mut p = base.clone();
    for (name, value) in mapping {
        match name.as_str() {
            "node_limit" => {
                p.node_limit = match value {
                    ParamValue::Null => None,
                    v => Some(as_int(name, v, 0)? as u64),
                }
            }
            "time_limit" => {
                p.time_limit = match value {
                    ParamValue::Null => None,
                    v => {
                        let t = as_real(name, v)?;
                        if t <= 0.0 {
                            return Err(bad(name, format!("must be > 0, got {t}")));
                        }
                        Some(t)
                    }
                }
            }
            "gap_tol" => {
                let g = as_real(name, value)?;
                if g < 0.0 {
                    return Err(bad(name, format!("must be >= 0, got {g}")));
                }
                p.gap_tol = g;
            }
            "node_selection" => {
                p.node_selection = match as_text(name, value)? {
                    "best_bound" => NodeSelection::BestBound,
                    "dfs" => NodeSelection::Dfs,
                    s => return Err(bad(name, format!("unknown option '{s}'"))),
                }
            }
            "internal_branching" => {
                p.internal_branching = match as_text(name, value)? {
                    "first_fractional" => BranchingRule::FirstFractional,
                    "most_fractional" => BranchingRule::MostFractional,
                    "pseudocost" => BranchingRule::Pseudocost,
                    s => return Err(bad(name, format!("unknown option '{s}'"))),
                }
            }
            "seed" => p.seed = as_int(name, value, 0)? as u64,
            _ => return Err(EnvError::UnknownParameter(name.clone())),
        }
    }
    Ok(p)
}

/// One-shot parameter selection: the only action sets solver parameters,
/// after which the solve runs to completion.
#[derive(Debug, Clone, Default)]
pub struct ConfiguringDynamics;

impl Dynamics for ConfiguringDynamics {
    type Action = ParamMapping;
    type ActionSet = ParamSchema;

    fn reset_dynamics(&mut self, _state: &mut SolverState) -> Result<(bool, Option<ParamSchema>), EnvError> {
        Ok((false, Some(param_schema())))
    }

    fn step_dynamics(&mut self, state: &mut SolverState, action: ParamMapping) -> Result<(bool, Option<ParamSchema>), EnvError> {
        let params = apply_params(state.params(), &action)?;
        state.set_params(params)?;
        state.run_to_completion()?;
        Ok((true, None))
    }
}

/// Solver statistics attached to every transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Info {
    pub nodes_processed: u64,
    pub lp_iterations: u64,
    /// Minimization-form bounds; `None` while infinite.
    pub dual_bound: Option<f64>,
    pub primal_bound: Option<f64>,
    pub termination_reason: Option<TerminationReason>,
}

impl Info {
    pub fn of(state: &SolverState) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            nodes_processed: state.nodes_processed(),
            lp_iterations: state.total_lp_iterations(),
            dual_bound: finite(state.dual_bound()),
            primal_bound: finite(state.primal_bound()),
            termination_reason: state.termination_reason(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<O, A> {
    pub observation: Option<O>,
    pub action_set: Option<A>,
    pub reward: f64,
    pub done: bool,
    pub info: Info,
}

pub struct Environment<D: Dynamics, O: ObservationFunction, R: RewardFunction> {
    dynamics: D,
    observation_function: O,
    reward_function: R,
    params: SolverParams,
    state: Option<SolverState>,
    in_episode: bool,
}

pub type BranchingEnv<O, R> = Environment<BranchingDynamics, O, R>;
pub type ConfiguringEnv<O, R> = Environment<ConfiguringDynamics, O, R>;

impl<D: Dynamics, O: ObservationFunction, R: RewardFunction> Environment<D, O, R> {
    pub fn new(dynamics: D, observation_function: O, reward_function: R, params: SolverParams) -> Self {
        Self { dynamics, observation_function, reward_function, params, state: None, in_episode: false }
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    /// Solver parameters for future episodes.
    pub fn set_params(&mut self, params: SolverParams) {
        self.params = params;
    }

    /// The solver of the current (or last) episode.
    pub fn state(&self) -> Option<&SolverState> {
        self.state.as_ref()
    }

    pub fn in_episode(&self) -> bool {
        self.in_episode
    }

    pub fn observation_function(&self) -> &O {
        &self.observation_function
    }

    pub fn observation_function_mut(&mut self) -> &mut O {
        &mut self.observation_function
    }

    pub fn reset(&mut self, problem: impl Into<Arc<Problem>>) -> Result<StepResult<O::Output, D::ActionSet>, EnvError> {
        self.in_episode = false;
        self.state = None;
        let problem = problem.into();
        let report = problem.validate();
        if !report.is_ok() {
            return Err(EnvError::InvalidProblem(report.to_string()));
        }
        let mut state = SolverState::new(problem, self.params.clone())?;
        let (done, action_set) = self.dynamics.reset_dynamics(&mut state)?;
        self.observation_function.before_reset(&state);
        self.reward_function.before_reset(&state);
        let result = self.transition(&state, done, action_set);
        self.state = Some(state);
        self.in_episode = !done;
        Ok(result)
    }

    /// Errors from an invalid action leave the episode untouched, so the
    /// caller can retry with another action.
    pub fn step(&mut self, action: D::Action) -> Result<StepResult<O::Output, D::ActionSet>, EnvError> {
        if !self.in_episode {
            return Err(EnvError::OutOfEpisode);
        }
        let mut state = self.state.take().ok_or(EnvError::OutOfEpisode)?;
        let outcome = self.dynamics.step_dynamics(&mut state, action);
        let (done, action_set) = match outcome {
            Ok(v) => v,
            Err(e) => {
                if matches!(e, EnvError::Engine(EngineError::UnboundedRelaxation | EngineError::LpIterationLimit(_) | EngineError::Simplex(_))) {
                    self.in_episode = false;
                }
                self.state = Some(state);
                return Err(e);
            }
        };
        let result = self.transition(&state, done, action_set);
        self.state = Some(state);
        self.in_episode = !done;
        Ok(result)
    }

    fn transition(&mut self, state: &SolverState, done: bool, action_set: Option<D::ActionSet>) -> StepResult<O::Output, D::ActionSet> {
        let observation = self.observation_function.extract(state, done);
        let reward = self.reward_function.evaluate(state, done);
        StepResult { observation, action_set, reward, done, info: Info::of(state) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::NothingFunction;
    use crate::rewards::{Reward, RewardExpr};

    #[test]
    fn schema_lists_every_parameter() {
        let names: Vec<String> = param_schema().into_iter().map(|s| s.name).collect();
        assert_eq!(names, ["node_limit", "time_limit", "gap_tol", "node_selection", "internal_branching", "seed"]);
        let json = serde_json::to_value(SolverParams::default()).unwrap();
        for n in &names {
            assert!(json.get(n).is_some(), "{n}");
        }
    }

    #[test]
    fn parameter_mapping_is_validated() {
        let base = SolverParams::default();
        let mut m = ParamMapping::new();
        m.insert("node_limit".into(), ParamValue::Int(7));
        m.insert("node_selection".into(), ParamValue::Text("dfs".into()));
        let p = apply_params(&base, &m).unwrap();
        assert_eq!(p.node_limit, Some(7));
        assert_eq!(p.node_selection, NodeSelection::Dfs);

        m.insert("bogus".into(), ParamValue::Int(1));
        assert_eq!(apply_params(&base, &m), Err(EnvError::UnknownParameter("bogus".into())));

        let mut m = ParamMapping::new();
        m.insert("gap_tol".into(), ParamValue::Float(-1.0));
        assert!(matches!(apply_params(&base, &m), Err(EnvError::InvalidParameterValue { .. })));
    }

    #[test]
    fn param_values_parse_from_json() {
        let m: ParamMapping =
            serde_json::from_str(r#"{"node_limit": null, "gap_tol": 0.01, "seed": 3, "node_selection": "dfs"}"#).unwrap();
        assert_eq!(m["node_limit"], ParamValue::Null);
        assert_eq!(m["gap_tol"], ParamValue::Float(0.01));
        assert_eq!(m["seed"], ParamValue::Int(3));
    }

    #[test]
    fn step_before_reset_is_rejected() {
        let mut env = Environment::new(BranchingDynamics, NothingFunction, Reward::new(RewardExpr::nnodes()), SolverParams::default());
        assert_eq!(env.step(0).unwrap_err(), EnvError::OutOfEpisode);
    }
}
