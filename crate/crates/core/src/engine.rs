//! Branch-and-bound driver with explicit suspension points.
//!
//! Instead of calling a branching callback, the solver stops and hands
//! control back whenever it reaches a node whose LP relaxation has
//! fractional integer variables. The caller inspects the [`SolverState`] and
//! resumes it with [`SolverState::branch`]. [`SolverState::run_to_completion`]
//! drives the same loop with one of the built-in branching rules, so an
//! externally driven episode and an internal run that make the same choices
//! build identical trees.
//!
//! Node processing: pop an open node (best bound or depth first), solve its
//! LP from scratch, prune on infeasibility or bound (`obj >= incumbent -
//! 1e-9`), record integral solutions, otherwise suspend. Children are created
//! with `x_j <= floor(v)` (down, enqueued first) and `x_j >= ceil(v)` (up).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::Problem;
use crate::simplex::{self, BoundOverrides, LpLimits, LpResult, LpStatus, SimplexError};

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const CUTOFF_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelection {
    BestBound,
    Dfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchingRule {
    FirstFractional,
    MostFractional,
    Pseudocost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Maximum number of nodes whose LP gets solved; `None` is unlimited.
    pub node_limit: Option<u64>,
    /// Wall-clock limit in seconds; `None` is unlimited.
    pub time_limit: Option<f64>,
    pub gap_tol: f64,
    pub node_selection: NodeSelection,
    pub internal_branching: BranchingRule,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            node_limit: None,
            time_limit: None,
            gap_tol: 1e-9,
            node_selection: NodeSelection::BestBound,
            internal_branching: BranchingRule::MostFractional,
            seed: 0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), EngineError> {
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(EngineError::InvalidParams(format!("time_limit must be > 0, got {t}")));
            }
        }
        if !(self.gap_tol >= 0.0) {
            return Err(EngineError::InvalidParams(format!("gap_tol must be >= 0, got {}", self.gap_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NotStarted,
    AtDecision,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Optimal,
    NodeLimit,
    TimeLimit,
    Infeasible,
    GapReached,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerminationReason::Optimal => "optimal",
            TerminationReason::NodeLimit => "node_limit",
            TerminationReason::TimeLimit => "time_limit",
            TerminationReason::Infeasible => "infeasible",
            TerminationReason::GapReached => "gap_reached",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("invalid action: variable {var} is not a branching candidate {candidates:?}")]
    InvalidAction { var: usize, candidates: Vec<usize> },
    #[error("operation requires phase {expected}, but the solver is {found:?}")]
    WrongPhase { expected: &'static str, found: Phase },
    #[error("the LP relaxation is unbounded")]
    UnboundedRelaxation,
    #[error("LP iteration limit reached at node {0}")]
    LpIterationLimit(u64),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Down,
    Up,
}

/// Running per-unit objective degradation averages for each variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pseudocosts {
    up_sum: Vec<f64>,
    up_count: Vec<u32>,
    down_sum: Vec<f64>,
    down_count: Vec<u32>,
}

impl Pseudocosts {
    pub fn new(num_vars: usize) -> Self {
        Self {
            up_sum: vec![0.0; num_vars],
            up_count: vec![0; num_vars],
            down_sum: vec![0.0; num_vars],
            down_count: vec![0; num_vars],
        }
    }

    /// Records an objective `degradation` observed after moving `var` by
    /// `distance` (its fractional distance to the new bound).
    pub fn update(&mut self, var: usize, direction: Direction, degradation: f64, distance: f64) {
        if distance <= 0.0 {
            return;
        }
        let per_unit = degradation.max(0.0) / distance;
        match direction {
            Direction::Up => {
                self.up_sum[var] += per_unit;
                self.up_count[var] += 1;
            }
            Direction::Down => {
                self.down_sum[var] += per_unit;
                self.down_count[var] += 1;
            }
        }
    }

    /// Average per-unit degradation; `1.0` until the first observation.
    pub fn average(&self, var: usize, direction: Direction) -> f64 {
        let (sum, count) = match direction {
            Direction::Up => (self.up_sum[var], self.up_count[var]),
            Direction::Down => (self.down_sum[var], self.down_count[var]),
        };
        if count == 0 {
            1.0
        } else {
            sum / count as f64
        }
    }

    pub fn score(&self, var: usize) -> f64 {
        self.average(var, Direction::Up) * self.average(var, Direction::Down)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BranchOrigin {
    var: usize,
    direction: Direction,
    parent_objective: f64,
    distance: f64,
}

#[derive(Debug, Clone)]
struct Node {
    seq: u64,
    depth: u32,
    overrides: BoundOverrides,
    bound: f64,
    origin: Option<BranchOrigin>,
}

struct BestBoundEntry(Node);

impl PartialEq for BestBoundEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for BestBoundEntry {}

impl PartialOrd for BestBoundEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BestBoundEntry {
    // BinaryHeap pops the maximum: lowest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.bound.total_cmp(&self.0.bound).then(other.0.seq.cmp(&self.0.seq))
    }
}

enum OpenNodes {
    BestBound(BinaryHeap<BestBoundEntry>),
    Dfs(Vec<Node>),
}

impl OpenNodes {
    fn new(selection: NodeSelection) -> Self {
        match selection {
            NodeSelection::BestBound => OpenNodes::BestBound(BinaryHeap::new()),
            NodeSelection::Dfs => OpenNodes::Dfs(Vec::new()),
        }
    }

    fn push(&mut self, node: Node) {
        match self {
            OpenNodes::BestBound(h) => h.push(BestBoundEntry(node)),
            OpenNodes::Dfs(s) => s.push(node),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            OpenNodes::BestBound(h) => h.pop().map(|e| e.0),
            OpenNodes::Dfs(s) => s.pop(),
        }
    }

    fn len(&self) -> usize {
        match self {
            OpenNodes::BestBound(h) => h.len(),
            OpenNodes::Dfs(s) => s.len(),
        }
    }

    fn min_bound(&self) -> f64 {
        match self {
            OpenNodes::BestBound(h) => h.peek().map_or(f64::INFINITY, |e| e.0.bound),
            OpenNodes::Dfs(s) => s.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min),
        }
    }

    fn prune(&mut self, cutoff: f64) {
        match self {
            OpenNodes::BestBound(h) => h.retain(|e| e.0.bound < cutoff),
            OpenNodes::Dfs(s) => s.retain(|n| n.bound < cutoff),
        }
    }
}

/// The node whose LP was solved most recently and at which the solver is
/// waiting for a branching decision.
#[derive(Debug, Clone)]
pub struct CurrentNode {
    pub depth: u32,
    pub overrides: BoundOverrides,
    pub lp: LpResult,
    /// Branching candidates: integer variables with fractional LP value, ascending.
    pub candidates: Vec<usize>,
    seq: u64,
    bound: f64,
}

impl CurrentNode {
    pub fn id(&self) -> u64 {
        self.seq
    }
}

/// A branch-and-bound run. This is the full state an observation function
/// can inspect.
pub struct SolverState {
    problem: Arc<Problem>,
    params: SolverParams,
    open: OpenNodes,
    incumbent: Option<Incumbent>,
    dual_bound: f64,
    nodes_processed: u64,
    total_lp_iterations: u64,
    solving_time: Duration,
    started_at: Option<Instant>,
    phase: Phase,
    current: Option<CurrentNode>,
    termination: Option<TerminationReason>,
    pseudocosts: Pseudocosts,
    next_seq: u64,
    lp_limits: LpLimits,
}

impl fmt::Debug for SolverState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverState")
            .field("problem", &self.problem.name)
            .field("phase", &self.phase)
            .field("nodes_processed", &self.nodes_processed)
            .field("total_lp_iterations", &self.total_lp_iterations)
            .field("open_nodes", &self.open.len())
            .field("dual_bound", &self.dual_bound)
            .field("incumbent", &self.incumbent.as_ref().map(|i| i.objective))
            .field("termination", &self.termination)
            .finish()
    }
}

/// Builds a solver for `problem` and solves the root node.
pub fn start(problem: Arc<Problem>, params: SolverParams) -> Result<SolverState, EngineError> {
    let mut state = SolverState::new(problem, params)?;
    state.start()?;
    Ok(state)
}

fn relative_gap(primal: f64, dual: f64) -> f64 {
    if primal == dual {
        0.0
    } else if !primal.is_finite() || !dual.is_finite() || primal * dual <= 0.0 {
        f64::INFINITY
    } else {
        (primal - dual).abs() / primal.abs().min(dual.abs())
    }
}

impl SolverState {
    /// Creates an idle solver (phase [`Phase::NotStarted`]).
    pub fn new(problem: Arc<Problem>, params: SolverParams) -> Result<Self, EngineError> {
        let report = problem.validate();
        if !report.is_ok() {
            return Err(EngineError::InvalidProblem(report.to_string()));
        }
        params.validate()?;
        let n = problem.num_vars();
        Ok(Self {
            open: OpenNodes::new(params.node_selection),
            problem,
            params,
            incumbent: None,
            dual_bound: f64::NEG_INFINITY,
            nodes_processed: 0,
            total_lp_iterations: 0,
            solving_time: Duration::ZERO,
            started_at: None,
            phase: Phase::NotStarted,
            current: None,
            termination: None,
            pseudocosts: Pseudocosts::new(n),
            next_seq: 0,
            lp_limits: LpLimits::default(),
        })
    }

    /// Replaces the parameters of a solver that has not started yet.
    pub fn set_params(&mut self, params: SolverParams) -> Result<(), EngineError> {
        self.require(Phase::NotStarted, "NotStarted")?;
        params.validate()?;
        self.open = OpenNodes::new(params.node_selection);
        self.params = params;
        Ok(())
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn problem_arc(&self) -> &Arc<Problem> {
        &self.problem
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    pub fn incumbent(&self) -> Option<&Incumbent> {
        self.incumbent.as_ref()
    }

    /// Best proven lower bound (minimization form).
    pub fn dual_bound(&self) -> f64 {
        self.dual_bound
    }

    pub fn primal_bound(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |i| i.objective)
    }

    pub fn nodes_processed(&self) -> u64 {
        self.nodes_processed
    }

    pub fn total_lp_iterations(&self) -> u64 {
        self.total_lp_iterations
    }

    /// Time spent inside solver calls, excluding time the caller spends
    /// between decisions.
    pub fn solving_time(&self) -> Duration {
        self.solving_time
    }

    pub fn termination_reason(&self) -> Option<TerminationReason> {
        self.termination
    }

    pub fn current_node(&self) -> Option<&CurrentNode> {
        self.current.as_ref()
    }

    /// Branching candidates at the current decision point (empty otherwise).
    pub fn candidates(&self) -> &[usize] {
        self.current.as_ref().map_or(&[], |c| &c.candidates)
    }

    pub fn open_node_count(&self) -> usize {
        self.open.len()
    }

    pub fn pseudocosts(&self) -> &Pseudocosts {
        &self.pseudocosts
    }

    pub fn pseudocost_score(&self, var: usize) -> f64 {
        self.pseudocosts.score(var)
    }

    /// Bounds of `var` at the current node (problem bounds when no node is active).
    pub fn local_bounds(&self, var: usize) -> (f64, f64) {
        self.current
            .as_ref()
            .and_then(|c| c.overrides.get(&var).copied())
            .unwrap_or((self.problem.var_lower[var], self.problem.var_upper[var]))
    }

    fn require(&self, phase: Phase, name: &'static str) -> Result<(), EngineError> {
        if self.phase != phase {
            return Err(EngineError::WrongPhase { expected: name, found: self.phase });
        }
        Ok(())
    }

    /// Solves the root LP and advances to the first decision point.
    pub fn start(&mut self) -> Result<(), EngineError> {
        self.require(Phase::NotStarted, "NotStarted")?;
        let clock = Instant::now();
        self.started_at = Some(clock);
        let root = Node { seq: self.take_seq(), depth: 0, overrides: BoundOverrides::new(), bound: f64::NEG_INFINITY, origin: None };
        self.open.push(root);
        let result = self.advance();
        self.solving_time += clock.elapsed();
        result
    }

    /// Branches on `var` at the current decision point and advances to the
    /// next one (or to the end of the search).
    pub fn branch(&mut self, var: usize) -> Result<(), EngineError> {
        self.require(Phase::AtDecision, "AtDecision")?;
        let current = self.current.as_ref().expect("decision point has a node");
        if current.candidates.binary_search(&var).is_err() {
            return Err(EngineError::InvalidAction { var, candidates: current.candidates.clone() });
        }
        let clock = Instant::now();
        let node = self.current.take().expect("decision point has a node");
        let value = node.lp.primal[var];
        let (lo, up) = node.overrides.get(&var).copied().unwrap_or((self.problem.var_lower[var], self.problem.var_upper[var]));
        let (down, up_bound) = (value.floor(), value.ceil());
        let frac = value - down;

        let mut down_overrides = node.overrides.clone();
        down_overrides.insert(var, (lo, down));
        let mut up_overrides = node.overrides;
        up_overrides.insert(var, (up_bound, up));
        let children = [
            (down_overrides, Direction::Down, frac),
            (up_overrides, Direction::Up, 1.0 - frac),
        ];
        for (overrides, direction, distance) in children {
            let child = Node {
                seq: self.take_seq(),
                depth: node.depth + 1,
                overrides,
                bound: node.bound,
                origin: Some(BranchOrigin { var, direction, parent_objective: node.lp.objective, distance }),
            };
            self.open.push(child);
        }
        let result = self.advance();
        self.solving_time += clock.elapsed();
        result
    }

    /// Picks the variable the built-in `rule` would branch on.
    pub fn select_internal(&self, rule: BranchingRule) -> Option<usize> {
        let node = self.current.as_ref()?;
        let cands = &node.candidates;
        let argmax = |score: &dyn Fn(usize) -> f64| {
            let mut best: Option<(usize, f64)> = None;
            for &j in cands {
                let s = score(j);
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((j, s));
                }
            }
            best.map(|(j, _)| j)
        };
        match rule {
            BranchingRule::FirstFractional => cands.first().copied(),
            BranchingRule::MostFractional => argmax(&|j| fractionality(node.lp.primal[j])),
            BranchingRule::Pseudocost => argmax(&|j| self.pseudocosts.score(j)),
        }
    }

    /// Lets the solver finish on its own using `params.internal_branching`.
    pub fn run_to_completion(&mut self) -> Result<(), EngineError> {
        if self.phase == Phase::Finished {
            return Err(EngineError::WrongPhase { expected: "NotStarted or AtDecision", found: self.phase });
        }
        if self.phase == Phase::NotStarted {
            self.start()?;
        }
        let rule = self.params.internal_branching;
        while self.phase == Phase::AtDecision {
            let var = self.select_internal(rule).expect("decision point has candidates");
            self.branch(var)?;
        }
        Ok(())
    }

    fn take_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    fn cutoff(&self) -> f64 {
        self.primal_bound() - CUTOFF_EPS
    }

    fn finish(&mut self, reason: TerminationReason) {
        self.phase = Phase::Finished;
        self.termination = Some(reason);
        self.current = None;
        let bound = match reason {
            TerminationReason::Optimal | TerminationReason::Infeasible => self.primal_bound(),
            _ => self.open.min_bound().min(self.primal_bound()),
        };
        self.raise_dual_bound(bound);
    }

    fn raise_dual_bound(&mut self, candidate: f64) {
        if candidate > self.dual_bound {
            self.dual_bound = candidate;
        }
    }

    fn time_exceeded(&self) -> bool {
        match (self.params.time_limit, self.started_at) {
            (Some(limit), Some(t0)) => t0.elapsed().as_secs_f64() >= limit,
            _ => false,
        }
    }

    fn advance(&mut self) -> Result<(), EngineError> {
        loop {
            if self.open.len() == 0 {
                let reason = if self.incumbent.is_some() { TerminationReason::Optimal } else { TerminationReason::Infeasible };
                self.finish(reason);
                return Ok(());
            }
            if self.params.node_limit.is_some_and(|limit| self.nodes_processed >= limit) {
                self.finish(TerminationReason::NodeLimit);
                return Ok(());
            }
            if self.time_exceeded() {
                self.finish(TerminationReason::TimeLimit);
                return Ok(());
            }
            if self.incumbent.is_some() {
                let bound = self.open.min_bound().min(self.primal_bound());
                if relative_gap(self.primal_bound(), bound) <= self.params.gap_tol {
                    self.finish(TerminationReason::GapReached);
                    return Ok(());
                }
            }

            let node = self.open.pop().expect("open set is non-empty");
            if node.bound >= self.cutoff() {
                continue;
            }
            let lp = simplex::solve_lp(&self.problem, &node.overrides, &self.lp_limits)?;
            self.nodes_processed += 1;
            self.total_lp_iterations += lp.iterations;
            match lp.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    self.phase = Phase::Finished;
                    return Err(EngineError::UnboundedRelaxation);
                }
                LpStatus::IterLimit => {
                    self.phase = Phase::Finished;
                    return Err(EngineError::LpIterationLimit(node.seq));
                }
            }
            if let Some(origin) = node.origin {
                self.pseudocosts.update(
                    origin.var,
                    origin.direction,
                    lp.objective - origin.parent_objective,
                    origin.distance,
                );
            }
            if lp.objective >= self.cutoff() {
                continue;
            }

            let candidates: Vec<usize> = (0..self.problem.num_vars())
                .filter(|&j| self.problem.is_integer[j] && fractionality(lp.primal[j]) > INTEGRALITY_TOL)
                .collect();
            if candidates.is_empty() {
                self.record_solution(&lp.primal);
                continue;
            }

            let bound = node.bound.max(lp.objective);
            self.current = Some(CurrentNode {
                depth: node.depth,
                overrides: node.overrides,
                lp,
                candidates,
                seq: node.seq,
                bound,
            });
            self.phase = Phase::AtDecision;
            let frontier = self.open.min_bound().min(bound).min(self.primal_bound());
            self.raise_dual_bound(frontier);
            return Ok(());
        }
    }

    fn record_solution(&mut self, primal: &[f64]) {
        let mut values = primal.to_vec();
        for (v, &int) in values.iter_mut().zip(&self.problem.is_integer) {
            if int {
                *v = v.round();
            }
        }
        let objective = self.problem.objective_value(&values);
        if objective < self.primal_bound() {
            self.incumbent = Some(Incumbent { values, objective });
            let cutoff = self.cutoff();
            self.open.prune(cutoff);
        }
    }
}

/// Distance of `v` to the nearest integer.
pub fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}
