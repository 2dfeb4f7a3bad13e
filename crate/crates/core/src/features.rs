//! Observation functions: turn the solver state at a decision point into
//! feature matrices.

use serde::{Deserialize, Serialize};

use crate::engine::{fractionality, Phase, SolverState};
use crate::problem::{Problem, Relation};
use crate::simplex::{BasisStatus, LpResult};

/// Upper cap for distances to infinite bounds.
pub const DISTANCE_CAP: f64 = 1e20;
const TIGHT_TOL: f64 = 1e-6;

/// Two-method contract shared by all observation functions.
pub trait ObservationFunction {
    type Output;

    /// Called at the beginning of every episode, after the solver has been
    /// reset and before the first `extract`.
    fn before_reset(&mut self, state: &SolverState);

    /// `None` means "no observation", which is what terminal states produce.
    fn extract(&mut self, state: &SolverState, done: bool) -> Option<Self::Output>;
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.n_cols + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }
}

pub const VARIABLE_FEATURES: [&str; 9] = [
    "objective",
    "has_lower_bound",
    "has_upper_bound",
    "is_integer",
    "lp_value",
    "fractionality",
    "is_basic",
    "at_lower",
    "at_upper",
];

pub const CONSTRAINT_FEATURES: [&str; 4] = ["rhs", "relation", "dual", "is_tight"];

pub const CANDIDATE_FEATURES: [&str; 12] = [
    "objective",
    "objective_normalized",
    "num_rows",
    "mean_abs_coef",
    "min_abs_coef",
    "max_abs_coef",
    "lp_value",
    "fractionality",
    "distance_to_lower",
    "distance_to_upper",
    "pseudocost_score",
    "is_basic",
];

mod var_col {
    pub const OBJECTIVE: usize = 0;
    pub const HAS_LOWER: usize = 1;
    pub const HAS_UPPER: usize = 2;
    pub const IS_INTEGER: usize = 3;
    pub const LP_VALUE: usize = 4;
    pub const FRACTIONALITY: usize = 5;
    pub const IS_BASIC: usize = 6;
    pub const AT_LOWER: usize = 7;
    pub const AT_UPPER: usize = 8;
}

mod con_col {
    pub const RHS: usize = 0;
    pub const RELATION: usize = 1;
    pub const DUAL: usize = 2;
    pub const IS_TIGHT: usize = 3;
}

/// Column index of the fractionality feature in [`CandidateObservation`].
pub const CANDIDATE_FRACTIONALITY: usize = 7;

/// Bipartite variable/constraint graph of the current node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteObservation {
    /// One row per variable, columns [`VARIABLE_FEATURES`].
    pub variable_features: FeatureMatrix,
    /// One row per constraint, columns [`CONSTRAINT_FEATURES`].
    pub constraint_features: FeatureMatrix,
    /// `(constraint, variable)` pairs, one per nonzero, in row order.
    pub edge_indices: Vec<(usize, usize)>,
    /// `a_ij / ||a_i||_inf` for each edge.
    pub edge_values: Vec<f64>,
}

/// The parts of a bipartite observation that never change during a solve.
#[derive(Debug, Clone)]
struct StaticGraph {
    variable_features: FeatureMatrix,
    constraint_features: FeatureMatrix,
    edge_indices: Vec<(usize, usize)>,
    edge_values: Vec<f64>,
    objective_norm: f64,
}

fn guarded(norm: f64) -> f64 {
    if norm > 0.0 {
        norm
    } else {
        1.0
    }
}

fn relation_code(relation: Relation) -> f64 {
    match relation {
        Relation::Ge => -1.0,
        Relation::Eq => 0.0,
        Relation::Le => 1.0,
    }
}

fn objective_norm(problem: &Problem) -> f64 {
    problem.objective.iter().fold(0.0, |acc: f64, c| acc.max(c.abs()))
}

fn static_graph(problem: &Problem) -> StaticGraph {
    let n = problem.num_vars();
    let m = problem.num_cons();
    let obj_norm = guarded(objective_norm(problem));

    let mut vars = FeatureMatrix::zeros(n, VARIABLE_FEATURES.len());
    for j in 0..n {
        vars.set(j, var_col::OBJECTIVE, problem.objective[j] / obj_norm);
        vars.set(j, var_col::HAS_LOWER, f64::from(u8::from(problem.var_lower[j].is_finite())));
        vars.set(j, var_col::HAS_UPPER, f64::from(u8::from(problem.var_upper[j].is_finite())));
        vars.set(j, var_col::IS_INTEGER, f64::from(u8::from(problem.is_integer[j])));
    }

    let mut cons = FeatureMatrix::zeros(m, CONSTRAINT_FEATURES.len());
    let nnz = problem.num_nonzeros();
    let mut edge_indices = Vec::with_capacity(nnz);
    let mut edge_values = Vec::with_capacity(nnz);
    for (i, con) in problem.constraints.iter().enumerate() {
        let norm = guarded(con.inf_norm());
        cons.set(i, con_col::RHS, con.rhs / norm);
        cons.set(i, con_col::RELATION, relation_code(con.relation));
        for &(j, a) in &con.coeffs {
            edge_indices.push((i, j));
            edge_values.push(a / norm);
        }
    }

    StaticGraph {
        variable_features: vars,
        constraint_features: cons,
        edge_indices,
        edge_values,
        objective_norm: obj_norm,
    }
}

fn fill_lp_columns(graph: &mut StaticGraph, problem: &Problem, lp: &LpResult) {
    let vars = &mut graph.variable_features;
    for j in 0..problem.num_vars() {
        let x = lp.primal[j];
        let status = lp.var_status[j];
        vars.set(j, var_col::LP_VALUE, x);
        let frac = if problem.is_integer[j] { fractionality(x) } else { 0.0 };
        vars.set(j, var_col::FRACTIONALITY, frac);
        vars.set(j, var_col::IS_BASIC, f64::from(u8::from(status == BasisStatus::Basic)));
        vars.set(j, var_col::AT_LOWER, f64::from(u8::from(status == BasisStatus::AtLower)));
        vars.set(j, var_col::AT_UPPER, f64::from(u8::from(status == BasisStatus::AtUpper)));
    }
    let cons = &mut graph.constraint_features;
    for (i, con) in problem.constraints.iter().enumerate() {
        cons.set(i, con_col::DUAL, lp.duals[i] / graph.objective_norm);
        let activity = lp.row_activity[i];
        let tight = (activity - con.rhs).abs() <= TIGHT_TOL * con.rhs.abs().max(1.0);
        cons.set(i, con_col::IS_TIGHT, f64::from(u8::from(tight)));
    }
}

/// Variable/constraint bipartite graph features.
///
/// With caching on, everything that depends only on the problem is computed
/// once per episode and reused; only the LP-dependent columns are refreshed.
#[derive(Debug, Clone)]
pub struct NodeBipartite {
    cache: bool,
    cached: Option<StaticGraph>,
}

impl NodeBipartite {
    pub fn new(cache: bool) -> Self {
        Self { cache, cached: None }
    }

    pub fn caching(&self) -> bool {
        self.cache
    }
}

impl Default for NodeBipartite {
    fn default() -> Self {
        Self::new(true)
    }
}

impl ObservationFunction for NodeBipartite {
    type Output = BipartiteObservation;

    fn before_reset(&mut self, _state: &SolverState) {
        self.cached = None;
    }

    fn extract(&mut self, state: &SolverState, done: bool) -> Option<BipartiteObservation> {
        if done {
            return None;
        }
        let problem = state.problem();
        let mut graph = if self.cache {
            self.cached.get_or_insert_with(|| static_graph(problem)).clone()
        } else {
            static_graph(problem)
        };
        // Before the root LP is solved the LP-dependent columns stay zero.
        if state.phase() == Phase::AtDecision {
            if let Some(node) = state.current_node() {
                if node.lp.is_optimal() {
                    fill_lp_columns(&mut graph, problem, &node.lp);
                }
            }
        }
        Some(BipartiteObservation {
            variable_features: graph.variable_features,
            constraint_features: graph.constraint_features,
            edge_indices: graph.edge_indices,
            edge_values: graph.edge_values,
        })
    }
}

/// Per-candidate features, rows aligned with the branching action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateObservation {
    pub candidates: Vec<usize>,
    /// One row per candidate, columns [`CANDIDATE_FEATURES`].
    pub features: FeatureMatrix,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CandidateFeatures;

impl ObservationFunction for CandidateFeatures {
    type Output = CandidateObservation;

    fn before_reset(&mut self, _state: &SolverState) {}

    fn extract(&mut self, state: &SolverState, done: bool) -> Option<CandidateObservation> {
        if done {
            return None;
        }
        let problem = state.problem();
        let candidates = state.candidates().to_vec();
        let node = state.current_node()?;
        let n = problem.num_vars();

        let mut rows = vec![0usize; n];
        let mut sum = vec![0.0f64; n];
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![0.0f64; n];
        for con in &problem.constraints {
            for &(j, a) in &con.coeffs {
                let a = a.abs();
                rows[j] += 1;
                sum[j] += a;
                min[j] = min[j].min(a);
                max[j] = max[j].max(a);
            }
        }
        let obj_norm = guarded(objective_norm(problem));

        let mut features = FeatureMatrix::zeros(candidates.len(), CANDIDATE_FEATURES.len());
        for (r, &j) in candidates.iter().enumerate() {
            let x = node.lp.primal[j];
            let (lo, up) = state.local_bounds(j);
            let count = rows[j];
            let row = [
                problem.objective[j],
                problem.objective[j] / obj_norm,
                count as f64,
                if count > 0 { sum[j] / count as f64 } else { 0.0 },
                if count > 0 { min[j] } else { 0.0 },
                max[j],
                x,
                fractionality(x),
                (x - lo).min(DISTANCE_CAP),
                (up - x).min(DISTANCE_CAP),
                state.pseudocost_score(j),
                f64::from(u8::from(node.lp.var_status[j] == BasisStatus::Basic)),
            ];
            features.data[r * row.len()..(r + 1) * row.len()].copy_from_slice(&row);
        }
        Some(CandidateObservation { candidates, features })
    }
}

/// Produces no observation at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct NothingFunction;

impl ObservationFunction for NothingFunction {
    type Output = ();

    fn before_reset(&mut self, _state: &SolverState) {}

    fn extract(&mut self, _state: &SolverState, _done: bool) -> Option<()> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    NodeBipartite(BipartiteObservation),
    Candidates(CandidateObservation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    NodeBipartite,
    Candidates,
    Nothing,
}

impl std::str::FromStr for ObservationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "node_bipartite" => Ok(Self::NodeBipartite),
            "candidates" => Ok(Self::Candidates),
            "nothing" => Ok(Self::Nothing),
            _ => Err(format!("unknown observation function '{s}' (node_bipartite, candidates, nothing)")),
        }
    }
}

/// Observation function chosen at runtime.
#[derive(Debug, Clone)]
pub enum AnyObservationFunction {
    NodeBipartite(NodeBipartite),
    Candidates(CandidateFeatures),
    Nothing(NothingFunction),
}

impl AnyObservationFunction {
    pub fn new(kind: ObservationKind, cache: bool) -> Self {
        match kind {
            ObservationKind::NodeBipartite => Self::NodeBipartite(NodeBipartite::new(cache)),
            ObservationKind::Candidates => Self::Candidates(CandidateFeatures),
            ObservationKind::Nothing => Self::Nothing(NothingFunction),
        }
    }
}

impl ObservationFunction for AnyObservationFunction {
    type Output = Observation;

    fn before_reset(&mut self, state: &SolverState) {
        match self {
            Self::NodeBipartite(f) => f.before_reset(state),
            Self::Candidates(f) => f.before_reset(state),
            Self::Nothing(f) => f.before_reset(state),
        }
    }

    fn extract(&mut self, state: &SolverState, done: bool) -> Option<Observation> {
        match self {
            Self::NodeBipartite(f) => f.extract(state, done).map(Observation::NodeBipartite),
            Self::Candidates(f) => f.extract(state, done).map(Observation::Candidates),
            Self::Nothing(f) => f.extract(state, done).map(|()| unreachable!()),
        }
    }
}
