mod common;

use std::sync::Arc;

use common::{integral_root, knapsack, milp_brute_force, random_binary_milp, random_mixed_milp};
use milpenv::engine::{
    self, BranchingRule, EngineError, NodeSelection, Phase, SolverParams, SolverState, TerminationReason,
};
use milpenv::problem::{Problem, ProblemBuilder, Relation};
use milpenv::rng::SeededRng;
use proptest::prelude::*;

fn solve(p: &Problem, params: SolverParams) -> SolverState {
    let mut s = SolverState::new(Arc::new(p.clone()), params).unwrap();
    s.run_to_completion().unwrap();
    s
}

fn optimum(s: &SolverState) -> Option<f64> {
    s.incumbent().map(|i| i.objective)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn optimum_equals_enumeration(seed in any::<u64>(), n in 1usize..=10, m in 0usize..=8) {
        let p = random_binary_milp(&mut SeededRng::new(seed, 0), n, m);
        let s = solve(&p, SolverParams::default());
        let expected = milp_brute_force(&p);
        prop_assert_eq!(optimum(&s), expected);
        let reason = s.termination_reason().unwrap();
        if expected.is_some() {
            prop_assert_eq!(reason, TerminationReason::Optimal);
        } else {
            prop_assert_eq!(reason, TerminationReason::Infeasible);
        }
    }

    #[test]
    fn every_rule_and_selection_agrees(seed in any::<u64>()) {
        let p = random_binary_milp(&mut SeededRng::new(seed, 1), 8, 5);
        let expected = milp_brute_force(&p);
        for node_selection in [NodeSelection::BestBound, NodeSelection::Dfs] {
            for internal_branching in [BranchingRule::FirstFractional, BranchingRule::MostFractional, BranchingRule::Pseudocost] {
                let s = solve(&p, SolverParams { node_selection, internal_branching, ..SolverParams::default() });
                prop_assert_eq!(optimum(&s), expected);
            }
        }
    }

    #[test]
    fn mixed_integer_optimum_matches(seed in any::<u64>()) {
        let p = random_mixed_milp(&mut SeededRng::new(seed, 2));
        let s = solve(&p, SolverParams::default());
        match milp_brute_force(&p) {
            Some(v) => {
                let got = optimum(&s).expect("feasible");
                prop_assert!((got - v).abs() <= 1e-6 * v.abs().max(1.0), "{got} vs {v}");
            }
            None => prop_assert_eq!(optimum(&s), None),
        }
    }

    #[test]
    fn bounds_are_monotone_and_valid(seed in any::<u64>()) {
        let p = random_binary_milp(&mut SeededRng::new(seed, 3), 10, 6);
        let expected = milp_brute_force(&p);
        let mut s = engine::start(Arc::new(p), SolverParams::default()).unwrap();
        let (mut dual, mut primal) = (s.dual_bound(), s.primal_bound());
        let mut rng = SeededRng::new(seed, 4);
        while !s.is_finished() {
            let c = s.candidates().to_vec();
            s.branch(c[rng.index(c.len())]).unwrap();
            prop_assert!(s.dual_bound() >= dual);
            prop_assert!(s.primal_bound() <= primal);
            dual = s.dual_bound();
            primal = s.primal_bound();
            if let Some(v) = expected {
                prop_assert!(dual <= v + 1e-9 && primal >= v - 1e-9);
            }
        }
        prop_assert_eq!(optimum(&s), expected);
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>()) {
        let p = random_binary_milp(&mut SeededRng::new(seed, 5), 10, 6);
        let params = SolverParams { internal_branching: BranchingRule::Pseudocost, ..SolverParams::default() };
        let a = solve(&p, params.clone());
        let b = solve(&p, params);
        prop_assert_eq!(a.nodes_processed(), b.nodes_processed());
        prop_assert_eq!(a.total_lp_iterations(), b.total_lp_iterations());
        prop_assert_eq!(a.incumbent(), b.incumbent());
    }
}

#[test]
fn knapsack_optimum() {
    let s = solve(&knapsack(), SolverParams::default());
    let inc = s.incumbent().unwrap();
    assert_eq!(inc.values, vec![1.0, 0.0]);
    assert_eq!(s.problem().reported_objective(inc.objective), 5.0);
    assert_eq!(s.termination_reason(), Some(TerminationReason::Optimal));
}

#[test]
fn integral_root_finishes_at_start() {
    let s = engine::start(Arc::new(integral_root()), SolverParams::default()).unwrap();
    assert_eq!(s.phase(), Phase::Finished);
    assert_eq!(s.nodes_processed(), 1);
    assert_eq!(s.dual_bound(), s.primal_bound());
}

#[test]
fn infeasible_problem_terminates() {
    let mut b = ProblemBuilder::new("infeasible");
    let x = b.add_binary(1.0);
    let y = b.add_binary(1.0);
    b.add_constraint(vec![(x, 2.0), (y, 2.0)], Relation::Eq, 1.0);
    let s = solve(&b.build(), SolverParams::default());
    assert_eq!(s.termination_reason(), Some(TerminationReason::Infeasible));
    assert!(s.incumbent().is_none());
}

#[test]
fn unbounded_relaxation_is_an_error() {
    let mut b = ProblemBuilder::new("unbounded");
    b.add_var(-1.0, 0.0, f64::INFINITY, true);
    let mut s = SolverState::new(Arc::new(b.build()), SolverParams::default()).unwrap();
    assert_eq!(s.start(), Err(EngineError::UnboundedRelaxation));
}

#[test]
fn node_limit_is_respected() {
    let p = random_binary_milp(&mut SeededRng::new(11, 0), 12, 6);
    for limit in [1, 2, 5] {
        let s = solve(&p, SolverParams { node_limit: Some(limit), ..SolverParams::default() });
        assert!(s.nodes_processed() <= limit);
        if s.termination_reason() == Some(TerminationReason::NodeLimit) {
            assert_eq!(s.nodes_processed(), limit);
        }
    }
}

#[test]
fn invalid_branching_leaves_state_usable() {
    let mut s = engine::start(Arc::new(knapsack()), SolverParams::default()).unwrap();
    let err = s.branch(1).unwrap_err();
    assert!(matches!(err, EngineError::InvalidAction { var: 1, .. }));
    assert_eq!(s.phase(), Phase::AtDecision);
    s.branch(0).unwrap();
}

#[test]
fn branching_after_finish_is_rejected() {
    let mut s = solve(&knapsack(), SolverParams::default());
    assert!(matches!(s.branch(0), Err(EngineError::WrongPhase { .. })));
    assert!(matches!(s.run_to_completion(), Err(EngineError::WrongPhase { .. })));
}

#[test]
fn gap_tolerance_stops_early() {
    let p = random_binary_milp(&mut SeededRng::new(4, 0), 12, 4);
    let exact = solve(&p, SolverParams::default());
    let loose = solve(&p, SolverParams { gap_tol: 10.0, ..SolverParams::default() });
    assert!(loose.nodes_processed() <= exact.nodes_processed());
}
