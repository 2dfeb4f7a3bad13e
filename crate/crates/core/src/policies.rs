//! Baseline branching policies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{CandidateObservation, Observation, CANDIDATE_FRACTIONALITY};
use crate::rng::SeededRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("the action set is empty")]
    EmptyActionSet,
    #[error("policy needs candidate features, but the observation is {0}")]
    MissingObservation(&'static str),
    #[error("candidate features do not match the action set")]
    MisalignedObservation,
}

pub fn first_candidate(action_set: &[usize]) -> Result<usize, PolicyError> {
    action_set.first().copied().ok_or(PolicyError::EmptyActionSet)
}

pub fn random_candidate(action_set: &[usize], rng: &mut SeededRng) -> Result<usize, PolicyError> {
    if action_set.is_empty() {
        return Err(PolicyError::EmptyActionSet);
    }
    Ok(action_set[rng.index(action_set.len())])
}

/// Candidate with the largest fractionality; ties go to the earliest.
pub fn most_fractional(obs: &CandidateObservation, action_set: &[usize]) -> Result<usize, PolicyError> {
    if action_set.is_empty() {
        return Err(PolicyError::EmptyActionSet);
    }
    if obs.candidates != action_set {
        return Err(PolicyError::MisalignedObservation);
    }
    let frac = obs.features.column(CANDIDATE_FRACTIONALITY);
    let mut best = 0;
    for (r, &f) in frac.iter().enumerate() {
        if f > frac[best] {
            best = r;
        }
    }
    Ok(action_set[best])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    FirstCandidate,
    RandomCandidate,
    MostFractional,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first_candidate" => Ok(Self::FirstCandidate),
            "random_candidate" => Ok(Self::RandomCandidate),
            "most_fractional" => Ok(Self::MostFractional),
            _ => Err(format!("unknown policy '{s}' (first_candidate, random_candidate, most_fractional)")),
        }
    }
}

/// A policy selected at runtime, carrying its own random state.
#[derive(Debug, Clone)]
pub struct Policy {
    kind: PolicyKind,
    rng: SeededRng,
}

impl Policy {
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        Self { kind, rng: SeededRng::new(seed, u64::MAX) }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn choose(&mut self, observation: Option<&Observation>, action_set: &[usize]) -> Result<usize, PolicyError> {
        match self.kind {
            PolicyKind::FirstCandidate => first_candidate(action_set),
            PolicyKind::RandomCandidate => random_candidate(action_set, &mut self.rng),
            PolicyKind::MostFractional => match observation {
                Some(Observation::Candidates(obs)) => most_fractional(obs, action_set),
                Some(Observation::NodeBipartite(_)) => Err(PolicyError::MissingObservation("node_bipartite")),
                None => Err(PolicyError::MissingObservation("absent")),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;

    #[test]
    fn empty_action_sets_are_errors() {
        let mut rng = SeededRng::new(0, 0);
        assert_eq!(first_candidate(&[]), Err(PolicyError::EmptyActionSet));
        assert_eq!(random_candidate(&[], &mut rng), Err(PolicyError::EmptyActionSet));
    }

    #[test]
    fn most_fractional_breaks_ties_by_position() {
        let mut features = FeatureMatrix::zeros(3, 12);
        features.set(0, CANDIDATE_FRACTIONALITY, 0.25);
        features.set(1, CANDIDATE_FRACTIONALITY, 0.5);
        features.set(2, CANDIDATE_FRACTIONALITY, 0.5);
        let obs = CandidateObservation { candidates: vec![4, 2, 9], features };
        assert_eq!(most_fractional(&obs, &[4, 2, 9]), Ok(2));
        assert_eq!(most_fractional(&obs, &[4, 9]), Err(PolicyError::MisalignedObservation));
    }

    #[test]
    fn random_policy_is_seeded() {
        let set: Vec<usize> = (0..50).collect();
        let pick = |seed| {
            let mut p = Policy::new(PolicyKind::RandomCandidate, seed);
            (0..10).map(|_| p.choose(None, &set).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(pick(5), pick(5));
        assert_ne!(pick(5), pick(6));
    }
}
