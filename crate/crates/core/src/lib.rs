//! A small branch-and-bound MILP solver whose decisions are exposed as
//! reinforcement-learning environments.
//!
//! ```
//! use milpenv::engine::SolverParams;
//! use milpenv::envs::{BranchingDynamics, Environment};
//! use milpenv::features::NodeBipartite;
//! use milpenv::instgen::{Family, GeneratorConfig, Size};
//! use milpenv::rewards::RewardExpr;
//! use milpenv::rewards::Reward;
//!
//! let instance = GeneratorConfig::new(Family::preset("set_cover", Size::Tiny).unwrap(), 0).generate(0).unwrap();
//! let reward = Reward::new(-RewardExpr::nnodes());
//! let mut env = Environment::new(BranchingDynamics, NodeBipartite::default(), reward, SolverParams::default());
//! let mut r = env.reset(instance).unwrap();
//! while !r.done {
//!     let candidates = r.action_set.unwrap();
//!     r = env.step(candidates[0]).unwrap();
//! }
//! ```

pub mod bench;
pub mod engine;
pub mod envs;
pub mod features;
pub mod instgen;
pub mod lp_format;
pub mod policies;
pub mod problem;
pub mod rewards;
pub mod rng;
pub mod rollout;
pub mod simplex;
