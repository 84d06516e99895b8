//! Error-regret analysis for reward learning in tabular MDPs and contextual
//! bandits.
//!
//! The crate decides whether a data distribution over state-action pairs is
//! safe to learn a reward model from, builds adversarial reward models that
//! reach low error yet induce high-regret policies, and checks the related
//! trajectory-level bounds. Most routines are generic over [`Scalar`] so they
//! run either in `f64` or in exact rational arithmetic.

pub mod adversary;
pub mod error;
pub mod gen;
pub mod linalg;
pub mod mdp;
pub mod policy_opt;
pub mod rlhf;
pub mod safe_set;
pub mod scalar;
pub mod traj;

pub use error::{Error, Result};
pub use mdp::{ContextualBandit, DataDistribution, DeterministicPolicy, OccupancyMeasure, Policy, RewardTable, TabularMdp};
pub use scalar::{Rational, Scalar};
