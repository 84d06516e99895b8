use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("stochasticity violation: {0}")]
    StochasticityViolation(String),
    #[error("state {0} is unreachable from the support of mu0")]
    UnreachableState(usize),
    #[error("trivial reward: {0}")]
    TrivialReward(String),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("enumeration cap exceeded: {needed} candidates > cap {cap}")]
    EnumerationCapExceeded { needed: u128, cap: u128 },
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("rank deficient: rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("LP infeasible")]
    LpInfeasible,
    #[error("LP unbounded")]
    LpUnbounded,
    #[error("distribution must be strictly positive: {0}")]
    NonPositiveDistribution(String),
    #[error("reference policy must be strictly positive: {0}")]
    NonPositiveReference(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("condition not met: {0}")]
    ConditionNotMet(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Fails with [`Error::EnumerationCapExceeded`] if `needed > cap`.
pub fn check_cap(needed: u128, cap: u128) -> Result<()> {
    if needed > cap {
        Err(Error::EnumerationCapExceeded { needed, cap })
    } else {
        Ok(())
    }
}
