use rewardsafe::Error;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("invalid argument: {0}")]
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit status.
    ///
    /// 2 parse, 3 trivial reward, 4 enumeration cap, 5 condition not met,
    /// 6 verification failed, 7 model validation, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Io(_) | CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                Error::TrivialReward(_) => 3,
                Error::EnumerationCapExceeded { .. } => 4,
                Error::ConditionNotMet(_) | Error::PreconditionFailed(_) => 5,
                Error::VerificationFailed(_) => 6,
                Error::StochasticityViolation(_) | Error::UnreachableState(_) | Error::SupportViolation(_) => 7,
                _ => 1,
            },
        }
    }

    /// Stable machine-readable name for the error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "ParseError",
            CliError::Io(_) => "IoError",
            CliError::Usage(_) => "InvalidArgument",
            CliError::Core(e) => match e {
                Error::StochasticityViolation(_) => "StochasticityViolation",
                Error::UnreachableState(_) => "UnreachableState",
                Error::TrivialReward(_) => "TrivialReward",
                Error::SingularSystem(_) => "SingularSystem",
                Error::EnumerationCapExceeded { .. } => "EnumerationCapExceeded",
                Error::NonConvergence(_) => "NonConvergence",
                Error::SupportViolation(_) => "SupportViolation",
                Error::RankDeficient { .. } => "RankDeficient",
                Error::LpInfeasible => "LpInfeasible",
                Error::LpUnbounded => "LpUnbounded",
                Error::NonPositiveDistribution(_) => "NonPositiveDistribution",
                Error::NonPositiveReference(_) => "NonPositiveReference",
                Error::PreconditionFailed(_) => "PreconditionFailed",
                Error::ConditionNotMet(_) => "ConditionNotMet",
                Error::VerificationFailed(_) => "VerificationFailed",
                Error::InvalidArgument(_) => "InvalidArgument",
            },
        }
    }
}
