use alloc::string::String;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    InvalidRecord { row: usize, message: String },
    #[error("duplicate subject id `{0}`")]
    DuplicateSubject(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("no censoring horizon for subject `{0}`")]
    MissingHorizon(String),
    #[error("invalid censoring horizon: {0}")]
    InvalidHorizon(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("non-finite likelihood contribution for subject `{0}`")]
    NonFiniteLikelihood(String),
    #[error("both cause-specific hazards are zero at t = {0}")]
    ZeroHazards(f64),
    #[error("quadrature did not converge on [{lower}, {upper}]")]
    Quadrature { lower: f64, upper: f64 },
    #[error("immortal tail: cumulative hazard is bounded below the target {target}")]
    ImmortalTail { target: f64 },
    #[error("invalid inversion target {0}")]
    InvalidTarget(f64),
    #[error("target log density is not finite at the initial point")]
    NonFiniteInit,
    #[error("chain {chain}: every proposal rejected for {window} consecutive iterations")]
    SamplerStuck { chain: usize, window: usize },
    #[error("invalid sampler configuration: {0}")]
    InvalidSamplerConfig(String),
    #[error("diagnostics need at least 2 chains, got {0}")]
    TooFewChains(usize),
    #[error("posterior did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid conjugate update: {successes} successes in {trials} trials")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("missing statistic `{0}`")]
    MissingStatistic(String),
    #[error("invalid decision rule: {0}")]
    InvalidRule(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{invalid} of {total} replicates invalid (at most {limit} allowed)")]
    TooManyInvalid {
        invalid: usize,
        total: usize,
        limit: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
