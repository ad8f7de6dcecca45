use thiserror::Error;

/// Problems with a configuration document. Every variant names the field.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config i/o error: {0}")]
    Io(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("`{field}` must be positive and finite, got {value}")]
    NonPositive { field: String, value: f64 },
    #[error("`eps_A` = {eps_a} must be below 1/N = 1/{num_devices}")]
    BandwidthFloor { eps_a: f64, num_devices: usize },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown policy `{name}`; valid policies: {valid}")]
    UnknownPolicy { name: String, valid: String },
}

/// Failures while simulating.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("slot {slot}, device {device}: infeasible decision: {reason}")]
    Infeasible {
        slot: usize,
        device: usize,
        reason: String,
    },
    #[error("slot {slot}: infeasible bandwidth allocation, sum of fractions = {sum}")]
    BandwidthOverflow { slot: usize, sum: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Refusals from the brute-force reference solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("simplex grid over {0} devices is intractable (limit is 4)")]
    TooManyDevices(usize),
    #[error("grid parameter out of range: {0}")]
    BadGrid(String),
}
