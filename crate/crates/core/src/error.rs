use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration value violates a model invariant. `key` is the dotted
    /// path of the offending field, e.g. `phy.k`.
    #[error("{key}: {constraint}")]
    InvalidConfig { key: String, constraint: String },

    #[error("payload length {n_t} bits is not a multiple of the codeword length {n} within [{min}, {max}]")]
    PayloadOffGrid { n_t: u32, n: u32, min: u32, max: u32 },

    #[error("MAC frame body of {0} octets exceeds the 255-octet maximum")]
    FrameBodyTooLarge(u32),

    #[error("link out of supported range: {distance} m exceeds the last table bound {max} m")]
    LinkOutOfRange { distance: f64, max: f64 },

    #[error("invalid link distance {0} m")]
    InvalidDistance(f64),

    #[error("access probability {value} of node {node} is outside [0, 1]")]
    InvalidProbability { node: usize, value: f64 },

    #[error("linearization undefined at tau_k = 1 (node {0})")]
    LinearizationUndefined(usize),

    #[error("efficiency undefined at zero activity (node {0})")]
    ZeroActivity(usize),

    #[error("degenerate throughput denominator for node {0}")]
    DegenerateDenominator(usize),

    #[error("node index {index} out of range for {len} nodes")]
    NodeIndex { index: usize, len: usize },

    #[error("at least one node required")]
    NoNodes,

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed scenario: {0}")]
    Parse(String),

    /// An error attributed to a line of a scenario file.
    #[error("line {line}: {inner}")]
    AtLine { line: usize, inner: Box<Error> },
}

impl Error {
    pub fn config(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            constraint: constraint.into(),
        }
    }
}
