use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("policy is not weak unichain: vertex {vertex} cannot reach the sink")]
    NotWeakUnichain { vertex: usize },
    #[error("edge {edge} does not leave an agent vertex")]
    NotAgentEdge { edge: usize },
    #[error("vertex {vertex} has a single outgoing edge and cannot be switched")]
    NotSwitchable { vertex: usize },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("probability {0} is outside (0, 1]")]
    BadProbability(String),
    #[error("candidate edge {edge} has no Bland number")]
    MissingNumber { edge: usize },
    #[error("iteration cap of {0} reached")]
    IterationCap(usize),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("randomization vertex {0} feeds another randomization vertex")]
    UnsupportedTopology(usize),
    #[error("basis is infeasible: {0}")]
    InfeasibleBasis(String),
    #[error("pivot cap of {0} reached")]
    PivotCap(usize),
    #[error("degenerate pivot at step {step} entering {var}")]
    DegeneratePivot { step: usize, var: String },
    #[error("LP is unbounded along {0}")]
    Unbounded(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
