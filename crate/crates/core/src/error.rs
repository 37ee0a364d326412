use thiserror::Error;

/// Problems found while validating a raw instance.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("unknown {kind} `{id}` referenced")]
    DanglingReference { kind: &'static str, id: String },
    #[error("multiple edges between worker `{worker}` and firm `{firm}`")]
    MultipleEdges { worker: String, firm: String },
    #[error("negative capacity on edge `{0}`")]
    NegativeCapacity(String),
    #[error("negative quota for worker `{0}`")]
    NegativeQuota(String),
    #[error("missing quota for worker `{0}`")]
    MissingQuota(String),
    #[error("incomplete order for worker `{0}`: not a permutation of its incident edges")]
    IncompleteOrder(String),
    #[error("missing choice function for firm `{0}`")]
    MissingChoice(String),
    #[error("bad choice function for firm `{firm}`: {reason}")]
    BadChoice { firm: String, reason: String },
}

/// Crate-wide error type.
///
/// Variants split into domain errors (bad input, infeasible requests) and
/// [`Error::Invariant`], which signals that a property the theory guarantees
/// failed to hold at runtime.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    Invalid(#[from] ValidationError),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("assignment leaves the box at edge `{0}`")]
    OutOfBox(String),
    #[error("vector is not acceptable for `{0}`")]
    NotAcceptable(String),
    #[error("assignment is not stable ({0})")]
    NotStable(String),
    #[error("weight {weight} exceeds the maximal feasible weight {tau}")]
    WeightTooLarge { weight: u64, tau: u64 },
    #[error("not a rotation for this assignment: {0}")]
    NotARotation(String),
    #[error("enumeration limit exceeded: {size} > {limit}")]
    LimitExceeded { size: u128, limit: u128 },
    #[error("gapless condition violated: {0}")]
    GaplessViolated(String),
    #[error("minimum-cost search needs a gapless poset; this one is in general mode")]
    GeneralModeRefused,
    #[error("function is not closed: {0}")]
    NotClosed(String),
    #[error("bad cost vector: {0}")]
    BadCost(String),
    #[error("step budget of {0} exhausted")]
    BudgetExhausted(u64),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of guaranteed properties, as opposed to bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_) | Error::BudgetExhausted(_))
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
