use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spin index {index} out of range for {n} spins")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("self-loop bond on spin {0}")]
    SelfLoop(usize),

    #[error("duplicate bond between spins {0} and {1}")]
    DuplicateBond(usize, usize),

    #[error("duplicate field term on spin {0}")]
    DuplicateField(usize),

    #[error("invalid lattice size: {0}")]
    InvalidSize(String),

    #[error("{what} size {size} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("model couplings are not homogeneous")]
    InhomogeneousCoupling,

    #[error("partition function vanishes at this point (|Z| = {0:e} relative to scale)")]
    AtZero(f64),

    #[error("ill-conditioned ratio: denominator {0:e} below tolerance")]
    IllConditioned(f64),

    #[error("branch point: {0}")]
    BranchPoint(String),

    #[error("iteration did not converge after {0} steps")]
    NonConvergence(usize),

    #[error("numerical derivative underflow at z = {0}")]
    DerivativeUnderflow(num_complex::Complex64),

    #[error("value {0} is not a probability")]
    NotAProbability(f64),

    #[error("counter overflow while accumulating density of states")]
    CountOverflow,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
