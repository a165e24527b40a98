use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sub-channel {channel} no-error probability {value} outside the completely positive window [1/3, 1]")]
    CpViolation { channel: usize, value: f64 },

    #[error("switching chain is not forgetful (s = {s}); require |s| <= 1 - {margin:e}")]
    NonForgetful { s: f64, margin: f64 },

    #[error("switching matrix row {row} is not stochastic: {detail}")]
    NotStochastic { row: usize, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("capacity requires completely positive parameters; relax_cp is set")]
    RelaxedParams,

    #[error("block length {n} outside 1..={max}")]
    BlockLength { n: usize, max: usize },

    #[error("word length {len} exceeds the path-sum cap of {max}")]
    PathSumLength { len: usize, max: usize },

    #[error("no fixed point in [0, 1] for shrink map {branch}")]
    NoFixedPoint { branch: usize },

    #[error("measure iteration did not converge after {iterations} iterations (last {last}, previous {previous})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        previous: f64,
    },

    #[error("atom budget exceeded: {atoms} atoms > {budget}; loosen the merge tolerance or raise the prune threshold")]
    AtomBudget { atoms: usize, budget: usize },

    #[error("at (s={s}, a_bar={a_bar}, d={d}): {source}")]
    AtPoint {
        s: f64,
        a_bar: f64,
        d: f64,
        source: Box<Error>,
    },

    #[error("{} invalid grid point(s): {}", .0.len(), .0.join("; "))]
    InvalidGrid(Vec<String>),
}

impl Error {
    /// The error with any [`Error::AtPoint`] context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtPoint { source, .. } => source.root(),
            e => e,
        }
    }
}
