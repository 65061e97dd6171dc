//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {0:?} is not in the domain")]
    VertexNotInDomain(Vec<i64>),

    #[error("domain size overflows the index width: (2n+1)^d with n={n}, d={d}")]
    IndexOverflow { n: i64, d: usize },

    #[error("system too large for exact computation: N={n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("index mismatch: expected length {expected}, got {got}")]
    IndexMismatch { expected: usize, got: usize },

    #[error("boundary assignment does not cover {0} required boundary vertices")]
    BoundaryNotCovered(usize),

    #[error("boundary conditions are not vertexwise ordered")]
    UnorderedBoundaries,

    #[error("chains live on mismatched domains")]
    MismatchedDomains,

    #[error("coarse radius must be at least 2, got {0}")]
    CoarseRadiusTooSmall(u32),

    #[error("cluster-scale range is empty at R={0}; R must be at least {1}")]
    EmptyScaleRange(u32, u32),

    #[error("coarse grid has no Good/Bad labels yet")]
    UnlabeledGrid,

    #[error("vertex {0} is covered by no block")]
    UncoveredVertex(usize),

    #[error("domain is not a box of the required form")]
    NotABox,

    #[error("planted box (m={m}) does not fit in the domain with margin 1")]
    PlantedBoxDoesNotFit { m: u32 },

    #[error("elimination frontier exceeds the supported width ({0} states)")]
    FrontierTooWide(usize),

    #[error("burn-in sample source requires a positive recorded burn-in length")]
    MissingBurnIn,

    #[error("{0}")]
    InvalidParameter(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
