use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (max |A + Aᵀ| = {defect:e})")]
    NotSkewSymmetric { defect: f64 },
    #[error("matrix is not orthogonal (max |MᵀM - I| = {defect:e})")]
    NotOrthogonal { defect: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix entries must be finite reals")]
    NonFinite,
    #[error("empty input")]
    EmptyInput,
    #[error("finite closure exceeded the element cap ({count} elements); the group is infinite or the cap is too small")]
    CapExceeded { count: usize },
    #[error("group spec has no Lie-algebra generators")]
    NoLieGenerators,
    #[error("vector is not a unit vector (norm {norm})")]
    NotUnitVector { norm: f64 },
    #[error("unknown builtin group '{0}'")]
    UnknownBuiltin(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),
    #[error("orbit is empty")]
    EmptyOrbit,
    #[error("group sample is empty")]
    EmptySample,
    #[error("no local solve converged within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("direction is not tangent to the sphere at w (<w, z> = {inner:e})")]
    NotTangent { inner: f64 },
    #[error("inconsistent input: {0}")]
    InconsistentInput(String),
    #[error("rank {k} is outside [2, {n}]")]
    BadRank { n: usize, k: usize },
    #[error("bracket closure did not stabilise within dimension {bound}")]
    BracketNotClosed { bound: usize },
    #[error("convex hull is degenerate (affine dimension {dim})")]
    DegenerateHull { dim: usize },
    #[error("group acts transitively at the sampling resolution (r_v = {r_v:e})")]
    TransitiveGroup { r_v: f64 },
    #[error("origin is not strictly inside the body")]
    OriginOutside,
    #[error("could not bracket the boundary along the ray")]
    NoBracket,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
