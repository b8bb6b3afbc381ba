use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid degree {degree} for dimension {dim}")]
    InvalidDegree { dim: usize, degree: i64 },

    #[error("index tuple has repeated entries: {0:?}")]
    RepeatedIndex(Vec<usize>),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { dim: usize, index: usize },

    #[error("arity mismatch: upper has {upper} entries, lower has {lower}")]
    Arity { upper: usize, lower: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("bidegree mismatch: ({0},{1}) vs ({2},{3})")]
    BidegreeMismatch(usize, usize, usize, usize),

    #[error("degree overflow: bidegree ({r},{s}) exceeds dimension {dim}")]
    DegreeOverflow { dim: usize, r: usize, s: usize },

    #[error("degree underflow: cannot contract bidegree ({r},{s})")]
    DegreeUnderflow { r: usize, s: usize },

    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("field provides jets up to order {available}, order {required} required")]
    JetOrder { required: usize, available: usize },

    #[error("point is not in the class H(n,k): {0}")]
    NotInClass(String),

    #[error("perturbation is not trace-free and divergence-free at the point: {0}")]
    NotTransverseTraceless(String),

    #[error("Kronecker route is not proportional to the double-form route: {0}")]
    Convention(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("lapse function F(r) is not positive on the radial window: F({r}) = {value}")]
    Horizon { r: f64, value: f64 },

    #[error("chart style {style} incompatible with curvature {mu}")]
    StyleMismatch { style: String, mu: f64 },

    #[error("finite-difference steps must be positive and strictly decreasing")]
    StepSchedule,

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;
