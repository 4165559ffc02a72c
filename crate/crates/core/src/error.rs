use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("non-finite value in sample {sample}")]
    Value { sample: usize },
    #[error("invalid box ({x1}, {y1}, {x2}, {y2})")]
    Geometry { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("feature geometry is too small: {0}")]
    SpatialTooSmall(&'static str),
    #[error("class id {class_id} out of range for {num_classes} classes")]
    ClassId { class_id: u32, num_classes: usize },
    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("class {0} has no samples or mask")]
    MissingClass(u32),
    #[error("distribution is undefined (all source variances are zero)")]
    UndefinedDistribution,
    #[error("value out of domain: {0}")]
    Domain(&'static str),
    #[error("class {0} has neither an intra-class nor an inter-class drop distribution")]
    DegenerateClass(u32),
    #[error("every variance in the profile is zero")]
    DegenerateDataset,
    #[error("training data needs both positive and negative samples")]
    DegenerateLabels,
    #[error("input contract violated: {0}")]
    InputContract(&'static str),
    #[error("invalid synthetic spec: {0}")]
    Spec(&'static str),
    #[error("oracle input too large: {size} > {limit}")]
    OracleScale { size: usize, limit: usize },
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}
