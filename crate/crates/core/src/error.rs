use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {msg}")]
    Config { field: String, msg: String },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("field access: {0}")]
    Field(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular deformation: |det F| = {det:e} at cell {cell}")]
    SingularDeformation { det: f64, cell: usize },

    #[error("growth metric violation: g = {g} (must exceed {bound})")]
    GrowthBound { g: f64, bound: f64 },

    #[error("step size too large: dt * rate = {product} >= 1")]
    StepSize { product: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("hidden compatibility condition violated: integral of divergence data = {integral:e}")]
    HiddenCondition { integral: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("window underflow: window {window} fell below dt {dt} without convergence")]
    WindowUnderflow { window: f64, dt: f64 },

    #[error("compatibility check failed at window start: {0}")]
    Compatibility(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { field: field.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
