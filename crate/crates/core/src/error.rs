use alloc::boxed::Box;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op}: expected a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{op}: result dimensions overflow usize")]
    DimensionOverflow { op: &'static str },
    #[error("{op}: length {got} does not match expected {expected}")]
    Length {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("covariance not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },
    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("state norm {norm:e} exceeded the overflow threshold")]
    Overflow { norm: f64 },
    #[error("linearization depends on the state; moment propagation needs a linear SDE")]
    StateDependent,
    #[error("invalid time grid: {0}")]
    Grid(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("{what}: need at least {needed}, got {got}")]
    NotEnoughData {
        what: &'static str,
        needed: usize,
        got: usize,
    },
}
