use alloc::string::String;

use crate::tensor::Shape;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("allocation refused for tensor of shape {0}")]
    AllocationRefused(Shape),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degenerate output: {0}")]
    DegenerateOutput(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid input shape {shape}: {reason}")]
    InputShape { shape: Shape, reason: String },
    #[error("weight store: {0}")]
    WeightStore(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}
