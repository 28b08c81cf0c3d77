//! The keyword-spotting network: two valid convolutions with ReLU, each
//! followed by non-overlapping max pooling and batch normalization, then
//! flatten, a 64-unit ReLU dense layer, dropout and a 9-way softmax.
//!
//! Everything is generic over [`Real`] so the same code runs in `f32` for
//! training and inference and in `f64` for gradient verification.

mod layers;
mod network;
mod spec;
mod tensor;

use thiserror::Error;

pub use layers::{softmax, BatchNorm, Conv2d, Dense, Dropout, MaxPool};
pub use network::{ForwardTrace, Gradients, Layer, Mode, Network, ParamReport};
pub use spec::{Activation, LayerSpec, NetworkSpec};
pub use tensor::{Shape, Tensor3};

/// Floating-point type the network computes in.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + std::iter::Sum + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("shape mismatch at {layer}: expected {expected}, found {found}")]
    ShapeMismatch {
        layer: String,
        expected: String,
        found: String,
    },
    #[error("train-mode batch normalization needs at least one example")]
    EmptyBatch,
    #[error("trace was produced by network version {trace}, network is now at {network}")]
    StaleTrace { trace: u64, network: u64 },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
}

impl NetError {
    pub(crate) fn shape(layer: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        NetError::ShapeMismatch {
            layer: layer.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
