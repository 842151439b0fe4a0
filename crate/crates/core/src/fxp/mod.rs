//! Deployment-side fixed-point models: packed low-bit weight codes with one
//! power-of-two exponent per layer, and multiplication-free inference.

mod kernels;
mod model;
mod ops;
pub mod pack;

pub use kernels::fxp_forward;
pub use model::{quantize_model, ModelLayer, QuantizedLayer, QuantizedModel};
pub use ops::{count_operations, OpCounts};
pub use pack::{pack_codes, unpack_codes};

use crate::error::Result;
use crate::nn::classification_error;
use crate::tensor::Tensor;

impl QuantizedModel {
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        fxp_forward(self, batch)
    }

    /// Test error of the fixed-point path.
    pub fn error_rate(&self, inputs: &Tensor, labels: &[usize], chunk: usize) -> Result<f64> {
        classification_error(inputs, labels, chunk, |x| fxp_forward(self, x))
    }
}
