//! Fixed-point quantization-aware training.
//!
//! Networks are trained in `f64` while a regularizer pulls every dense and
//! convolution weight toward the nearest point of a symmetric power-of-two
//! grid, so that the final weights form a mixture of narrow Gaussian modes
//! centered on the grid. The trained model is then exported as packed N-bit
//! codes and run with additions, subtractions and one power-of-two scaling per
//! output value.
//!
//! ```
//! use symog::quant::QuantSpec;
//!
//! let spec = QuantSpec::new(2, 0).unwrap(); // ternary, Δ = 1
//! assert_eq!(spec.quantize(0.6), 1.0);
//! assert_eq!(spec.quantize(-3.7), -1.0);
//! assert_eq!(spec.mode_code(-0.2), 0);
//! ```

pub mod dataset;
pub mod error;
pub mod fxp;
mod gemm;
pub mod io;
pub mod nn;
pub mod quant;
pub mod tensor;
pub mod train;

pub use dataset::{Dataset, Split};
pub use error::{Error, Result};
pub use tensor::Tensor;

/// Guide chapters, compiled so their code blocks run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/quantizer.md")]
    pub mod quantizer {}
    #[doc = include_str!("../../../book/src/regularizer.md")]
    pub mod regularizer {}
    #[doc = include_str!("../../../book/src/schedules.md")]
    pub mod schedules {}
    #[doc = include_str!("../../../book/src/fixed_point_inference.md")]
    pub mod fixed_point_inference {}
    #[doc = include_str!("../../../book/src/file_formats.md")]
    pub mod file_formats {}
}
