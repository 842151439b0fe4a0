//! The deterministic training engine: layers with hand-derived backward passes,
//! softmax cross-entropy, and the LeNet-5 / MLP builders.

mod layer;
mod loss;
mod network;

pub use layer::{Layer, LayerKind, ParamGrads, RunningStats};
pub use loss::{argmax_rows, softmax, softmax_cross_entropy};
pub use network::{
    build_arch, build_lenet5, build_test_mlp, classification_error, init_uniform, Gradients, Network,
};

pub(crate) use layer::{im2col, ConvGeometry};
