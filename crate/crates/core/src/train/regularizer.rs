//! The multimodal Gaussian prior: a per-layer mean squared distance to the
//! nearest fixed-point grid point.

use crate::error::Result;
use crate::nn::Network;
use crate::quant::{quantization_mse, QuantPlan};
use crate::tensor::Tensor;

/// `R = Σ_l (1/M_l) Σ_i (w_{l,i} − Q(w_{l,i}))²` over quantizable weights.
pub fn reg_value(net: &Network, plan: &QuantPlan) -> Result<f64> {
    let mut total = 0.0;
    for (i, layer) in net.layers().iter().enumerate() {
        if let Some(spec) = plan.for_layer(net, i)? {
            total += quantization_mse(layer.weights.data(), &spec);
        }
    }
    Ok(total)
}

/// `∂R/∂w = (2/M_l)(w − Q(w))`, with the quantizer's own derivative taken as zero.
///
/// One entry per layer; `None` for layers the regularizer does not touch.
pub fn reg_grad(net: &Network, plan: &QuantPlan) -> Result<Vec<Option<Tensor>>> {
    (0..net.layers().len())
        .map(|i| {
            let layer = &net.layers()[i];
            Ok(plan.for_layer(net, i)?.map(|spec| {
                let scale = 2.0 / layer.weights.len() as f64;
                let data = layer
                    .weights
                    .data()
                    .iter()
                    .map(|&w| scale * (w - spec.quantize(w)))
                    .collect();
                Tensor::new(layer.weights.shape().to_vec(), data).expect("same shape as weights")
            }))
        })
        .collect()
}
