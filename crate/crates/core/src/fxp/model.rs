use super::pack::{pack_codes, unpack_codes};
use crate::error::{Error, Result};
use crate::nn::{Layer, LayerKind, Network};
use crate::quant::{QuantPlan, QuantSpec};
use crate::tensor::Tensor;

/// A dense or convolution layer stored as packed N-bit codes plus one exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedLayer {
    name: String,
    kind: LayerKind,
    bits: u8,
    exponent: i8,
    packed: Vec<u8>,
    codes: Vec<i32>,
    bias: Vec<f64>,
}

impl QuantizedLayer {
    pub fn from_codes(name: impl Into<String>, kind: LayerKind, spec: QuantSpec, codes: Vec<i32>, bias: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if !kind.is_quantizable() {
            return Err(Error::InvalidArgument(format!("layer {name}: {} cannot be quantized", kind.tag())));
        }
        let expected: usize = kind.weight_shape().iter().product();
        if codes.len() != expected || bias.len() != kind.bias_shape()[0] {
            return Err(Error::InvalidArgument(format!(
                "layer {name}: {} codes / {} biases do not fit {:?}",
                codes.len(),
                bias.len(),
                kind.weight_shape()
            )));
        }
        let packed = pack_codes(&codes, spec.bits())?;
        Ok(QuantizedLayer {
            name,
            kind,
            bits: spec.bits(),
            exponent: spec.exponent() as i8,
            packed,
            codes,
            bias,
        })
    }

    /// Rebuilds a layer from its stored packed form, validating every code.
    pub fn from_packed(name: impl Into<String>, kind: LayerKind, bits: u8, exponent: i8, packed: Vec<u8>, bias: Vec<f64>) -> Result<Self> {
        let spec = QuantSpec::new(bits, i32::from(exponent))?;
        let count: usize = kind.weight_shape().iter().product();
        let codes = unpack_codes(&packed, count, bits)?;
        QuantizedLayer::from_codes(name, kind, spec, codes, bias)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &LayerKind {
        &self.kind
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn exponent(&self) -> i8 {
        self.exponent
    }

    pub fn spec(&self) -> QuantSpec {
        QuantSpec::new(self.bits, i32::from(self.exponent)).expect("validated on construction")
    }

    pub fn packed(&self) -> &[u8] {
        &self.packed
    }

    pub fn codes(&self) -> &[i32] {
        &self.codes
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Float weights `code · Δ`.
    pub fn dequantized_weights(&self) -> Tensor {
        let spec = self.spec();
        Tensor::new(
            self.kind.weight_shape(),
            self.codes.iter().map(|&c| spec.dequantize(c)).collect(),
        )
        .expect("shape checked on construction")
    }
}

/// One stage of a deployable model.
#[derive(Debug, Clone)]
pub enum ModelLayer {
    Quantized(QuantizedLayer),
    /// Pooling, activation, reshape, and batch-norm stay in floating point.
    Float(Layer),
}

impl ModelLayer {
    pub fn name(&self) -> &str {
        match self {
            ModelLayer::Quantized(q) => q.name(),
            ModelLayer::Float(l) => l.name(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuantizedModel {
    pub layers: Vec<ModelLayer>,
}

impl QuantizedModel {
    /// Float network with every quantized layer replaced by its dequantized weights.
    pub fn dequantize(&self) -> Network {
        Network::new(
            self.layers
                .iter()
                .map(|l| match l {
                    ModelLayer::Float(layer) => layer.clone(),
                    ModelLayer::Quantized(q) => {
                        let mut layer = Layer::new(q.name(), q.kind().clone());
                        layer.weights = q.dequantized_weights();
                        layer.bias = Tensor::new(vec![q.bias().len()], q.bias().to_vec()).expect("bias shape");
                        layer
                    }
                })
                .collect(),
        )
    }

    pub fn quantized_layers(&self) -> impl Iterator<Item = &QuantizedLayer> {
        self.layers.iter().filter_map(|l| match l {
            ModelLayer::Quantized(q) => Some(q),
            ModelLayer::Float(_) => None,
        })
    }
}

/// Replaces each quantizable layer's weights by their mode codes under `plan`.
pub fn quantize_model(net: &Network, plan: &QuantPlan) -> Result<QuantizedModel> {
    let mut layers = Vec::with_capacity(net.layers().len());
    for (i, layer) in net.layers().iter().enumerate() {
        match plan.for_layer(net, i)? {
            Some(spec) => {
                let codes = layer.weights.data().iter().map(|&w| spec.mode_code(w)).collect();
                layers.push(ModelLayer::Quantized(QuantizedLayer::from_codes(
                    layer.name(),
                    layer.kind().clone(),
                    spec,
                    codes,
                    layer.bias.data().to_vec(),
                )?));
            }
            None => {
                let mut copy = layer.clone();
                copy.clear_cache();
                layers.push(ModelLayer::Float(copy));
            }
        }
    }
    Ok(QuantizedModel { layers })
}
