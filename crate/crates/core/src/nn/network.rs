use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{Layer, ParamGrads};
use super::loss::{argmax_rows, softmax_cross_entropy};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output of [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    /// Mean cross-entropy of the cached batch.
    pub loss: f64,
    /// One entry per layer, aligned with [`Network::layers`].
    pub layers: Vec<ParamGrads>,
}

/// An ordered stack of layers trained against softmax cross-entropy.
#[derive(Debug, Clone, Default)]
pub struct Network {
    layers: Vec<Layer>,
    logits: Option<Tensor>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Network { layers, logits: None }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Number of quantizable weights (biases excluded).
    pub fn weight_count(&self) -> usize {
        self.layers.iter().filter(|l| l.quantizable()).map(|l| l.weights.len()).sum()
    }

    /// Training-mode forward pass returning per-class logits.
    pub fn forward(&mut self, batch: &Tensor) -> Result<Tensor> {
        let mut x = batch.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x)?;
        }
        check_logits(&x)?;
        self.logits = Some(x.clone());
        Ok(x)
    }

    /// Inference-mode forward pass; leaves caches untouched.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer.infer(&x)?;
        }
        check_logits(&x)?;
        Ok(x)
    }

    /// Gradient of the mean cross-entropy of the last forward batch.
    pub fn backward(&mut self, labels: &[usize]) -> Result<Gradients> {
        let logits = self.logits.take().ok_or(Error::BackwardBeforeForward)?;
        let (loss, mut grad) = softmax_cross_entropy(&logits, labels)?;
        let first_with_params = self.layers.iter().position(Layer::has_params).unwrap_or(0);
        let mut grads = vec![None; self.layers.len()];
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let (dx, params) = layer.backward(&grad, i > first_with_params)?;
            grads[i] = Some(params);
            match dx {
                Some(dx) => grad = dx,
                None => break,
            }
        }
        // Layers ahead of the first parameterized layer need no gradient.
        for layer in &mut self.layers[..first_with_params] {
            layer.clear_cache();
        }
        let layers = grads
            .into_iter()
            .map(|g| {
                g.unwrap_or(ParamGrads {
                    weights: Tensor::empty(),
                    bias: Tensor::empty(),
                })
            })
            .collect();
        Ok(Gradients { loss, layers })
    }

    /// Fraction of misclassified samples, evaluated in inference mode in chunks.
    pub fn error_rate(&self, inputs: &Tensor, labels: &[usize], chunk: usize) -> Result<f64> {
        classification_error(inputs, labels, chunk, |x| self.predict(x))
    }

    /// True when both networks have the same layer kinds and parameter shapes.
    pub fn same_architecture(&self, other: &Network) -> bool {
        self.architecture_mismatch(other).is_none()
    }

    /// Describes the first layer where `other` departs from this network's
    /// layer kinds or parameter shapes.
    pub fn architecture_mismatch(&self, other: &Network) -> Option<String> {
        if self.layers.len() != other.layers.len() {
            return Some(format!("expected {} layers, found {}", self.layers.len(), other.layers.len()));
        }
        self.layers.iter().zip(&other.layers).enumerate().find_map(|(i, (a, b))| {
            if a.kind() != b.kind() {
                Some(format!(
                    "layer {i} ({}): expected {} with weights {:?}, found {} with weights {:?} ({:?})",
                    a.name(),
                    a.kind().tag(),
                    a.kind().weight_shape(),
                    b.kind().tag(),
                    b.kind().weight_shape(),
                    b.kind()
                ))
            } else if a.weights.shape() != b.weights.shape() || a.bias.shape() != b.bias.shape() {
                Some(format!(
                    "layer {i} ({}): expected weights {:?} / bias {:?}, found {:?} / {:?}",
                    a.name(),
                    a.weights.shape(),
                    a.bias.shape(),
                    b.weights.shape(),
                    b.bias.shape()
                ))
            } else {
                None
            }
        })
    }
}

fn check_logits(x: &Tensor) -> Result<()> {
    if x.rank() != 2 {
        return Err(Error::shape("network output", "(B, classes)", x.shape()));
    }
    Ok(())
}

/// Shared error-rate loop for float and fixed-point forward passes.
pub fn classification_error(
    inputs: &Tensor,
    labels: &[usize],
    chunk: usize,
    mut forward: impl FnMut(&Tensor) -> Result<Tensor>,
) -> Result<f64> {
    let n = inputs.batch();
    if n == 0 || labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {n} inputs",
            labels.len()
        )));
    }
    let mut wrong = 0usize;
    let indices: Vec<usize> = (0..n).collect();
    for idx in indices.chunks(chunk.max(1)) {
        let logits = forward(&inputs.gather_rows(idx))?;
        wrong += argmax_rows(&logits)
            .iter()
            .zip(idx)
            .filter(|(p, &i)| **p != labels[i])
            .count();
    }
    Ok(wrong as f64 / n as f64)
}

/// Fan-in scaled uniform initialization, `U(-√(6/fan_in), √(6/fan_in))`; biases zero.
pub fn init_uniform(net: &mut Network, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in net.layers_mut() {
        if !layer.quantizable() {
            continue;
        }
        let fan_in: usize = layer.weights.shape()[1..].iter().product();
        let bound = (6.0 / fan_in as f64).sqrt();
        for w in layer.weights.data_mut() {
            *w = rng.gen_range(-bound..bound);
        }
        layer.bias.data_mut().fill(0.0);
    }
}

/// LeNet-5 for 28×28 single-channel input: conv(6,5×5,pad 2) → pool → conv(16,5×5) → pool →
/// 120 → 84 → 10, ReLU after every conv/dense but the last. 61,706 parameters.
pub fn build_lenet5(seed: u64) -> Network {
    let mut net = Network::new(vec![
        Layer::conv2d("conv1", 1, 6, 5, 2),
        Layer::relu("relu1"),
        Layer::maxpool2d("pool1", 2),
        Layer::conv2d("conv2", 6, 16, 5, 0),
        Layer::relu("relu2"),
        Layer::maxpool2d("pool2", 2),
        Layer::flatten("flatten"),
        Layer::dense("fc1", 400, 120),
        Layer::relu("relu3"),
        Layer::dense("fc2", 120, 84),
        Layer::relu("relu4"),
        Layer::dense("fc3", 84, 10),
    ]);
    init_uniform(&mut net, seed);
    net
}

/// Dense+ReLU chain over `sizes`, ending in a plain dense layer.
pub fn build_test_mlp(sizes: &[usize], seed: u64) -> Result<Network> {
    if sizes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "an MLP needs at least input and output sizes, got {sizes:?}"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!("zero-width layer in {sizes:?}")));
    }
    let mut layers = Vec::new();
    let last = sizes.len() - 2;
    for (i, pair) in sizes.windows(2).enumerate() {
        layers.push(Layer::dense(format!("fc{}", i + 1), pair[0], pair[1]));
        if i < last {
            layers.push(Layer::relu(format!("relu{}", i + 1)));
        }
    }
    let mut net = Network::new(layers);
    init_uniform(&mut net, seed);
    Ok(net)
}

/// Builds a network from its architecture name (`lenet5` or `mlp:4,3,2`).
/// MLPs get a leading flatten so they accept image batches.
pub fn build_arch(name: &str, seed: u64) -> Result<Network> {
    if name == "lenet5" {
        return Ok(build_lenet5(seed));
    }
    if let Some(spec) = name.strip_prefix("mlp:") {
        let sizes = spec
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("bad MLP sizes {spec:?}: {e}")))?;
        let mut net = build_test_mlp(&sizes, seed)?;
        net.layers.insert(0, Layer::flatten("flat"));
        return Ok(net);
    }
    Err(Error::InvalidArgument(format!(
        "unknown architecture {name:?} (expected lenet5 or mlp:<sizes>)"
    )))
}
