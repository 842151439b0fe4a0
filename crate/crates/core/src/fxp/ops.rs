use serde::Serialize;

use super::model::{ModelLayer, QuantizedModel};
use crate::error::{Error, Result};
use crate::nn::LayerKind;

/// Static per-sample operation counts of a fixed-point forward pass.
///
/// `additions`, `subtractions`, `shifts` and `multiplications` cover weight
/// application in quantized layers: one add (sub) per +1 (−1) code per output
/// position, `|c|` repeated adds for larger codes, one power-of-two scaling per
/// output value. Bias additions, max/ReLU comparisons and batch-norm arithmetic
/// are tallied separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    pub additions: u64,
    pub subtractions: u64,
    pub shifts: u64,
    pub multiplications: u64,
    pub bias_additions: u64,
    pub comparisons: u64,
    pub float_multiplications: u64,
}

/// Counts operations for one sample of shape `sample_shape` (without the batch dimension).
pub fn count_operations(model: &QuantizedModel, sample_shape: &[usize]) -> Result<OpCounts> {
    let mut counts = OpCounts::default();
    let mut shape = sample_shape.to_vec();
    for layer in &model.layers {
        match layer {
            ModelLayer::Quantized(q) => {
                let (positions, per_output, outputs, out_shape) = match *q.kind() {
                    LayerKind::Dense {
                        in_features,
                        out_features,
                    } => {
                        if shape != [in_features] {
                            return Err(Error::shape(q.name(), format!("({in_features})"), &shape));
                        }
                        (1u64, in_features, out_features, vec![out_features])
                    }
                    LayerKind::Conv2d {
                        in_channels,
                        out_channels,
                        kernel,
                        padding,
                    } => {
                        if shape.len() != 3 || shape[0] != in_channels {
                            return Err(Error::shape(q.name(), format!("({in_channels}, H, W)"), &shape));
                        }
                        let oh = shape[1] + 2 * padding + 1 - kernel;
                        let ow = shape[2] + 2 * padding + 1 - kernel;
                        ((oh * ow) as u64, in_channels * kernel * kernel, out_channels, vec![out_channels, oh, ow])
                    }
                    _ => unreachable!("only dense and conv layers are quantized"),
                };
                for row in q.codes().chunks(per_output) {
                    for &c in row {
                        let reps = c.unsigned_abs() as u64 * positions;
                        if c > 0 {
                            counts.additions += reps;
                        } else {
                            counts.subtractions += reps;
                        }
                    }
                }
                let values = outputs as u64 * positions;
                counts.shifts += values;
                counts.bias_additions += values;
                shape = out_shape;
            }
            ModelLayer::Float(l) => match *l.kind() {
                LayerKind::MaxPool2d { size } => {
                    let out = vec![shape[0], shape[1] / size, shape[2] / size];
                    counts.comparisons += (out.iter().product::<usize>() * (size * size - 1)) as u64;
                    shape = out;
                }
                LayerKind::Relu => counts.comparisons += shape.iter().product::<usize>() as u64,
                LayerKind::Flatten => shape = vec![shape.iter().product()],
                LayerKind::BatchNorm { .. } => {
                    let n = shape.iter().product::<usize>() as u64;
                    counts.float_multiplications += n;
                    counts.bias_additions += n;
                }
                LayerKind::Dense { .. } | LayerKind::Conv2d { .. } => {
                    return Err(Error::InvalidArgument(format!(
                        "layer {} is an unquantized {}",
                        l.name(),
                        l.kind().tag()
                    )));
                }
            },
        }
    }
    Ok(counts)
}
