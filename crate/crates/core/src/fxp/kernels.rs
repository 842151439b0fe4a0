//! Multiplication-free inference.
//!
//! Each quantized layer accumulates activations signed by their integer code
//! (add for +1, subtract for −1, skip 0), scales the accumulator once by the
//! power of two `2^(−f)`, then adds the float bias. Accumulation runs over the
//! input index in ascending order, the same order the float engine uses, and
//! power-of-two scaling commutes exactly with rounding, so the output matches
//! a float pass through the dequantized weights bit for bit.

use super::model::{ModelLayer, QuantizedLayer, QuantizedModel};
use crate::error::{Error, Result};
use crate::gemm::transpose;
use crate::nn::{im2col, ConvGeometry, LayerKind};
use crate::tensor::Tensor;

pub fn fxp_forward(model: &QuantizedModel, batch: &Tensor) -> Result<Tensor> {
    let mut x = batch.clone();
    for layer in &model.layers {
        x = match layer {
            ModelLayer::Quantized(q) => quantized_layer_forward(q, &x)?,
            ModelLayer::Float(l) => l.infer(&x)?,
        };
    }
    Ok(x)
}

/// `acc[..] += code · row[..]`, with ±1 and 0 handled without multiplication.
#[inline]
fn accumulate(acc: &mut [f64], row: &[f64], code: i32) {
    match code {
        0 => {}
        1 => acc.iter_mut().zip(row).for_each(|(a, &x)| *a += x),
        -1 => acc.iter_mut().zip(row).for_each(|(a, &x)| *a -= x),
        c => {
            let c = f64::from(c);
            acc.iter_mut().zip(row).for_each(|(a, &x)| *a += c * x);
        }
    }
}

pub(crate) fn quantized_layer_forward(q: &QuantizedLayer, x: &Tensor) -> Result<Tensor> {
    let scale = q.spec().step();
    let context = || format!("layer {} ({})", q.name(), q.kind().tag());
    match *q.kind() {
        LayerKind::Dense {
            in_features,
            out_features,
        } => {
            if x.rank() != 2 || x.shape()[1] != in_features {
                return Err(Error::shape(context(), format!("(B, {in_features})"), x.shape()));
            }
            let b = x.shape()[0];
            let xt = transpose(x.data(), b, in_features);
            let mut out = vec![0.0; b * out_features];
            let mut acc = vec![0.0; b];
            for o in 0..out_features {
                acc.fill(0.0);
                let codes = &q.codes()[o * in_features..(o + 1) * in_features];
                for (k, &c) in codes.iter().enumerate() {
                    accumulate(&mut acc, &xt[k * b..(k + 1) * b], c);
                }
                for (s, &a) in acc.iter().enumerate() {
                    out[s * out_features + o] = a * scale + q.bias()[o];
                }
            }
            Tensor::new(vec![b, out_features], out)
        }
        LayerKind::Conv2d {
            in_channels,
            out_channels,
            kernel,
            padding,
        } => {
            let s = x.shape();
            if x.rank() != 4 || s[1] != in_channels || s[2] + 2 * padding < kernel || s[3] + 2 * padding < kernel {
                return Err(Error::shape(context(), format!("(B, {in_channels}, H, W)"), s));
            }
            let geom = ConvGeometry::new(s, kernel, padding);
            let cols = im2col(x.data(), &geom);
            let (ncols, k_len, positions) = (geom.columns(), geom.patch_len(), geom.positions());
            let mut out = vec![0.0; geom.batch * out_channels * positions];
            let mut acc = vec![0.0; ncols];
            for o in 0..out_channels {
                acc.fill(0.0);
                let codes = &q.codes()[o * k_len..(o + 1) * k_len];
                for (k, &c) in codes.iter().enumerate() {
                    accumulate(&mut acc, &cols[k * ncols..(k + 1) * ncols], c);
                }
                let bias = q.bias()[o];
                for b in 0..geom.batch {
                    let dst = &mut out[(b * out_channels + o) * positions..][..positions];
                    for (d, &a) in dst.iter_mut().zip(&acc[b * positions..(b + 1) * positions]) {
                        *d = a * scale + bias;
                    }
                }
            }
            Tensor::new(vec![geom.batch, out_channels, geom.out_height, geom.out_width], out)
        }
        _ => unreachable!("only dense and conv layers are quantized"),
    }
}
