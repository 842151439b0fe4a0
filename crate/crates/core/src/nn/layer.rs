use crate::error::{Error, Result};
use crate::gemm::{matmul, matmul_abt, transpose};
use crate::tensor::Tensor;

/// Structural description of a layer. Parameters live on [`Layer`].
#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Dense {
        in_features: usize,
        out_features: usize,
    },
    /// Stride-1 convolution with symmetric zero padding.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        padding: usize,
    },
    /// Non-overlapping max pooling (`stride == size`).
    MaxPool2d { size: usize },
    Relu,
    /// Per-channel batch normalization over rank-2 `(B, C)` or rank-4 `(B, C, H, W)` inputs.
    BatchNorm { features: usize, eps: f64, momentum: f64 },
    Flatten,
}

impl LayerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LayerKind::Dense { .. } => "dense",
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::MaxPool2d { .. } => "maxpool2d",
            LayerKind::Relu => "relu",
            LayerKind::BatchNorm { .. } => "batchnorm",
            LayerKind::Flatten => "flatten",
        }
    }

    /// Only dense and convolution weights take part in fixed-point training.
    pub fn is_quantizable(&self) -> bool {
        matches!(self, LayerKind::Dense { .. } | LayerKind::Conv2d { .. })
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        match *self {
            LayerKind::Dense {
                in_features,
                out_features,
            } => vec![out_features, in_features],
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![out_channels, in_channels, kernel, kernel],
            LayerKind::BatchNorm { features, .. } => vec![features],
            _ => vec![0],
        }
    }

    pub fn bias_shape(&self) -> Vec<usize> {
        match *self {
            LayerKind::Dense { out_features, .. } => vec![out_features],
            LayerKind::Conv2d { out_channels, .. } => vec![out_channels],
            LayerKind::BatchNorm { features, .. } => vec![features],
            _ => vec![0],
        }
    }
}

/// Gradients of one layer's parameters. Empty tensors for parameterless layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl ParamGrads {
    fn none() -> Self {
        ParamGrads {
            weights: Tensor::empty(),
            bias: Tensor::empty(),
        }
    }
}

#[derive(Debug, Clone, Default)]
enum Cache {
    #[default]
    Empty,
    Dense { input: Tensor },
    Conv { cols: Vec<f64>, input_shape: Vec<usize> },
    Pool { argmax: Vec<usize>, input_shape: Vec<usize> },
    Relu { input: Tensor },
    BatchNorm { normalized: Vec<f64>, inv_std: Vec<f64>, shape: Vec<usize> },
    Flatten { input_shape: Vec<usize> },
}

/// Running statistics of a batch-normalization layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Layer {
    name: String,
    kind: LayerKind,
    /// Dense/conv weights, or batch-norm scale.
    pub weights: Tensor,
    /// Dense/conv bias, or batch-norm shift.
    pub bias: Tensor,
    /// Set for batch-norm layers only.
    pub running: Option<RunningStats>,
    cache: Cache,
}

impl Layer {
    /// A layer with zero parameters (identity scale for batch-norm).
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        let (weights, running) = match kind {
            LayerKind::BatchNorm { features, .. } => (
                Tensor::from_fn(&[features], |_| 1.0),
                Some(RunningStats {
                    mean: vec![0.0; features],
                    var: vec![1.0; features],
                }),
            ),
            _ if kind.is_quantizable() => (Tensor::zeros(&kind.weight_shape()), None),
            _ => (Tensor::empty(), None),
        };
        let bias = match kind {
            LayerKind::Dense { .. } | LayerKind::Conv2d { .. } | LayerKind::BatchNorm { .. } => {
                Tensor::zeros(&kind.bias_shape())
            }
            _ => Tensor::empty(),
        };
        Layer {
            name: name.into(),
            kind,
            weights,
            bias,
            running,
            cache: Cache::Empty,
        }
    }

    pub fn dense(name: impl Into<String>, in_features: usize, out_features: usize) -> Self {
        Layer::new(
            name,
            LayerKind::Dense {
                in_features,
                out_features,
            },
        )
    }

    pub fn conv2d(name: impl Into<String>, in_channels: usize, out_channels: usize, kernel: usize, padding: usize) -> Self {
        Layer::new(
            name,
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                padding,
            },
        )
    }

    pub fn maxpool2d(name: impl Into<String>, size: usize) -> Self {
        Layer::new(name, LayerKind::MaxPool2d { size })
    }

    pub fn relu(name: impl Into<String>) -> Self {
        Layer::new(name, LayerKind::Relu)
    }

    pub fn flatten(name: impl Into<String>) -> Self {
        Layer::new(name, LayerKind::Flatten)
    }

    pub fn batchnorm(name: impl Into<String>, features: usize) -> Self {
        Layer::new(
            name,
            LayerKind::BatchNorm {
                features,
                eps: 1e-5,
                momentum: 0.1,
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &LayerKind {
        &self.kind
    }

    pub fn quantizable(&self) -> bool {
        self.kind.is_quantizable()
    }

    pub fn has_params(&self) -> bool {
        !self.weights.is_empty() || !self.bias.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = Cache::Empty;
    }

    fn shape_err(&self, expected: impl Into<String>, actual: &[usize]) -> Error {
        Error::shape(format!("layer {} ({})", self.name, self.kind.tag()), expected, actual)
    }

    /// Training-mode forward pass; caches what `backward` needs.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (out, cache) = self.apply(x, true)?;
        self.cache = cache;
        self.update_running_stats(x);
        Ok(out)
    }

    /// Inference-mode forward pass; batch-norm uses running statistics.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.apply(x, false).map(|(out, _)| out)
    }

    fn apply(&self, x: &Tensor, train: bool) -> Result<(Tensor, Cache)> {
        match self.kind {
            LayerKind::Dense {
                in_features,
                out_features,
            } => {
                if x.rank() != 2 || x.shape()[1] != in_features {
                    return Err(self.shape_err(format!("(B, {in_features})"), x.shape()));
                }
                let out = dense_forward(&self.weights, &self.bias, x, in_features, out_features);
                let cache = if train { Cache::Dense { input: x.clone() } } else { Cache::Empty };
                Ok((out, cache))
            }
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                padding,
            } => {
                let s = x.shape();
                if x.rank() != 4 || s[1] != in_channels || s[2] + 2 * padding < kernel || s[3] + 2 * padding < kernel {
                    return Err(self.shape_err(
                        format!("(B, {in_channels}, H, W) with H, W >= {}", kernel.saturating_sub(2 * padding)),
                        s,
                    ));
                }
                let geom = ConvGeometry::new(s, kernel, padding);
                let cols = im2col(x.data(), &geom);
                let mut out_mat = vec![0.0; out_channels * geom.columns()];
                matmul(self.weights.data(), &cols, &mut out_mat, out_channels, geom.patch_len(), geom.columns());
                let out = conv_output(&out_mat, self.bias.data(), &geom, out_channels);
                let cache = if train {
                    Cache::Conv {
                        cols,
                        input_shape: s.to_vec(),
                    }
                } else {
                    Cache::Empty
                };
                Ok((out, cache))
            }
            LayerKind::MaxPool2d { size } => {
                let s = x.shape();
                if x.rank() != 4 || size == 0 || s[2] < size || s[3] < size {
                    return Err(self.shape_err(format!("(B, C, H, W) with H, W >= {size}"), s));
                }
                let (out, argmax) = maxpool_forward(x, size);
                let cache = if train {
                    Cache::Pool {
                        argmax,
                        input_shape: s.to_vec(),
                    }
                } else {
                    Cache::Empty
                };
                Ok((out, cache))
            }
            LayerKind::Relu => {
                let out = Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| v.max(0.0)).collect())?;
                let cache = if train { Cache::Relu { input: x.clone() } } else { Cache::Empty };
                Ok((out, cache))
            }
            LayerKind::Flatten => {
                if x.rank() < 2 {
                    return Err(self.shape_err("(B, ...)", x.shape()));
                }
                let b = x.shape()[0];
                let rest = x.len() / b.max(1);
                let out = x.clone().reshape(vec![b, rest])?;
                let cache = if train {
                    Cache::Flatten {
                        input_shape: x.shape().to_vec(),
                    }
                } else {
                    Cache::Empty
                };
                Ok((out, cache))
            }
            LayerKind::BatchNorm { features, eps, .. } => {
                let s = x.shape();
                if !(x.rank() == 2 || x.rank() == 4) || s[1] != features {
                    return Err(self.shape_err(format!("(B, {features}) or (B, {features}, H, W)"), s));
                }
                if train {
                    let (out, normalized, inv_std) = batchnorm_train(x, self.weights.data(), self.bias.data(), eps);
                    Ok((
                        out,
                        Cache::BatchNorm {
                            normalized,
                            inv_std,
                            shape: s.to_vec(),
                        },
                    ))
                } else {
                    let running = self.running.as_ref().expect("batchnorm layer carries running stats");
                    Ok((
                        batchnorm_eval(x, self.weights.data(), self.bias.data(), running, eps),
                        Cache::Empty,
                    ))
                }
            }
        }
    }

    /// Updates batch-norm running statistics from the cached batch. No-op for other kinds.
    fn update_running_stats(&mut self, x: &Tensor) {
        if let (LayerKind::BatchNorm { momentum, .. }, Some(running)) = (&self.kind, self.running.as_mut()) {
            let (mean, var) = channel_moments(x);
            let count = (x.len() / mean.len().max(1)) as f64;
            let unbias = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
            for c in 0..mean.len() {
                running.mean[c] = (1.0 - momentum) * running.mean[c] + momentum * mean[c];
                running.var[c] = (1.0 - momentum) * running.var[c] + momentum * var[c] * unbias;
            }
        }
    }

    /// Backpropagates `grad_out` through the cached forward pass.
    ///
    /// The input gradient is skipped when `need_input_grad` is false (first layer).
    pub fn backward(&mut self, grad_out: &Tensor, need_input_grad: bool) -> Result<(Option<Tensor>, ParamGrads)> {
        let cache = std::mem::take(&mut self.cache);
        match (&self.kind, cache) {
            (
                &LayerKind::Dense {
                    in_features,
                    out_features,
                },
                Cache::Dense { input },
            ) => {
                let b = input.shape()[0];
                let dy = grad_out.data();
                let dy_t = transpose(dy, b, out_features);
                let mut dw = vec![0.0; out_features * in_features];
                matmul(&dy_t, input.data(), &mut dw, out_features, b, in_features);
                let db = column_sums(dy, b, out_features);
                let dx = need_input_grad.then(|| {
                    let mut dx = vec![0.0; b * in_features];
                    matmul(dy, self.weights.data(), &mut dx, b, out_features, in_features);
                    Tensor::new(vec![b, in_features], dx).expect("dense input grad shape")
                });
                Ok((
                    dx,
                    ParamGrads {
                        weights: Tensor::new(vec![out_features, in_features], dw)?,
                        bias: Tensor::new(vec![out_features], db)?,
                    },
                ))
            }
            (
                &LayerKind::Conv2d {
                    out_channels, kernel, padding, ..
                },
                Cache::Conv { cols, input_shape },
            ) => {
                let geom = ConvGeometry::new(&input_shape, kernel, padding);
                let ncols = geom.columns();
                let k = geom.patch_len();
                let dmat = conv_grad_matrix(grad_out.data(), &geom, out_channels);
                let mut dw = vec![0.0; out_channels * k];
                matmul_abt(&dmat, &cols, &mut dw, out_channels, ncols, k);
                let db: Vec<f64> = dmat.chunks_exact(ncols).map(|row| row.iter().sum()).collect();
                let dx = need_input_grad.then(|| {
                    let w_t = transpose(self.weights.data(), out_channels, k);
                    let mut dcols = vec![0.0; k * ncols];
                    matmul(&w_t, &dmat, &mut dcols, k, out_channels, ncols);
                    Tensor::new(input_shape.clone(), col2im(&dcols, &geom)).expect("conv input grad shape")
                });
                Ok((
                    dx,
                    ParamGrads {
                        weights: Tensor::new(self.kind.weight_shape(), dw)?,
                        bias: Tensor::new(vec![out_channels], db)?,
                    },
                ))
            }
            (LayerKind::MaxPool2d { .. }, Cache::Pool { argmax, input_shape }) => {
                let mut dx = vec![0.0; input_shape.iter().product()];
                for (&src, &g) in argmax.iter().zip(grad_out.data()) {
                    dx[src] += g;
                }
                Ok((Some(Tensor::new(input_shape, dx)?), ParamGrads::none()))
            }
            (LayerKind::Relu, Cache::Relu { input }) => {
                let dx = input
                    .data()
                    .iter()
                    .zip(grad_out.data())
                    .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                    .collect();
                Ok((Some(Tensor::new(input.shape().to_vec(), dx)?), ParamGrads::none()))
            }
            (LayerKind::Flatten, Cache::Flatten { input_shape }) => {
                Ok((Some(grad_out.clone().reshape(input_shape)?), ParamGrads::none()))
            }
            (
                LayerKind::BatchNorm { .. },
                Cache::BatchNorm {
                    normalized,
                    inv_std,
                    shape,
                },
            ) => {
                let (dx, dgamma, dbeta) = batchnorm_backward(grad_out, &normalized, &inv_std, self.weights.data(), &shape);
                Ok((
                    Some(Tensor::new(shape, dx)?),
                    ParamGrads {
                        weights: Tensor::new(vec![dgamma.len()], dgamma)?,
                        bias: Tensor::new(vec![dbeta.len()], dbeta)?,
                    },
                ))
            }
            _ => Err(Error::BackwardBeforeForward),
        }
    }
}

pub(crate) fn dense_forward(w: &Tensor, bias: &Tensor, x: &Tensor, in_features: usize, out_features: usize) -> Tensor {
    let b = x.shape()[0];
    let w_t = transpose(w.data(), out_features, in_features);
    let mut out = vec![0.0; b * out_features];
    matmul(x.data(), &w_t, &mut out, b, in_features, out_features);
    for row in out.chunks_exact_mut(out_features) {
        for (v, &bv) in row.iter_mut().zip(bias.data()) {
            *v += bv;
        }
    }
    Tensor::new(vec![b, out_features], out).expect("dense output shape")
}

fn column_sums(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut sums = vec![0.0; cols];
    for row in m.chunks_exact(cols).take(rows) {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// Geometry of a stride-1 padded convolution over a `(B, C, H, W)` input.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub padding: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl ConvGeometry {
    pub fn new(input_shape: &[usize], kernel: usize, padding: usize) -> Self {
        let (height, width) = (input_shape[2], input_shape[3]);
        ConvGeometry {
            batch: input_shape[0],
            channels: input_shape[1],
            height,
            width,
            kernel,
            padding,
            out_height: height + 2 * padding + 1 - kernel,
            out_width: width + 2 * padding + 1 - kernel,
        }
    }

    pub fn positions(&self) -> usize {
        self.out_height * self.out_width
    }

    /// Number of im2col columns: one per (sample, output position).
    pub fn columns(&self) -> usize {
        self.batch * self.positions()
    }

    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }
}

/// Unfolds `(B, C, H, W)` into a `(C·k·k) × (B·Ho·Wo)` matrix.
pub(crate) fn im2col(x: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let ncols = g.columns();
    let positions = g.positions();
    let mut cols = vec![0.0; g.patch_len() * ncols];
    let pad = g.padding as isize;
    for c in 0..g.channels {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let dst_row = &mut cols[row * ncols..(row + 1) * ncols];
                for b in 0..g.batch {
                    let plane = &x[(b * g.channels + c) * g.height * g.width..][..g.height * g.width];
                    let dst = &mut dst_row[b * positions..(b + 1) * positions];
                    for oy in 0..g.out_height {
                        let iy = oy as isize + ky as isize - pad;
                        if iy < 0 || iy >= g.height as isize {
                            continue;
                        }
                        let src_row = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                        let dst_line = &mut dst[oy * g.out_width..(oy + 1) * g.out_width];
                        // Output columns whose input column falls inside the image.
                        let ox_lo = (pad - kx as isize).max(0) as usize;
                        let ox_hi = ((g.width as isize + pad - kx as isize).min(g.out_width as isize)).max(0) as usize;
                        for ox in ox_lo..ox_hi {
                            dst_line[ox] = src_row[ox + kx - g.padding];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: folds column gradients back onto the input.
fn col2im(cols: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let ncols = g.columns();
    let positions = g.positions();
    let mut x = vec![0.0; g.batch * g.channels * g.height * g.width];
    let pad = g.padding as isize;
    for c in 0..g.channels {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let src_row = &cols[row * ncols..(row + 1) * ncols];
                for b in 0..g.batch {
                    let plane = &mut x[(b * g.channels + c) * g.height * g.width..][..g.height * g.width];
                    let src = &src_row[b * positions..(b + 1) * positions];
                    for oy in 0..g.out_height {
                        let iy = oy as isize + ky as isize - pad;
                        if iy < 0 || iy >= g.height as isize {
                            continue;
                        }
                        let dst_row = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                        let src_line = &src[oy * g.out_width..(oy + 1) * g.out_width];
                        let ox_lo = (pad - kx as isize).max(0) as usize;
                        let ox_hi = ((g.width as isize + pad - kx as isize).min(g.out_width as isize)).max(0) as usize;
                        for ox in ox_lo..ox_hi {
                            dst_row[ox + kx - g.padding] += src_line[ox];
                        }
                    }
                }
            }
        }
    }
    x
}

/// Rearranges a `Cout × (B·P)` product into `(B, Cout, Ho, Wo)` and adds the bias.
fn conv_output(out_mat: &[f64], bias: &[f64], g: &ConvGeometry, out_channels: usize) -> Tensor {
    let positions = g.positions();
    let ncols = g.columns();
    let mut out = vec![0.0; g.batch * out_channels * positions];
    for o in 0..out_channels {
        let src_row = &out_mat[o * ncols..(o + 1) * ncols];
        for b in 0..g.batch {
            let dst = &mut out[(b * out_channels + o) * positions..][..positions];
            for (d, &s) in dst.iter_mut().zip(&src_row[b * positions..(b + 1) * positions]) {
                *d = s + bias[o];
            }
        }
    }
    Tensor::new(vec![g.batch, out_channels, g.out_height, g.out_width], out).expect("conv output shape")
}

fn conv_grad_matrix(dy: &[f64], g: &ConvGeometry, out_channels: usize) -> Vec<f64> {
    let positions = g.positions();
    let ncols = g.columns();
    let mut dmat = vec![0.0; out_channels * ncols];
    for b in 0..g.batch {
        for o in 0..out_channels {
            let src = &dy[(b * out_channels + o) * positions..][..positions];
            dmat[o * ncols + b * positions..][..positions].copy_from_slice(src);
        }
    }
    dmat
}

fn maxpool_forward(x: &Tensor, size: usize) -> (Tensor, Vec<usize>) {
    let s = x.shape();
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    let (oh, ow) = (h / size, w / size);
    let mut out = Vec::with_capacity(b * c * oh * ow);
    let mut argmax = Vec::with_capacity(b * c * oh * ow);
    let data = x.data();
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * size * w + ox * size;
                for dy in 0..size {
                    for dx in 0..size {
                        let idx = base + (oy * size + dy) * w + ox * size + dx;
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    (Tensor::new(vec![b, c, oh, ow], out).expect("pool output shape"), argmax)
}

/// Index of the channel of flat element `i` and the number of elements per channel.
fn channel_layout(shape: &[usize]) -> (usize, usize, usize) {
    let batch = shape[0];
    let channels = shape[1];
    let spatial: usize = shape[2..].iter().product();
    (batch, channels, spatial)
}

fn channel_moments(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (batch, channels, spatial) = channel_layout(x.shape());
    let count = (batch * spatial) as f64;
    let data = x.data();
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    for b in 0..batch {
        for c in 0..channels {
            mean[c] += data[(b * channels + c) * spatial..][..spatial].iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    for b in 0..batch {
        for c in 0..channels {
            var[c] += data[(b * channels + c) * spatial..][..spatial]
                .iter()
                .map(|v| (v - mean[c]).powi(2))
                .sum::<f64>();
        }
    }
    var.iter_mut().for_each(|v| *v /= count);
    (mean, var)
}

fn batchnorm_train(x: &Tensor, gamma: &[f64], beta: &[f64], eps: f64) -> (Tensor, Vec<f64>, Vec<f64>) {
    let (batch, channels, spatial) = channel_layout(x.shape());
    let (mean, var) = channel_moments(x);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut normalized = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for b in 0..batch {
        for c in 0..channels {
            let off = (b * channels + c) * spatial;
            for i in off..off + spatial {
                let n = (x.data()[i] - mean[c]) * inv_std[c];
                normalized[i] = n;
                out[i] = gamma[c] * n + beta[c];
            }
        }
    }
    (Tensor::new(x.shape().to_vec(), out).expect("bn shape"), normalized, inv_std)
}

fn batchnorm_eval(x: &Tensor, gamma: &[f64], beta: &[f64], running: &RunningStats, eps: f64) -> Tensor {
    let (batch, channels, spatial) = channel_layout(x.shape());
    let mut out = x.data().to_vec();
    for b in 0..batch {
        for c in 0..channels {
            let scale = gamma[c] / (running.var[c] + eps).sqrt();
            for v in &mut out[(b * channels + c) * spatial..][..spatial] {
                *v = (*v - running.mean[c]) * scale + beta[c];
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out).expect("bn shape")
}

fn batchnorm_backward(
    grad_out: &Tensor,
    normalized: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    shape: &[usize],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (batch, channels, spatial) = channel_layout(shape);
    let count = (batch * spatial) as f64;
    let dy = grad_out.data();
    let mut dgamma = vec![0.0; channels];
    let mut dbeta = vec![0.0; channels];
    for b in 0..batch {
        for c in 0..channels {
            let off = (b * channels + c) * spatial;
            for i in off..off + spatial {
                dgamma[c] += dy[i] * normalized[i];
                dbeta[c] += dy[i];
            }
        }
    }
    let mut dx = vec![0.0; dy.len()];
    for b in 0..batch {
        for c in 0..channels {
            let off = (b * channels + c) * spatial;
            for i in off..off + spatial {
                let dxhat = dy[i] * gamma[c];
                dx[i] = inv_std[c] / count * (count * dxhat - gamma[c] * dbeta[c] - normalized[i] * gamma[c] * dgamma[c]);
            }
        }
    }
    (dx, dgamma, dbeta)
}
