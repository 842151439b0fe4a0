//! Byte-level helpers shared by the SYMC and SYMQ formats. All integers are
//! little-endian.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::nn::{Layer, LayerKind, RunningStats};
use crate::tensor::Tensor;

pub(crate) const MAX_NAME_LEN: usize = 4096;
pub(crate) const MAX_RANK: usize = 8;

pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn name(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    pub fn dims(&mut self, dims: &[usize]) {
        self.u32(dims.len() as u32);
        for &d in dims {
            self.u32(d as u32);
        }
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: PathBuf,
    context: String,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], path: &Path) -> Self {
        ByteReader {
            buf,
            pos: 0,
            path: path.to_path_buf(),
            context: "header".into(),
        }
    }

    pub fn set_context(&mut self, context: String) {
        self.context = context;
    }

    pub fn fail(&self, message: impl std::fmt::Display) -> Error {
        Error::format(&self.path, format!("{}: {message}", self.context))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.fail(format!(
                "truncated while reading {what} ({n} bytes needed, {} left)",
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.bytes(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| self.fail(format!("{what} length overflows")))?;
        let b = self.bytes(len, what)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn name(&mut self) -> Result<String> {
        let len = self.u32("name length")? as usize;
        if len > MAX_NAME_LEN {
            return Err(self.fail(format!("name length {len} exceeds {MAX_NAME_LEN}")));
        }
        let b = self.bytes(len, "name")?;
        String::from_utf8(b.to_vec()).map_err(|_| self.fail("name is not UTF-8"))
    }

    pub fn dims(&mut self) -> Result<Vec<usize>> {
        let rank = self.u32("rank")? as usize;
        if rank > MAX_RANK {
            return Err(self.fail(format!("rank {rank} exceeds {MAX_RANK}")));
        }
        (0..rank).map(|_| self.u32("dimension").map(|d| d as usize)).collect()
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(&self.path, format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// Checks the 4-byte magic and the version word.
pub(crate) fn read_preamble(r: &mut ByteReader, magic: &[u8; 4], version: u32) -> Result<usize> {
    let m = r.bytes(4, "magic")?;
    if m != magic {
        return Err(r.fail(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(m),
            String::from_utf8_lossy(magic)
        )));
    }
    let v = r.u32("version")?;
    if v != version {
        return Err(r.fail(format!("unsupported version {v} (expected {version})")));
    }
    Ok(r.u32("layer count")? as usize)
}

/// `kind/key=value…` descriptor appended to layer names as `name:descriptor`.
/// Dense and conv sizes are carried by the weight dims instead.
pub(crate) fn kind_descriptor(kind: &LayerKind) -> String {
    match kind {
        LayerKind::Dense { .. } => "dense".into(),
        LayerKind::Conv2d { padding, .. } => format!("conv2d/pad={padding}"),
        LayerKind::MaxPool2d { size } => format!("maxpool2d/size={size}"),
        LayerKind::Relu => "relu".into(),
        LayerKind::Flatten => "flatten".into(),
        LayerKind::BatchNorm { eps, momentum, .. } => format!("batchnorm/eps={eps:e}/momentum={momentum:e}"),
    }
}

pub(crate) fn record_name(layer_name: &str, kind: &LayerKind) -> String {
    format!("{layer_name}:{}", kind_descriptor(kind))
}

fn param<T: std::str::FromStr>(params: &[(&str, &str)], key: &str) -> Option<T> {
    params.iter().find(|(k, _)| *k == key).and_then(|(_, v)| v.parse().ok())
}

/// Inverse of [`record_name`] given the stored weight dims.
pub(crate) fn parse_record(r: &ByteReader, record: &str, dims: &[usize]) -> Result<(String, LayerKind)> {
    let (name, desc) = record
        .rsplit_once(':')
        .ok_or_else(|| r.fail(format!("record name {record:?} lacks a kind descriptor")))?;
    let mut parts = desc.split('/');
    let tag = parts.next().unwrap_or_default();
    let params: Vec<(&str, &str)> = parts.filter_map(|p| p.split_once('=')).collect();
    let bad_dims = || r.fail(format!("{tag} layer with weight dims {dims:?}"));
    let missing = |key: &str| r.fail(format!("{tag} descriptor lacks {key}"));
    let kind = match tag {
        "dense" => match *dims {
            [out_features, in_features] => LayerKind::Dense {
                in_features,
                out_features,
            },
            _ => return Err(bad_dims()),
        },
        "conv2d" => match *dims {
            [out_channels, in_channels, kh, kw] if kh == kw => LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel: kh,
                padding: param(&params, "pad").ok_or_else(|| missing("pad"))?,
            },
            _ => return Err(bad_dims()),
        },
        "maxpool2d" | "relu" | "flatten" if !dims.is_empty() => return Err(bad_dims()),
        "maxpool2d" => LayerKind::MaxPool2d {
            size: param(&params, "size").ok_or_else(|| missing("size"))?,
        },
        "relu" => LayerKind::Relu,
        "flatten" => LayerKind::Flatten,
        "batchnorm" => match *dims {
            [3, features] => LayerKind::BatchNorm {
                features,
                eps: param(&params, "eps").ok_or_else(|| missing("eps"))?,
                momentum: param(&params, "momentum").ok_or_else(|| missing("momentum"))?,
            },
            _ => return Err(bad_dims()),
        },
        other => return Err(r.fail(format!("unknown layer kind {other:?}"))),
    };
    if dims.contains(&0) {
        return Err(bad_dims());
    }
    Ok((name.to_string(), kind))
}

/// Stored weight dims: batch-norm packs scale, running mean and running
/// variance as the three rows of a `(3, C)` block; parameterless layers are rank 0.
pub(crate) fn stored_dims(layer: &Layer) -> Vec<usize> {
    match *layer.kind() {
        LayerKind::Dense { .. } | LayerKind::Conv2d { .. } => layer.weights.shape().to_vec(),
        LayerKind::BatchNorm { features, .. } => vec![3, features],
        _ => Vec::new(),
    }
}

pub(crate) fn bias_len(kind: &LayerKind) -> usize {
    match *kind {
        LayerKind::Dense { out_features, .. } => out_features,
        LayerKind::Conv2d { out_channels, .. } => out_channels,
        LayerKind::BatchNorm { features, .. } => features,
        _ => 0,
    }
}

/// Writes a full-precision layer record: name, dims, weight payload, bias payload.
pub(crate) fn write_float_layer(w: &mut ByteWriter, layer: &Layer) {
    w.name(&record_name(layer.name(), layer.kind()));
    w.dims(&stored_dims(layer));
    match layer.kind() {
        LayerKind::BatchNorm { .. } => {
            let running = layer.running.as_ref().expect("batchnorm running stats");
            w.f64s(layer.weights.data());
            w.f64s(&running.mean);
            w.f64s(&running.var);
        }
        _ => w.f64s(layer.weights.data()),
    }
    w.f64s(layer.bias.data());
}

pub(crate) fn read_float_layer(r: &mut ByteReader, index: usize) -> Result<Layer> {
    r.set_context(format!("layer {index}"));
    let record = r.name()?;
    r.set_context(format!("layer {index} ({record})"));
    let dims = r.dims()?;
    let (name, kind) = parse_record(r, &record, &dims)?;
    let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| r.fail("dims overflow"))?;
    let count = if dims.is_empty() { 0 } else { count };
    let weights = r.f64s(count, "weight payload")?;
    let bias = r.f64s(bias_len(&kind), "bias payload")?;
    let mut layer = Layer::new(name, kind.clone());
    match kind {
        LayerKind::BatchNorm { features, .. } => {
            layer.weights = Tensor::new(vec![features], weights[..features].to_vec())?;
            layer.running = Some(RunningStats {
                mean: weights[features..2 * features].to_vec(),
                var: weights[2 * features..].to_vec(),
            });
        }
        LayerKind::Dense { .. } | LayerKind::Conv2d { .. } => layer.weights = Tensor::new(dims, weights)?,
        _ => {}
    }
    if !bias.is_empty() {
        layer.bias = Tensor::new(vec![bias.len()], bias)?;
    }
    Ok(layer)
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
