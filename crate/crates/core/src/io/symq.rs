//! SYMQ: deployable fixed-point models.
//!
//! ```text
//! "SYMQ" | version u32 | layer count u32
//! per layer: tag u8 (0 quantized, 1 float)
//!   quantized: name | rank u32 | dims u32[rank] | bits u8 | exponent i8
//!              | packed codes u8[ceil(prod dims · bits / 8)] | bias f64[dims[0]]
//!   float:     a SYMC layer record
//! ```

use std::path::Path;

use super::record::{
    bias_len, parse_record, read_file, read_float_layer, read_preamble, record_name, write_file, write_float_layer, ByteReader,
    ByteWriter,
};
use crate::error::Result;
use crate::fxp::pack::packed_len;
use crate::fxp::{ModelLayer, QuantizedLayer, QuantizedModel};

pub const SYMQ_MAGIC: &[u8; 4] = b"SYMQ";
pub const SYMQ_VERSION: u32 = 1;

const TAG_QUANTIZED: u8 = 0;
const TAG_FLOAT: u8 = 1;

pub fn encode_quantized(model: &QuantizedModel) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(SYMQ_MAGIC);
    w.u32(SYMQ_VERSION);
    w.u32(model.layers.len() as u32);
    for layer in &model.layers {
        match layer {
            ModelLayer::Quantized(q) => {
                w.u8(TAG_QUANTIZED);
                w.name(&record_name(q.name(), q.kind()));
                w.dims(&q.kind().weight_shape());
                w.u8(q.bits());
                w.u8(q.exponent() as u8);
                w.bytes(q.packed());
                w.f64s(q.bias());
            }
            ModelLayer::Float(l) => {
                w.u8(TAG_FLOAT);
                write_float_layer(&mut w, l);
            }
        }
    }
    w.buf
}

pub fn decode_quantized(bytes: &[u8], path: &Path) -> Result<QuantizedModel> {
    let mut r = ByteReader::new(bytes, path);
    let count = read_preamble(&mut r, SYMQ_MAGIC, SYMQ_VERSION)?;
    let mut layers = Vec::new();
    for i in 0..count {
        r.set_context(format!("layer {i}"));
        match r.u8("layer tag")? {
            TAG_QUANTIZED => {
                let record = r.name()?;
                r.set_context(format!("layer {i} ({record})"));
                let dims = r.dims()?;
                let (name, kind) = parse_record(&r, &record, &dims)?;
                if !kind.is_quantizable() {
                    return Err(r.fail(format!("{} layers cannot carry codes", kind.tag())));
                }
                let bits = r.u8("bits")?;
                let exponent = r.u8("exponent")? as i8;
                if !(2..=8).contains(&bits) {
                    return Err(r.fail(format!("unsupported bit width {bits}")));
                }
                let count = dims
                    .iter()
                    .try_fold(1usize, |a, &d| a.checked_mul(d))
                    .filter(|c| *c <= r.remaining() * 8)
                    .ok_or_else(|| r.fail(format!("code count for dims {dims:?} exceeds the file")))?;
                let packed = r.bytes(packed_len(count, bits), "packed codes")?.to_vec();
                let bias = r.f64s(bias_len(&kind), "bias payload")?;
                let q = QuantizedLayer::from_packed(name, kind, bits, exponent, packed, bias).map_err(|e| r.fail(e))?;
                layers.push(ModelLayer::Quantized(q));
            }
            TAG_FLOAT => layers.push(ModelLayer::Float(read_float_layer(&mut r, i)?)),
            other => return Err(r.fail(format!("unknown layer tag {other}"))),
        }
    }
    r.finish()?;
    Ok(QuantizedModel { layers })
}

pub fn save_quantized(model: &QuantizedModel, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_quantized(model))
}

pub fn load_quantized(path: impl AsRef<Path>) -> Result<QuantizedModel> {
    let path = path.as_ref();
    decode_quantized(&read_file(path)?, path)
}

/// Bytes spent on packed weight codes in a SYMQ file.
pub fn weight_payload_bytes(model: &QuantizedModel) -> usize {
    model.quantized_layers().map(|q| q.packed().len()).sum()
}
