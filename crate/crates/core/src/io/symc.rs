//! SYMC: full-precision network checkpoints.
//!
//! ```text
//! "SYMC" | version u32 | layer count u32
//! per layer: name len u32 | "name:descriptor" UTF-8 | rank u32 | dims u32[rank]
//!            | weights f64[prod dims] | bias f64[bias len]
//! ```

use std::path::Path;

use super::record::{read_file, read_float_layer, read_preamble, write_file, write_float_layer, ByteReader, ByteWriter};
use crate::error::Result;
use crate::nn::Network;

pub const SYMC_MAGIC: &[u8; 4] = b"SYMC";
pub const SYMC_VERSION: u32 = 1;

pub fn encode_checkpoint(net: &Network) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(SYMC_MAGIC);
    w.u32(SYMC_VERSION);
    w.u32(net.layers().len() as u32);
    for layer in net.layers() {
        write_float_layer(&mut w, layer);
    }
    w.buf
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Network> {
    let mut r = ByteReader::new(bytes, path);
    let count = read_preamble(&mut r, SYMC_MAGIC, SYMC_VERSION)?;
    let mut layers = Vec::new();
    for i in 0..count {
        layers.push(read_float_layer(&mut r, i)?);
    }
    r.finish()?;
    Ok(Network::new(layers))
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_checkpoint(net))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    decode_checkpoint(&read_file(path)?, path)
}

/// Bytes spent on quantizable weights in a SYMC file (8 per weight).
pub fn weight_payload_bytes(net: &Network) -> usize {
    net.weight_count() * 8
}
