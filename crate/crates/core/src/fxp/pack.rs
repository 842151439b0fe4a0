//! N-bit two's-complement code packing.
//!
//! Codes form a little-endian bit stream: code `i` occupies stream bits
//! `[i·N, i·N + N)`, least significant bit first, where stream bit `j` is bit
//! `j mod 8` of byte `j / 8`. For N = 2 that puts four codes in a byte, code
//! `i` at bits `2i mod 8` and `2i mod 8 + 1`. Unused trailing bits are zero.

use crate::error::{Error, Result};

fn check_bits(bits: u8) -> Result<()> {
    if !(2..=8).contains(&bits) {
        return Err(Error::InvalidArgument(format!("packed code width {bits} outside 2..=8")));
    }
    Ok(())
}

/// Largest symmetric code magnitude for `bits`.
pub fn code_max(bits: u8) -> i32 {
    (1i32 << (bits - 1)) - 1
}

pub fn packed_len(count: usize, bits: u8) -> usize {
    (count * bits as usize).div_ceil(8)
}

pub fn pack_codes(codes: &[i32], bits: u8) -> Result<Vec<u8>> {
    check_bits(bits)?;
    let cmax = code_max(bits);
    let mask = (1u32 << bits) - 1;
    let mut out = vec![0u8; packed_len(codes.len(), bits)];
    for (i, &c) in codes.iter().enumerate() {
        if c < -cmax || c > cmax {
            return Err(Error::CodeOutOfRange { code: c, bits });
        }
        let field = (c as u32) & mask;
        let start = i * bits as usize;
        for b in 0..bits as usize {
            if field >> b & 1 == 1 {
                let j = start + b;
                out[j / 8] |= 1 << (j % 8);
            }
        }
    }
    Ok(out)
}

pub fn unpack_codes(bytes: &[u8], count: usize, bits: u8) -> Result<Vec<i32>> {
    check_bits(bits)?;
    let need = packed_len(count, bits);
    if bytes.len() != need {
        return Err(Error::InvalidArgument(format!(
            "{count} codes of {bits} bits need {need} bytes, got {}",
            bytes.len()
        )));
    }
    let cmax = code_max(bits);
    let sign = 1i32 << (bits - 1);
    let mut codes = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * bits as usize;
        let mut field = 0i32;
        for b in 0..bits as usize {
            let j = start + b;
            field |= i32::from(bytes[j / 8] >> (j % 8) & 1) << b;
        }
        let code = if field & sign != 0 { field - (sign << 1) } else { field };
        if code < -cmax {
            return Err(Error::CodeOutOfRange { code, bits });
        }
        codes.push(code);
    }
    let used = count * bits as usize;
    if !used.is_multiple_of(8) && bytes[used / 8] >> (used % 8) != 0 {
        return Err(Error::InvalidArgument("nonzero padding after the last code".into()));
    }
    Ok(codes)
}
