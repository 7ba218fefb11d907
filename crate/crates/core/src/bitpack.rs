// SPDX-License-Identifier: Apache-2.0

//! Dense little-endian bit packing for symbols up to 8 bits wide.
//!
//! Symbol `i` occupies bits `[i*w, (i+1)*w)` of the stream, where bit `b`
//! of the stream is bit `b % 8` of byte `b / 8`. For `w = 4` this puts even
//! elements in the low nibble. Unused trailing bits are written as zero.

use crate::error::{Error, Result};

#[inline]
pub const fn packed_len(n: usize, width: u32) -> usize {
    (n * width as usize).div_ceil(8)
}

/// Packs 3- or 4-bit exponent codes.
pub fn pack_codes(codes: &[u8], code_bits: u32) -> Result<Vec<u8>> {
    if !matches!(code_bits, 3 | 4) {
        return Err(Error::config(format!("code width must be 3 or 4 bits, got {code_bits}")));
    }
    pack_bits(codes, code_bits)
}

pub fn unpack_codes(bytes: &[u8], n: usize, code_bits: u32) -> Result<Vec<u8>> {
    if !matches!(code_bits, 3 | 4) {
        return Err(Error::config(format!("code width must be 3 or 4 bits, got {code_bits}")));
    }
    unpack_bits(bytes, n, code_bits)
}

/// Packs symbols of `width` bits (1..=8). Symbols that do not fit are rejected.
pub fn pack_bits(values: &[u8], width: u32) -> Result<Vec<u8>> {
    check_width(width)?;
    if width < 8 {
        let limit = 1u16 << width;
        if let Some(i) = values.iter().position(|&v| v as u16 >= limit) {
            return Err(Error::InvalidInput(format!(
                "symbol {} at index {i} does not fit in {width} bits",
                values[i]
            )));
        }
    }
    let mut out = vec![0u8; packed_len(values.len(), width)];
    pack_into(values, width, &mut out);
    Ok(out)
}

/// Packs pre-validated symbols into `out`, which must be exactly
/// `packed_len(values.len(), width)` bytes and zeroed.
pub(crate) fn pack_into(values: &[u8], width: u32, out: &mut [u8]) {
    debug_assert_eq!(out.len(), packed_len(values.len(), width));
    match width {
        8 => out.copy_from_slice(values),
        4 => {
            let mut pairs = values.chunks_exact(2);
            for (dst, pair) in out.iter_mut().zip(&mut pairs) {
                *dst = pair[0] | (pair[1] << 4);
            }
            if let [last] = pairs.remainder() {
                out[values.len() / 2] = *last;
            }
        }
        _ => {
            let mut acc: u64 = 0;
            let mut nbits = 0u32;
            let mut pos = 0usize;
            for &v in values {
                acc |= (v as u64) << nbits;
                nbits += width;
                while nbits >= 8 {
                    out[pos] = acc as u8;
                    pos += 1;
                    acc >>= 8;
                    nbits -= 8;
                }
            }
            if nbits > 0 {
                out[pos] = acc as u8;
            }
        }
    }
}

/// Inverse of [`pack_bits`]. Trailing padding bits are ignored.
pub fn unpack_bits(bytes: &[u8], n: usize, width: u32) -> Result<Vec<u8>> {
    check_width(width)?;
    let expected = packed_len(n, width);
    if bytes.len() != expected {
        return Err(Error::LengthMismatch {
            section: "packed symbols",
            expected: expected as u64,
            found: bytes.len() as u64,
        });
    }
    let mut out = vec![0u8; n];
    unpack_into(bytes, width, &mut out);
    Ok(out)
}

pub(crate) fn unpack_into(bytes: &[u8], width: u32, out: &mut [u8]) {
    let n = out.len();
    match width {
        8 => out.copy_from_slice(&bytes[..n]),
        4 => {
            for (pair, &b) in out.chunks_mut(2).zip(bytes) {
                pair[0] = b & 0x0F;
                if pair.len() == 2 {
                    pair[1] = b >> 4;
                }
            }
        }
        _ => {
            let mask = (1u64 << width) - 1;
            let mut acc: u64 = 0;
            let mut nbits = 0u32;
            let mut src = bytes.iter();
            for dst in out.iter_mut() {
                while nbits < width {
                    acc |= (*src.next().expect("length checked") as u64) << nbits;
                    nbits += 8;
                }
                *dst = (acc & mask) as u8;
                acc >>= width;
                nbits -= width;
            }
        }
    }
}

/// True when every bit past the last symbol is zero.
pub fn padding_is_zero(bytes: &[u8], n: usize, width: u32) -> bool {
    let used = n * width as usize;
    let rem = used % 8;
    if rem == 0 {
        return true;
    }
    match bytes.get(used / 8) {
        Some(&last) => last >> rem == 0,
        None => true,
    }
}

fn check_width(width: u32) -> Result<()> {
    if (1..=8).contains(&width) {
        Ok(())
    } else {
        Err(Error::config(format!("symbol width {width} outside 1..=8")))
    }
}
