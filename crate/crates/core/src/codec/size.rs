// SPDX-License-Identifier: Apache-2.0

//! Closed-form stream sizes.
//!
//! For BF16 with 4-bit codes and 16-bit chunk-relative positions the stream
//! bytes are `N + N/2 + 3M`, giving `2 / (3/2 + 3M/N)`.

use serde::Serialize;

use crate::bitpack::packed_len;
use crate::calibration::CodebookMode;
use crate::error::{Error, Result};
use crate::format::ElementFormat;

use super::{CodecConfig, PositionMode};

/// Byte length of every payload section for a given element/escape count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PayloadLayout {
    /// Entries in the per-chunk escape count table (0 when not chunked).
    pub n_chunks: u64,
    pub count_table: u64,
    pub packed_codes: u64,
    pub sign_mantissa: u64,
    pub escape_positions: u64,
    pub escape_values: u64,
}

impl PayloadLayout {
    /// Code, sign-mantissa and escape streams; excludes the count table.
    pub fn stream_bytes(&self) -> u64 {
        self.packed_codes + self.sign_mantissa + self.escape_positions + self.escape_values
    }

    pub fn total(&self) -> u64 {
        self.count_table + self.stream_bytes()
    }
}

/// Bytes per per-chunk escape count.
pub const CHUNK_COUNT_BYTES: u64 = 4;

/// Width of one stored escape position, 0 when positions are implicit.
pub fn position_bits(mode: CodebookMode, chunk_size: usize, positions: PositionMode) -> u32 {
    match (mode, positions) {
        (CodebookMode::Sentinel, _) => 0,
        (CodebookMode::Explicit, PositionMode::Absolute32) => 32,
        (CodebookMode::Explicit, PositionMode::ChunkRelative) if chunk_size <= 256 => 8,
        (CodebookMode::Explicit, PositionMode::ChunkRelative) => 16,
    }
}

pub fn layout(
    fmt: ElementFormat,
    code_bits: u32,
    mode: CodebookMode,
    chunk_size: usize,
    positions: PositionMode,
    n: u64,
    m: u64,
) -> PayloadLayout {
    let chunked = mode == CodebookMode::Explicit && positions == PositionMode::ChunkRelative;
    let n_chunks = if chunked { n.div_ceil(chunk_size.max(1) as u64) } else { 0 };
    PayloadLayout {
        n_chunks,
        count_table: n_chunks * CHUNK_COUNT_BYTES,
        packed_codes: packed_len(n as usize, code_bits) as u64,
        sign_mantissa: packed_len(n as usize, fmt.sm_bits()) as u64,
        escape_positions: m * position_bits(mode, chunk_size, positions) as u64 / 8,
        escape_values: packed_len(m as usize, fmt.exp_bits()) as u64,
    }
}

fn checked_layout(n: u64, m: u64, config: &CodecConfig) -> Result<PayloadLayout> {
    if m > n {
        return Err(Error::Domain(format!("escape count {m} exceeds element count {n}")));
    }
    config.validate()?;
    Ok(layout(
        config.fmt,
        config.code_bits,
        config.mode,
        config.chunk_size,
        config.position_mode,
        n,
        m,
    ))
}

/// Exact payload bytes (count table plus streams), excluding the header and
/// codebook record.
pub fn compressed_payload_bytes(n: u64, m: u64, config: &CodecConfig) -> Result<u64> {
    Ok(checked_layout(n, m, config)?.total())
}

/// Raw bytes over stream bytes. The per-chunk count table is treated as
/// header metadata and left out, so for BF16 explicit this is exactly
/// `2 / (3/2 + 3ε)` up to byte rounding.
pub fn compression_ratio(n: u64, m: u64, config: &CodecConfig) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("ratio of an empty stream".into()));
    }
    let l = checked_layout(n, m, config)?;
    Ok((n * config.fmt.word_bytes() as u64) as f64 / l.stream_bytes() as f64)
}

/// Raw bytes over the full payload, count table included.
pub fn payload_ratio(n: u64, m: u64, config: &CodecConfig) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("ratio of an empty stream".into()));
    }
    let l = checked_layout(n, m, config)?;
    Ok((n * config.fmt.word_bytes() as u64) as f64 / l.total() as f64)
}
