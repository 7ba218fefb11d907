// SPDX-License-Identifier: Apache-2.0

//! On-disk formats: compressed containers (`SPLZ`) and raw tensor dumps
//! (`SZRW`). All integers are little-endian.
//!
//! Container layout:
//!
//! | offset | size | field                                               |
//! |--------|------|-----------------------------------------------------|
//! | 0      | 4    | magic `SPLZ`                                        |
//! | 4      | 1    | version (1)                                         |
//! | 5      | 1    | format: 0 bf16, 1 e5m2, 2 e4m3                      |
//! | 6      | 1    | mode: 0 explicit/chunk, 1 sentinel, 2 explicit/abs32 |
//! | 7      | 1    | code bits (3 or 4)                                  |
//! | 8      | 4    | chunk size                                          |
//! | 12     | 8    | element count N                                     |
//! | 20     | 8    | escape count M                                      |
//! | 28     | 9+k  | codebook record (`SZCB`)                            |
//!
//! followed by the sections, in order: per-chunk escape counts (u32 each,
//! explicit/chunk mode only), packed codes, sign-mantissa units, escape
//! positions (1, 2 or 4 bytes each; absent in sentinel mode), and escape
//! values bit-packed at the exponent width.
//!
//! Raw tensor files are `SZRW`, version, format, N (u64), then N words.

use std::io::{Read, Write};

use crate::bitpack::{pack_bits, padding_is_zero, unpack_bits};
use crate::calibration::{CodebookMode, ExponentCodebook};
use crate::codec::size::{layout, position_bits, PayloadLayout};
use crate::codec::{EncodedStreams, EscapeChunk, EscapeStreams, PositionMode};
use crate::error::{Error, Result};
use crate::format::{ElementFormat, RawTensorStream};

pub const CONTAINER_MAGIC: [u8; 4] = *b"SPLZ";
pub const CONTAINER_VERSION: u8 = 1;
pub const CONTAINER_HEADER_LEN: usize = 28;

pub const RAW_MAGIC: [u8; 4] = *b"SZRW";
pub const RAW_VERSION: u8 = 1;
pub const RAW_HEADER_LEN: usize = 14;

const MODE_EXPLICIT_CHUNK: u8 = 0;
const MODE_SENTINEL: u8 = 1;
const MODE_EXPLICIT_ABS32: u8 = 2;

fn mode_byte(streams: &EncodedStreams) -> u8 {
    match (streams.mode(), &streams.escapes) {
        (CodebookMode::Sentinel, _) => MODE_SENTINEL,
        (CodebookMode::Explicit, EscapeStreams::Absolute { .. }) => MODE_EXPLICIT_ABS32,
        _ => MODE_EXPLICIT_CHUNK,
    }
}

/// Total serialized size of `streams`.
pub fn container_len(streams: &EncodedStreams) -> u64 {
    CONTAINER_HEADER_LEN as u64 + streams.codebook.serialized_len() as u64 + streams.layout().total()
}

pub fn to_bytes(streams: &EncodedStreams) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(container_len(streams) as usize);
    write_container(streams, &mut out)?;
    Ok(out)
}

/// Writes `streams` to `sink` and returns the number of bytes written.
pub fn write_container<W: Write>(streams: &EncodedStreams, mut sink: W) -> Result<u64> {
    let fmt = streams.fmt;
    let mode = streams.mode();
    let position_mode = streams.escapes.position_mode();
    let chunk_size = u32::try_from(streams.chunk_size)
        .map_err(|_| Error::config("chunk size must fit in 32 bits"))?;
    if streams.codebook.format() != fmt {
        return Err(Error::config("codebook format differs from stream format"));
    }

    let mut head = Vec::with_capacity(CONTAINER_HEADER_LEN + streams.codebook.serialized_len());
    head.extend_from_slice(&CONTAINER_MAGIC);
    head.push(CONTAINER_VERSION);
    head.push(fmt.to_byte());
    head.push(mode_byte(streams));
    head.push(streams.code_bits() as u8);
    head.extend_from_slice(&chunk_size.to_le_bytes());
    head.extend_from_slice(&streams.n_elements.to_le_bytes());
    head.extend_from_slice(&streams.n_escapes().to_le_bytes());
    head.extend_from_slice(&streams.codebook.to_bytes());
    sink.write_all(&head)?;
    let mut written = head.len() as u64;

    let pos_bytes = position_bits(mode, streams.chunk_size, position_mode) / 8;
    let (counts, positions, values): (Vec<u8>, Vec<u8>, Vec<u8>) = match &streams.escapes {
        EscapeStreams::Chunked(chunks) => {
            let counts = chunks
                .iter()
                .flat_map(|c| (c.count() as u32).to_le_bytes())
                .collect();
            let mut pos = Vec::new();
            let mut val = Vec::new();
            for c in chunks {
                for &p in &c.positions {
                    pos.extend_from_slice(&p.to_le_bytes()[..pos_bytes as usize]);
                }
                val.extend_from_slice(&c.values);
            }
            (counts, pos, val)
        }
        EscapeStreams::Absolute { positions, values } => (
            Vec::new(),
            positions.iter().flat_map(|p| p.to_le_bytes()).collect(),
            values.clone(),
        ),
        EscapeStreams::Sentinel(values) => (Vec::new(), Vec::new(), values.clone()),
    };
    let values = pack_bits(&values, fmt.exp_bits())?;

    for section in [
        &counts,
        &streams.packed_codes,
        &streams.sign_mantissa,
        &positions,
        &values,
    ] {
        sink.write_all(section)?;
        written += section.len() as u64;
    }
    Ok(written)
}

pub fn read_container<R: Read>(mut source: R) -> Result<EncodedStreams> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: u64, section: &'static str) -> Result<&'a [u8]> {
        let available = (self.bytes.len() - self.pos) as u64;
        if n > available {
            return Err(Error::Truncated {
                section,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n as usize];
        self.pos += n as usize;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn bad(field: &'static str, detail: impl Into<String>) -> Error {
    Error::BadField {
        field,
        detail: detail.into(),
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<EncodedStreams> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != CONTAINER_MAGIC {
        return Err(Error::BadMagic {
            expected: CONTAINER_MAGIC,
            found: magic,
        });
    }
    let version = cur.take(1, "version")?[0];
    if version != CONTAINER_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: CONTAINER_VERSION,
        });
    }
    let h = cur.take((CONTAINER_HEADER_LEN - 5) as u64, "header")?;
    let fmt = ElementFormat::from_byte(h[0]).ok_or_else(|| bad("format", format!("unknown byte {}", h[0])))?;
    let (mode, position_mode) = match h[1] {
        MODE_EXPLICIT_CHUNK => (CodebookMode::Explicit, PositionMode::ChunkRelative),
        MODE_SENTINEL => (CodebookMode::Sentinel, PositionMode::ChunkRelative),
        MODE_EXPLICIT_ABS32 => (CodebookMode::Explicit, PositionMode::Absolute32),
        b => return Err(bad("mode", format!("unknown byte {b}"))),
    };
    let code_bits = h[2] as u32;
    if !matches!(code_bits, 3 | 4) {
        return Err(bad("code_bits", format!("{code_bits} is not 3 or 4")));
    }
    let chunk_size = u32::from_le_bytes(h[3..7].try_into().unwrap()) as usize;
    if chunk_size == 0 {
        return Err(bad("chunk_size", "zero"));
    }
    if position_mode == PositionMode::ChunkRelative && mode == CodebookMode::Explicit && chunk_size > 1 << 16 {
        return Err(bad("chunk_size", format!("{chunk_size} too large for relative positions")));
    }
    let n = u64::from_le_bytes(h[7..15].try_into().unwrap());
    let m = u64::from_le_bytes(h[15..23].try_into().unwrap());
    if n == 0 {
        return Err(bad("n_elements", "zero"));
    }
    if m > n {
        return Err(bad("n_escapes", format!("{m} escapes for {n} elements")));
    }
    if position_mode == PositionMode::Absolute32 && n > 1 << 32 {
        return Err(bad("n_elements", "exceeds 2^32 with absolute positions"));
    }

    let (codebook, used) = ExponentCodebook::parse(&bytes[cur.pos..])?;
    cur.pos += used;
    if codebook.format() != fmt || codebook.code_bits() != code_bits || codebook.mode() != mode {
        return Err(bad("codebook", "record disagrees with container header"));
    }

    // Keeps the layout arithmetic below in range; section reads check the
    // real lengths before anything is allocated.
    if n > 1 << 56 {
        return Err(bad("n_elements", format!("{n} is implausibly large")));
    }
    let l: PayloadLayout = layout(fmt, code_bits, mode, chunk_size, position_mode, n, m);

    let counts = cur.take(l.count_table, "chunk counts")?;
    let packed_codes = cur.take(l.packed_codes, "packed codes")?.to_vec();
    let sign_mantissa = cur.take(l.sign_mantissa, "sign-mantissa")?.to_vec();
    let positions = cur.take(l.escape_positions, "escape positions")?;
    let values_packed = cur.take(l.escape_values, "escape values")?;
    if cur.remaining() != 0 {
        return Err(Error::LengthMismatch {
            section: "container",
            expected: cur.pos as u64,
            found: bytes.len() as u64,
        });
    }
    if !padding_is_zero(values_packed, m as usize, fmt.exp_bits()) {
        return Err(Error::corrupt("escape value padding bits are not zero"));
    }
    let values = unpack_bits(values_packed, m as usize, fmt.exp_bits())?;

    let n_usize = n as usize;
    let escapes = match (mode, position_mode) {
        (CodebookMode::Sentinel, _) => EscapeStreams::Sentinel(values),
        (CodebookMode::Explicit, PositionMode::Absolute32) => EscapeStreams::Absolute {
            positions: positions
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            values,
        },
        (CodebookMode::Explicit, PositionMode::ChunkRelative) => {
            let width = (position_bits(mode, chunk_size, position_mode) / 8) as usize;
            let mut chunks = Vec::with_capacity(l.n_chunks as usize);
            let mut taken = 0usize;
            for (ci, c) in counts.chunks_exact(4).enumerate() {
                let count = u32::from_le_bytes(c.try_into().unwrap()) as usize;
                let len = chunk_size.min(n_usize - ci * chunk_size);
                if count > len {
                    return Err(Error::chunk(ci, format!("count {count} exceeds chunk length {len}")));
                }
                if taken + count > m as usize {
                    return Err(bad("chunk counts", format!("sum exceeds escape count {m}")));
                }
                let mut chunk = EscapeChunk {
                    positions: Vec::with_capacity(count),
                    values: values[taken..taken + count].to_vec(),
                };
                for p in positions[taken * width..(taken + count) * width].chunks_exact(width) {
                    chunk.positions.push(match width {
                        1 => p[0] as u16,
                        _ => u16::from_le_bytes([p[0], p[1]]),
                    });
                }
                taken += count;
                chunks.push(chunk);
            }
            if taken != m as usize {
                return Err(bad("chunk counts", format!("sum {taken} differs from escape count {m}")));
            }
            EscapeStreams::Chunked(chunks)
        }
    };

    Ok(EncodedStreams {
        fmt,
        n_elements: n,
        chunk_size,
        codebook,
        packed_codes,
        sign_mantissa,
        escapes,
    })
}

pub fn write_raw<W: Write>(stream: &RawTensorStream, mut sink: W) -> Result<u64> {
    let mut head = Vec::with_capacity(RAW_HEADER_LEN);
    head.extend_from_slice(&RAW_MAGIC);
    head.push(RAW_VERSION);
    head.push(stream.format().to_byte());
    head.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    sink.write_all(&head)?;
    let payload = stream.to_bytes();
    sink.write_all(&payload)?;
    Ok((head.len() + payload.len()) as u64)
}

pub fn raw_to_bytes(stream: &RawTensorStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + stream.raw_bytes() as usize);
    write_raw(stream, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn read_raw<R: Read>(mut source: R) -> Result<RawTensorStream> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    raw_from_bytes(&bytes)
}

pub fn raw_from_bytes(bytes: &[u8]) -> Result<RawTensorStream> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != RAW_MAGIC {
        return Err(Error::BadMagic {
            expected: RAW_MAGIC,
            found: magic,
        });
    }
    let version = cur.take(1, "version")?[0];
    if version != RAW_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: RAW_VERSION,
        });
    }
    let h = cur.take(9, "header")?;
    let fmt = ElementFormat::from_byte(h[0]).ok_or_else(|| bad("format", format!("unknown byte {}", h[0])))?;
    let n = u64::from_le_bytes(h[1..9].try_into().unwrap());
    let needed = n as u128 * fmt.word_bytes() as u128;
    let available = cur.remaining() as u128;
    if needed > available {
        return Err(Error::Truncated {
            section: "raw payload",
            needed: needed.min(u64::MAX as u128) as u64,
            available: available as u64,
        });
    }
    if needed < available {
        return Err(Error::LengthMismatch {
            section: "raw payload",
            expected: needed as u64,
            found: available as u64,
        });
    }
    RawTensorStream::from_bytes(fmt, cur.take(needed as u64, "raw payload")?)
}
