// SPDX-License-Identifier: Apache-2.0

//! Fixed-length exponent coding with a sparse escape stream.
//!
//! Encoding splits every element into an exponent and a sign-mantissa unit.
//! Sign-mantissa units are stored verbatim. Exponents in the codebook become
//! `code_bits`-wide codes; the rest are escapes:
//!
//! * explicit mode writes the dummy code 0 to the dense stream and records
//!   `(position, raw exponent)` per escape, grouped by chunk;
//! * sentinel mode writes the reserved top code and records only the raw
//!   exponent, in element order.
//!
//! Decoding maps every code through the decode table, then overwrites the
//! escaped exponents. The decoder only accepts canonical streams: zero
//! padding, dummy code 0 under every explicit escape, and no unassigned codes.

mod quad;
pub mod size;

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitpack::{pack_into, packed_len, padding_is_zero, unpack_into};
use crate::calibration::{
    build_histogram, check_format, select_codebook, CodebookMode, ExponentCodebook, ESCAPE_MARK,
};
use crate::error::{Error, Result};
use crate::format::{exponent_of, reconstruct, split_fields, ElementFormat, RawTensorStream, SplitFields};

pub use size::{compressed_payload_bytes, compression_ratio, payload_ratio, position_bits, PayloadLayout};

pub const DEFAULT_CHUNK_SIZE: usize = 1024;
pub const MAX_RELATIVE_CHUNK: usize = 1 << 16;

/// Elements per parallel work span. A multiple of 8 so every packed section
/// splits on byte boundaries.
const SPAN: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PositionMode {
    /// Positions relative to the chunk start, 8 or 16 bits wide.
    ChunkRelative,
    /// One flat list of 32-bit element indices.
    Absolute32,
}

impl FromStr for PositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chunk" | "relative" => Ok(PositionMode::ChunkRelative),
            "abs32" | "absolute" => Ok(PositionMode::Absolute32),
            other => Err(Error::config(format!("unknown position mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Calibration {
    Precalibrated(ExponentCodebook),
    /// Build the codebook from the input being encoded.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecConfig {
    pub fmt: ElementFormat,
    pub code_bits: u32,
    pub mode: CodebookMode,
    pub chunk_size: usize,
    pub position_mode: PositionMode,
    pub calibration: Calibration,
}

impl CodecConfig {
    /// 4-bit explicit codes, 1024-element chunks, dynamic calibration.
    pub fn new(fmt: ElementFormat) -> Self {
        Self {
            fmt,
            code_bits: 4,
            mode: CodebookMode::Explicit,
            chunk_size: DEFAULT_CHUNK_SIZE,
            position_mode: PositionMode::ChunkRelative,
            calibration: Calibration::Dynamic,
        }
    }

    pub fn with_code_bits(mut self, code_bits: u32) -> Self {
        self.code_bits = code_bits;
        self
    }

    pub fn with_mode(mut self, mode: CodebookMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        self
    }

    pub fn with_positions(mut self, position_mode: PositionMode) -> Self {
        self.position_mode = position_mode;
        self
    }

    /// Uses `book` for every encode; code width and mode follow the codebook.
    pub fn with_codebook(mut self, book: ExponentCodebook) -> Self {
        self.code_bits = book.code_bits();
        self.mode = book.mode();
        self.calibration = Calibration::Precalibrated(book);
        self
    }

    pub fn dynamic(mut self) -> Self {
        self.calibration = Calibration::Dynamic;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.code_bits, 3 | 4) {
            return Err(Error::config(format!("code width must be 3 or 4 bits, got {}", self.code_bits)));
        }
        if self.chunk_size == 0 {
            return Err(Error::config("chunk size must be at least 1"));
        }
        if self.position_mode == PositionMode::ChunkRelative && self.chunk_size > MAX_RELATIVE_CHUNK {
            return Err(Error::config(format!(
                "chunk-relative positions need chunk size <= {MAX_RELATIVE_CHUNK}, got {}",
                self.chunk_size
            )));
        }
        if self.chunk_size > u32::MAX as usize {
            return Err(Error::config("chunk size must fit in 32 bits"));
        }
        if let Calibration::Precalibrated(book) = &self.calibration {
            check_format(self.fmt, book.format())?;
            if book.code_bits() != self.code_bits || book.mode() != self.mode {
                return Err(Error::config(format!(
                    "codebook is {}-bit {} but config asks for {}-bit {}",
                    book.code_bits(),
                    book.mode().name(),
                    self.code_bits,
                    self.mode.name()
                )));
            }
        }
        Ok(())
    }

    pub fn position_bits(&self) -> u32 {
        position_bits(self.mode, self.chunk_size, self.position_mode)
    }
}

/// Escapes of one chunk. Positions are relative to the chunk start.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EscapeChunk {
    pub positions: Vec<u16>,
    pub values: Vec<u8>,
}

impl EscapeChunk {
    pub fn count(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EscapeStreams {
    Chunked(Vec<EscapeChunk>),
    Absolute { positions: Vec<u32>, values: Vec<u8> },
    /// Raw exponents in element order; positions are the sentinel codes.
    Sentinel(Vec<u8>),
}

impl EscapeStreams {
    pub fn count(&self) -> usize {
        match self {
            EscapeStreams::Chunked(chunks) => chunks.iter().map(EscapeChunk::count).sum(),
            EscapeStreams::Absolute { positions, .. } => positions.len(),
            EscapeStreams::Sentinel(values) => values.len(),
        }
    }

    pub fn position_mode(&self) -> PositionMode {
        match self {
            EscapeStreams::Absolute { .. } => PositionMode::Absolute32,
            _ => PositionMode::ChunkRelative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedStreams {
    pub fmt: ElementFormat,
    pub n_elements: u64,
    pub chunk_size: usize,
    pub codebook: ExponentCodebook,
    pub packed_codes: Vec<u8>,
    pub sign_mantissa: Vec<u8>,
    pub escapes: EscapeStreams,
}

impl EncodedStreams {
    pub fn code_bits(&self) -> u32 {
        self.codebook.code_bits()
    }

    pub fn mode(&self) -> CodebookMode {
        self.codebook.mode()
    }

    pub fn n_escapes(&self) -> u64 {
        self.escapes.count() as u64
    }

    pub fn escape_rate(&self) -> f64 {
        self.n_escapes() as f64 / self.n_elements as f64
    }

    pub fn raw_bytes(&self) -> u64 {
        self.n_elements * self.fmt.word_bytes() as u64
    }

    /// Config that reproduces these streams from the decoded output.
    pub fn config(&self) -> CodecConfig {
        CodecConfig {
            fmt: self.fmt,
            code_bits: self.code_bits(),
            mode: self.mode(),
            chunk_size: self.chunk_size,
            position_mode: self.escapes.position_mode(),
            calibration: Calibration::Precalibrated(self.codebook.clone()),
        }
    }

    pub fn layout(&self) -> PayloadLayout {
        size::layout(
            self.fmt,
            self.code_bits(),
            self.mode(),
            self.chunk_size,
            self.escapes.position_mode(),
            self.n_elements,
            self.n_escapes(),
        )
    }

    /// Raw bytes over code + sign-mantissa + escape stream bytes.
    pub fn stream_ratio(&self) -> f64 {
        self.raw_bytes() as f64 / self.layout().stream_bytes() as f64
    }

    /// Raw bytes over the whole payload, per-chunk count table included.
    pub fn payload_ratio(&self) -> f64 {
        self.raw_bytes() as f64 / self.layout().total() as f64
    }
}

fn resolve_codebook(stream: &RawTensorStream, config: &CodecConfig) -> Result<ExponentCodebook> {
    match &config.calibration {
        Calibration::Precalibrated(book) => Ok(book.clone()),
        Calibration::Dynamic => select_codebook(&build_histogram(stream)?, config.code_bits, config.mode),
    }
}

fn check_encode_input(stream: &RawTensorStream, config: &CodecConfig) -> Result<()> {
    config.validate()?;
    if stream.format() != config.fmt {
        return Err(Error::config(format!(
            "stream is {} but config is {}",
            stream.format(),
            config.fmt
        )));
    }
    if stream.is_empty() {
        return Err(Error::EmptyInput("cannot encode an empty stream"));
    }
    if config.position_mode == PositionMode::Absolute32 && stream.len() as u64 > 1 << 32 {
        return Err(Error::config("absolute 32-bit positions cap streams at 2^32 elements"));
    }
    Ok(())
}

/// Scalar reference encoder.
pub fn encode(stream: &RawTensorStream, config: &CodecConfig) -> Result<EncodedStreams> {
    check_encode_input(stream, config)?;
    let book = resolve_codebook(stream, config)?;
    let (packed_codes, sign_mantissa) = dense_encode(stream.words(), stream.format(), &book);
    let escapes = collect_escapes(stream.words(), stream.format(), &book, config, None);
    Ok(EncodedStreams {
        fmt: stream.format(),
        n_elements: stream.len() as u64,
        chunk_size: config.chunk_size,
        codebook: book,
        packed_codes,
        sign_mantissa,
        escapes,
    })
}

/// Four-elements-per-word encoder with fused per-chunk escape counting.
/// Byte-identical to [`encode`]; configs other than BF16 with 4-bit codes
/// fall back to the scalar path.
pub fn encode_quad(stream: &RawTensorStream, config: &CodecConfig) -> Result<EncodedStreams> {
    check_encode_input(stream, config)?;
    if stream.format() != ElementFormat::Bf16 || config.code_bits != 4 {
        return encode(stream, config);
    }
    let book = resolve_codebook(stream, config)?;
    let dense = quad::dense_encode(stream.words(), &book, config.chunk_size);
    let escapes = collect_escapes(
        stream.words(),
        stream.format(),
        &book,
        config,
        Some(&dense.chunk_counts),
    );
    Ok(EncodedStreams {
        fmt: stream.format(),
        n_elements: stream.len() as u64,
        chunk_size: config.chunk_size,
        codebook: book,
        packed_codes: dense.packed_codes,
        sign_mantissa: dense.sign_mantissa,
        escapes,
    })
}

fn dense_encode(words: &[u16], fmt: ElementFormat, book: &ExponentCodebook) -> (Vec<u8>, Vec<u8>) {
    let code_bits = book.code_bits();
    let sm_bits = fmt.sm_bits();
    let mut codes = vec![0u8; packed_len(words.len(), code_bits)];
    let mut sms = vec![0u8; packed_len(words.len(), sm_bits)];
    words
        .par_chunks(SPAN)
        .zip(codes.par_chunks_mut(SPAN * code_bits as usize / 8))
        .zip(sms.par_chunks_mut(SPAN * sm_bits as usize / 8))
        .for_each(|((span, code_out), sm_out)| {
            dense_span(span, fmt, book, code_out, sm_out);
        });
    (codes, sms)
}

fn dense_span(words: &[u16], fmt: ElementFormat, book: &ExponentCodebook, code_out: &mut [u8], sm_out: &mut [u8]) {
    let table = book.encode_table();
    let mut codes = Vec::with_capacity(words.len());
    let mut sms = Vec::with_capacity(words.len());
    for &w in words {
        let f = split_fields(w, fmt);
        codes.push(table[f.exponent as usize] & !ESCAPE_MARK);
        sms.push(f.sign_mantissa);
    }
    pack_into(&codes, book.code_bits(), code_out);
    pack_into(&sms, fmt.sm_bits(), sm_out);
}

/// Gathers escapes in chunk order, then element order. `chunk_counts`, when
/// given, lets chunks with no escapes be skipped without a rescan.
fn collect_escapes(
    words: &[u16],
    fmt: ElementFormat,
    book: &ExponentCodebook,
    config: &CodecConfig,
    chunk_counts: Option<&[u32]>,
) -> EscapeStreams {
    let member = book.member_table();
    let escaped = |w: u16| {
        let e = exponent_of(w, fmt);
        (!member[e as usize]).then_some(e)
    };
    match (config.mode, config.position_mode) {
        (CodebookMode::Explicit, PositionMode::ChunkRelative) => {
            let chunk = config.chunk_size;
            let chunks = words
                .par_chunks(chunk)
                .enumerate()
                .map(|(ci, span)| {
                    let mut out = EscapeChunk::default();
                    if chunk_counts.is_some_and(|c| c[ci] == 0) {
                        return out;
                    }
                    for (i, &w) in span.iter().enumerate() {
                        if let Some(e) = escaped(w) {
                            out.positions.push(i as u16);
                            out.values.push(e);
                        }
                    }
                    out
                })
                .collect();
            EscapeStreams::Chunked(chunks)
        }
        (CodebookMode::Explicit, PositionMode::Absolute32) => {
            let parts: Vec<(Vec<u32>, Vec<u8>)> = words
                .par_chunks(SPAN)
                .enumerate()
                .map(|(si, span)| {
                    let base = si * SPAN;
                    let mut pos = Vec::new();
                    let mut val = Vec::new();
                    for (i, &w) in span.iter().enumerate() {
                        if let Some(e) = escaped(w) {
                            pos.push((base + i) as u32);
                            val.push(e);
                        }
                    }
                    (pos, val)
                })
                .collect();
            let (mut positions, mut values) = (Vec::new(), Vec::new());
            for (p, v) in parts {
                positions.extend(p);
                values.extend(v);
            }
            EscapeStreams::Absolute { positions, values }
        }
        (CodebookMode::Sentinel, _) => {
            let parts: Vec<Vec<u8>> = words
                .par_chunks(SPAN)
                .map(|span| span.iter().filter_map(|&w| escaped(w)).collect())
                .collect();
            EscapeStreams::Sentinel(parts.concat())
        }
    }
}

/// Restores the original element words, rejecting any inconsistent or
/// non-canonical stream.
pub fn decode(streams: &EncodedStreams) -> Result<RawTensorStream> {
    let fmt = streams.fmt;
    let book = &streams.codebook;
    check_format(fmt, book.format())?;
    let n = usize::try_from(streams.n_elements).map_err(|_| Error::corrupt("element count overflows"))?;
    if n == 0 {
        return Err(Error::EmptyInput("stream has no elements"));
    }
    let code_bits = book.code_bits();
    let sm_bits = fmt.sm_bits();
    check_section("packed codes", &streams.packed_codes, n, code_bits)?;
    check_section("sign-mantissa", &streams.sign_mantissa, n, sm_bits)?;
    if streams.chunk_size == 0 {
        return Err(Error::corrupt("chunk size is zero"));
    }

    // Dense path: unpack and look up every element the same way.
    let mut codes = vec![0u8; n];
    let mut sms = vec![0u8; n];
    let code_span = SPAN * code_bits as usize / 8;
    let sm_span = SPAN * sm_bits as usize / 8;
    let mut out = vec![0u16; n];
    let bad_code = out
        .par_chunks_mut(SPAN)
        .zip(codes.par_chunks_mut(SPAN))
        .zip(sms.par_chunks_mut(SPAN))
        .enumerate()
        .map(|(si, ((dst, code_dst), sm_dst))| {
            let cs = &streams.packed_codes[si * code_span..];
            let ss = &streams.sign_mantissa[si * sm_span..];
            unpack_into(&cs[..packed_len(dst.len(), code_bits)], code_bits, code_dst);
            unpack_into(&ss[..packed_len(dst.len(), sm_bits)], sm_bits, sm_dst);
            let table = book.decode_table();
            let valid = book.entries().len() as u8;
            let sentinel = book.sentinel();
            let mut bad = None;
            for (i, ((d, &c), &a)) in dst.iter_mut().zip(code_dst.iter()).zip(sm_dst.iter()).enumerate() {
                if c >= valid && Some(c) != sentinel && bad.is_none() {
                    bad = Some((si * SPAN + i, c));
                }
                *d = reconstruct(
                    SplitFields {
                        exponent: table[c as usize],
                        sign_mantissa: a,
                    },
                    fmt,
                );
            }
            bad
        })
        .find_first(Option::is_some)
        .flatten();
    if let Some((i, c)) = bad_code {
        return Err(Error::corrupt(format!("element {i} carries unassigned code {c}")));
    }

    // Sparse correction.
    let check_value = |e: u8| -> std::result::Result<(), String> {
        if e as usize >= fmt.exp_values() {
            Err(format!("escape value {e:#x} does not fit {fmt}"))
        } else if book.is_member(e) {
            Err(format!("escape value {e:#x} is a codebook entry"))
        } else {
            Ok(())
        }
    };
    let overwrite = |out: &mut [u16], i: usize, e: u8| {
        out[i] = reconstruct(
            SplitFields {
                exponent: e,
                sign_mantissa: sms[i],
            },
            fmt,
        );
    };

    match (&streams.escapes, book.mode()) {
        (EscapeStreams::Chunked(chunks), CodebookMode::Explicit) => {
            let chunk = streams.chunk_size;
            let expected = n.div_ceil(chunk);
            if chunks.len() != expected {
                return Err(Error::corrupt(format!(
                    "{} escape chunks for {n} elements at chunk size {chunk}, expected {expected}",
                    chunks.len()
                )));
            }
            for (ci, ch) in chunks.iter().enumerate() {
                if ch.positions.len() != ch.values.len() {
                    return Err(Error::chunk(ci, "position and value counts differ"));
                }
                let start = ci * chunk;
                let len = chunk.min(n - start);
                let mut prev: Option<u16> = None;
                for (&p, &e) in ch.positions.iter().zip(&ch.values) {
                    if p as usize >= len {
                        return Err(Error::chunk(ci, format!("position {p} outside chunk of {len}")));
                    }
                    if prev.is_some_and(|q| p <= q) {
                        return Err(Error::chunk(ci, format!("position {p} not increasing")));
                    }
                    prev = Some(p);
                    check_value(e).map_err(|d| Error::chunk(ci, d))?;
                    let i = start + p as usize;
                    if codes[i] != 0 {
                        return Err(Error::chunk(ci, format!("escape at {p} has dummy code {}", codes[i])));
                    }
                    overwrite(&mut out, i, e);
                }
            }
        }
        (EscapeStreams::Absolute { positions, values }, CodebookMode::Explicit) => {
            if positions.len() != values.len() {
                return Err(Error::corrupt("absolute escape position and value counts differ"));
            }
            let mut prev: Option<u32> = None;
            for (&p, &e) in positions.iter().zip(values) {
                let i = p as usize;
                if i >= n {
                    return Err(Error::corrupt(format!("escape position {p} outside {n} elements")));
                }
                if prev.is_some_and(|q| p <= q) {
                    return Err(Error::corrupt(format!("escape position {p} not increasing")));
                }
                prev = Some(p);
                check_value(e).map_err(Error::Corrupt)?;
                if codes[i] != 0 {
                    return Err(Error::corrupt(format!("escape at {p} has dummy code {}", codes[i])));
                }
                overwrite(&mut out, i, e);
            }
        }
        (EscapeStreams::Sentinel(values), CodebookMode::Sentinel) => {
            let sentinel = book.sentinel().expect("sentinel mode");
            let mut next = values.iter();
            for (i, &code) in codes.iter().enumerate().take(n) {
                if code == sentinel {
                    let &e = next.next().ok_or_else(|| {
                        Error::corrupt(format!("sentinel at element {i} has no escape value"))
                    })?;
                    check_value(e).map_err(Error::Corrupt)?;
                    overwrite(&mut out, i, e);
                }
            }
            if next.next().is_some() {
                return Err(Error::corrupt(format!(
                    "{} escape values but fewer sentinel codes",
                    values.len()
                )));
            }
        }
        _ => return Err(Error::corrupt("escape layout does not match codebook mode")),
    }

    RawTensorStream::new(fmt, out)
}

fn check_section(section: &'static str, bytes: &[u8], n: usize, width: u32) -> Result<()> {
    let expected = packed_len(n, width);
    if bytes.len() != expected {
        return Err(Error::LengthMismatch {
            section,
            expected: expected as u64,
            found: bytes.len() as u64,
        });
    }
    if !padding_is_zero(bytes, n, width) {
        return Err(Error::corrupt(format!("{section} padding bits are not zero")));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
