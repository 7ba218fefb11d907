// SPDX-License-Identifier: Apache-2.0

//! Exponent histograms, entropy / coverage metrics, and top-k codebooks.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{exponent_of, ElementFormat, RawTensorStream};

pub const CODEBOOK_MAGIC: [u8; 4] = *b"SZCB";
pub const CODEBOOK_VERSION: u8 = 1;
/// Fixed part of a serialized codebook record, before the entry bytes.
pub const CODEBOOK_FIXED_LEN: usize = 9;

/// Marks an escape in [`ExponentCodebook::encode_table`]. The low bits still
/// carry the code written to the dense stream for that element.
pub const ESCAPE_MARK: u8 = 0x80;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationStats {
    fmt: ElementFormat,
    counts: Vec<u64>,
    total: u64,
}

impl CalibrationStats {
    pub fn empty(fmt: ElementFormat) -> Self {
        Self {
            fmt,
            counts: vec![0; fmt.exp_values()],
            total: 0,
        }
    }

    pub fn from_counts(fmt: ElementFormat, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != fmt.exp_values() {
            return Err(Error::InvalidInput(format!(
                "{fmt} histogram needs {} bins, got {}",
                fmt.exp_values(),
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(Self { fmt, counts, total })
    }

    /// Adds the exponents of `words` to this histogram.
    pub fn accumulate(&mut self, words: &[u16]) {
        for &w in words {
            self.counts[exponent_of(w, self.fmt) as usize] += 1;
        }
        self.total += words.len() as u64;
    }

    /// Histograms are additive: merging partial histograms of disjoint
    /// sub-streams gives the histogram of the whole.
    pub fn merge(&mut self, other: &CalibrationStats) -> Result<()> {
        if other.fmt != self.fmt {
            return Err(Error::config(format!(
                "cannot merge {} histogram into {}",
                other.fmt, self.fmt
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn format(&self) -> ElementFormat {
        self.fmt
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Shannon entropy of the exponent distribution in bits per exponent.
    pub fn entropy_bits(&self) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::EmptyInput("entropy of an empty histogram"));
        }
        let n = self.total as f64;
        Ok(self
            .counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum())
    }

    /// Exponent values ordered by descending count, ties by ascending value.
    /// Zero-count bins are included at the end.
    pub fn ranked(&self) -> Vec<u8> {
        let mut order: Vec<u8> = (0..self.counts.len()).map(|e| e as u8).collect();
        order.sort_by(|&a, &b| {
            self.counts[b as usize]
                .cmp(&self.counts[a as usize])
                .then(a.cmp(&b))
        });
        order
    }

    pub fn top_k_coverage(&self, k: usize) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::EmptyInput("coverage of an empty histogram"));
        }
        if k == 0 || k > self.counts.len() {
            return Err(Error::config(format!(
                "k must be in 1..={}, got {k}",
                self.counts.len()
            )));
        }
        let covered: u64 = self
            .ranked()
            .iter()
            .take(k)
            .map(|&e| self.counts[e as usize])
            .sum();
        Ok(covered as f64 / self.total as f64)
    }

    /// Fraction of counted elements whose exponent is in `codebook`.
    pub fn coverage_under(&self, codebook: &ExponentCodebook) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let covered: u64 = codebook
            .entries()
            .iter()
            .map(|&e| self.counts.get(e as usize).copied().unwrap_or(0))
            .sum();
        covered as f64 / self.total as f64
    }
}

pub fn build_histogram(stream: &RawTensorStream) -> Result<CalibrationStats> {
    if stream.is_empty() {
        return Err(Error::EmptyInput("cannot calibrate on an empty stream"));
    }
    let mut stats = CalibrationStats::empty(stream.format());
    stats.accumulate(stream.words());
    Ok(stats)
}

/// How escapes are signalled in the dense code stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookMode {
    /// All `2^code_bits` codes name exponents; escapes carry explicit positions.
    Explicit,
    /// The last code is reserved as an escape sentinel; positions are implicit.
    Sentinel,
}

impl CodebookMode {
    pub const fn to_byte(self) -> u8 {
        match self {
            CodebookMode::Explicit => 0,
            CodebookMode::Sentinel => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(CodebookMode::Explicit),
            1 => Some(CodebookMode::Sentinel),
            _ => None,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            CodebookMode::Explicit => "explicit",
            CodebookMode::Sentinel => "sentinel",
        }
    }
}

impl FromStr for CodebookMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "explicit" | "topk" => Ok(CodebookMode::Explicit),
            "sentinel" | "top15" => Ok(CodebookMode::Sentinel),
            other => Err(Error::config(format!("unknown codebook mode {other:?}"))),
        }
    }
}

/// Top-k exponent set with its encode, decode and membership tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentCodebook {
    fmt: ElementFormat,
    entries: Vec<u8>,
    code_bits: u32,
    mode: CodebookMode,
    encode_table: Vec<u8>,
    decode_table: Vec<u8>,
    member_table: Vec<bool>,
}

impl ExponentCodebook {
    /// Builds a codebook from an explicit entry list. Entry `i` gets code `i`.
    pub fn new(fmt: ElementFormat, entries: Vec<u8>, code_bits: u32, mode: CodebookMode) -> Result<Self> {
        if !matches!(code_bits, 3 | 4) {
            return Err(Error::config(format!("code width must be 3 or 4 bits, got {code_bits}")));
        }
        let capacity = Self::capacity_for(code_bits, mode);
        if entries.is_empty() {
            return Err(Error::config("codebook needs at least one entry"));
        }
        if entries.len() > capacity {
            return Err(Error::config(format!(
                "{} entries exceed {} {}-bit codes in {} mode",
                entries.len(),
                capacity,
                code_bits,
                mode.name()
            )));
        }
        let mut member_table = vec![false; fmt.exp_values()];
        for &e in &entries {
            let slot = member_table.get_mut(e as usize).ok_or_else(|| {
                Error::config(format!("exponent {e:#x} out of range for {fmt}"))
            })?;
            if *slot {
                return Err(Error::config(format!("duplicate codebook entry {e:#x}")));
            }
            *slot = true;
        }

        let escape_code = match mode {
            CodebookMode::Explicit => 0,
            CodebookMode::Sentinel => ((1u32 << code_bits) - 1) as u8,
        };
        let mut encode_table = vec![ESCAPE_MARK | escape_code; fmt.exp_values()];
        for (code, &e) in entries.iter().enumerate() {
            encode_table[e as usize] = code as u8;
        }
        // Unassigned codes decode to the first entry; the decoder rejects them
        // before they are used.
        let mut decode_table = vec![entries[0]; 1 << code_bits];
        decode_table[..entries.len()].copy_from_slice(&entries);

        Ok(Self {
            fmt,
            entries,
            code_bits,
            mode,
            encode_table,
            decode_table,
            member_table,
        })
    }

    pub const fn capacity_for(code_bits: u32, mode: CodebookMode) -> usize {
        match mode {
            CodebookMode::Explicit => 1 << code_bits,
            CodebookMode::Sentinel => (1 << code_bits) - 1,
        }
    }

    pub fn format(&self) -> ElementFormat {
        self.fmt
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn code_bits(&self) -> u32 {
        self.code_bits
    }

    pub fn mode(&self) -> CodebookMode {
        self.mode
    }

    pub fn capacity(&self) -> usize {
        Self::capacity_for(self.code_bits, self.mode)
    }

    /// The reserved escape code in sentinel mode.
    pub fn sentinel(&self) -> Option<u8> {
        match self.mode {
            CodebookMode::Explicit => None,
            CodebookMode::Sentinel => Some(((1u32 << self.code_bits) - 1) as u8),
        }
    }

    /// Marked table: `code` for members, `ESCAPE_MARK | dummy` otherwise.
    pub fn encode_table(&self) -> &[u8] {
        &self.encode_table
    }

    pub fn decode_table(&self) -> &[u8] {
        &self.decode_table
    }

    pub fn member_table(&self) -> &[bool] {
        &self.member_table
    }

    #[inline]
    pub fn encode(&self, exponent: u8) -> Option<u8> {
        let c = self.encode_table[exponent as usize];
        (c & ESCAPE_MARK == 0).then_some(c)
    }

    #[inline]
    pub fn is_member(&self, exponent: u8) -> bool {
        self.member_table
            .get(exponent as usize)
            .copied()
            .unwrap_or(false)
    }

    /// `None` for codes that name no entry (including the sentinel).
    #[inline]
    pub fn decode(&self, code: u8) -> Option<u8> {
        self.entries.get(code as usize).copied()
    }

    pub fn serialized_len(&self) -> usize {
        CODEBOOK_FIXED_LEN + self.entries.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(&CODEBOOK_MAGIC);
        out.push(CODEBOOK_VERSION);
        out.push(self.fmt.to_byte());
        out.push(self.code_bits as u8);
        out.push(self.mode.to_byte());
        out.push(self.entries.len() as u8);
        out.extend_from_slice(&self.entries);
        out
    }

    /// Parses one codebook record from the front of `bytes`, returning it and
    /// the number of bytes consumed.
    pub fn parse(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < CODEBOOK_FIXED_LEN {
            return Err(Error::Truncated {
                section: "codebook header",
                needed: CODEBOOK_FIXED_LEN as u64,
                available: bytes.len() as u64,
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != CODEBOOK_MAGIC {
            return Err(Error::BadMagic {
                expected: CODEBOOK_MAGIC,
                found: magic,
            });
        }
        if bytes[4] != CODEBOOK_VERSION {
            return Err(Error::UnsupportedVersion {
                found: bytes[4],
                supported: CODEBOOK_VERSION,
            });
        }
        let fmt = ElementFormat::from_byte(bytes[5]).ok_or_else(|| Error::BadField {
            field: "codebook format",
            detail: format!("unknown format byte {}", bytes[5]),
        })?;
        let code_bits = bytes[6] as u32;
        let mode = CodebookMode::from_byte(bytes[7]).ok_or_else(|| Error::BadField {
            field: "codebook mode",
            detail: format!("unknown mode byte {}", bytes[7]),
        })?;
        let count = bytes[8] as usize;
        let end = CODEBOOK_FIXED_LEN + count;
        if bytes.len() < end {
            return Err(Error::Truncated {
                section: "codebook entries",
                needed: end as u64,
                available: bytes.len() as u64,
            });
        }
        let entries = bytes[CODEBOOK_FIXED_LEN..end].to_vec();
        let book = Self::new(fmt, entries, code_bits, mode).map_err(|e| Error::BadField {
            field: "codebook",
            detail: e.to_string(),
        })?;
        Ok((book, end))
    }

    /// Parses a standalone codebook file; trailing bytes are an error.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (book, used) = Self::parse(bytes)?;
        if used != bytes.len() {
            return Err(Error::LengthMismatch {
                section: "codebook file",
                expected: used as u64,
                found: bytes.len() as u64,
            });
        }
        Ok(book)
    }

    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<usize> {
        let bytes = self.to_bytes();
        sink.write_all(&bytes)?;
        Ok(bytes.len())
    }

    pub fn read_from<R: Read>(mut source: R) -> Result<Self> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable table of codes, exponents and (optionally) frequencies.
    pub fn to_text(&self, stats: Option<&CalibrationStats>) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# codebook format={} code_bits={} mode={} entries={}",
            self.fmt,
            self.code_bits,
            self.mode.name(),
            self.entries.len()
        );
        for (code, &e) in self.entries.iter().enumerate() {
            match stats {
                Some(st) if st.total() > 0 => {
                    let c = st.counts()[e as usize];
                    let _ = writeln!(
                        s,
                        "{code:>3}  {e:#04x}  {c:>12}  {:>8.4}%",
                        100.0 * c as f64 / st.total() as f64
                    );
                }
                _ => {
                    let _ = writeln!(s, "{code:>3}  {e:#04x}");
                }
            }
        }
        if let Some(code) = self.sentinel() {
            let _ = writeln!(s, "{code:>3}  escape");
        }
        s
    }
}

/// Picks the most frequent exponents (nonzero counts only), up to the
/// capacity of `code_bits` codes in `mode`.
pub fn select_codebook(stats: &CalibrationStats, code_bits: u32, mode: CodebookMode) -> Result<ExponentCodebook> {
    if stats.total() == 0 {
        return Err(Error::EmptyInput("cannot select a codebook from an empty histogram"));
    }
    let k = ExponentCodebook::capacity_for(code_bits, mode);
    let entries: Vec<u8> = stats
        .ranked()
        .into_iter()
        .take(k)
        .take_while(|&e| stats.counts()[e as usize] > 0)
        .collect();
    ExponentCodebook::new(stats.format(), entries, code_bits, mode)
}

/// Coverage of each consecutive `group_size`-element group under `codebook`.
/// The last group may be shorter.
pub fn coverage_by_group(
    stream: &RawTensorStream,
    group_size: usize,
    codebook: &ExponentCodebook,
) -> Result<Vec<f64>> {
    if group_size == 0 {
        return Err(Error::config("group size must be at least 1"));
    }
    check_format(stream.format(), codebook.format())?;
    let fmt = stream.format();
    Ok(stream
        .words()
        .chunks(group_size)
        .map(|g| {
            let hit = g
                .iter()
                .filter(|&&w| codebook.is_member(exponent_of(w, fmt)))
                .count();
            hit as f64 / g.len() as f64
        })
        .collect())
}

pub(crate) fn check_format(stream: ElementFormat, book: ElementFormat) -> Result<()> {
    if stream != book {
        return Err(Error::config(format!(
            "codebook is for {book} but the stream is {stream}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bf16(words: &[u16]) -> RawTensorStream {
        RawTensorStream::new(ElementFormat::Bf16, words.to_vec()).unwrap()
    }

    fn stats_of(pairs: &[(u8, u64)]) -> CalibrationStats {
        let mut counts = vec![0u64; 256];
        for &(e, c) in pairs {
            counts[e as usize] = c;
        }
        CalibrationStats::from_counts(ElementFormat::Bf16, counts).unwrap()
    }

    #[test]
    fn histogram_examples() {
        let s = build_histogram(&bf16(&[0x3F80; 4])).unwrap();
        assert_eq!(s.counts()[0x7F], 4);
        assert_eq!(s.total(), 4);
        assert_eq!(s.counts().iter().sum::<u64>(), 4);

        let s = build_histogram(&bf16(&[0x3F80, 0xBF80, 0x0000])).unwrap();
        assert_eq!(s.counts()[0x7F], 2);
        assert_eq!(s.counts()[0x00], 1);
        assert_eq!(s.total(), 3);

        assert!(matches!(build_histogram(&bf16(&[])), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(stats_of(&[(3, 9)]).entropy_bits().unwrap(), 0.0);
        assert!((stats_of(&[(3, 5), (9, 5)]).entropy_bits().unwrap() - 1.0).abs() < 1e-15);
        let uniform = CalibrationStats::from_counts(ElementFormat::Bf16, vec![7; 256]).unwrap();
        assert!((uniform.entropy_bits().unwrap() - 8.0).abs() < 1e-12);
        assert!(CalibrationStats::empty(ElementFormat::Bf16).entropy_bits().is_err());
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(stats_of(&[(3, 9)]).top_k_coverage(1).unwrap(), 1.0);
        assert_eq!(stats_of(&[(3, 5), (9, 5)]).top_k_coverage(1).unwrap(), 0.5);
        assert!(stats_of(&[(3, 5)]).top_k_coverage(0).is_err());
        assert!(stats_of(&[(3, 5)]).top_k_coverage(257).is_err());
    }

    #[test]
    fn select_examples() {
        let st = stats_of(&[(0x7E, 10), (0x7F, 5)]);
        let book = select_codebook(&st, 4, CodebookMode::Explicit).unwrap();
        assert_eq!(book.entries(), &[0x7E, 0x7F]);
        assert_eq!(st.coverage_under(&book), 1.0);

        let book = select_codebook(&st, 4, CodebookMode::Sentinel).unwrap();
        assert_eq!(book.entries(), &[0x7E, 0x7F]);
        assert_eq!(book.sentinel(), Some(15));
        assert_eq!(book.decode(15), None);

        let st = stats_of(&[(0x30, 5), (0x10, 5), (0x20, 5)]);
        let ranked = st.ranked();
        assert_eq!(&ranked[..3], &[0x10, 0x20, 0x30]);
        let book = select_codebook(&st, 3, CodebookMode::Explicit).unwrap();
        assert_eq!(book.entries(), &[0x10, 0x20, 0x30]);
    }

    #[test]
    fn sentinel_capacity_is_one_less() {
        let pairs: Vec<(u8, u64)> = (0..40u8).map(|e| (e, 100 - e as u64)).collect();
        let st = stats_of(&pairs);
        assert_eq!(select_codebook(&st, 4, CodebookMode::Explicit).unwrap().entries().len(), 16);
        assert_eq!(select_codebook(&st, 4, CodebookMode::Sentinel).unwrap().entries().len(), 15);
        assert_eq!(select_codebook(&st, 3, CodebookMode::Explicit).unwrap().entries().len(), 8);
        assert_eq!(select_codebook(&st, 3, CodebookMode::Sentinel).unwrap().entries().len(), 7);
    }

    #[test]
    fn codebook_validation() {
        let f = ElementFormat::Bf16;
        assert!(ExponentCodebook::new(f, vec![], 4, CodebookMode::Explicit).is_err());
        assert!(ExponentCodebook::new(f, vec![1, 1], 4, CodebookMode::Explicit).is_err());
        assert!(ExponentCodebook::new(f, (0..17).collect(), 4, CodebookMode::Explicit).is_err());
        assert!(ExponentCodebook::new(f, (0..16).collect(), 4, CodebookMode::Sentinel).is_err());
        assert!(ExponentCodebook::new(f, vec![1], 5, CodebookMode::Explicit).is_err());
        assert!(ExponentCodebook::new(ElementFormat::E4m3, vec![16], 3, CodebookMode::Explicit).is_err());
    }

    #[test]
    fn group_coverage() {
        let book = ExponentCodebook::new(ElementFormat::Bf16, vec![0x7F], 4, CodebookMode::Explicit).unwrap();
        let all_in = bf16(&[0x3F80; 10]);
        assert_eq!(coverage_by_group(&all_in, 3, &book).unwrap(), vec![1.0; 4]);

        let mut words = vec![0x3F80u16; 1000];
        words[417] = 0x4000;
        let cov = coverage_by_group(&bf16(&words), 1000, &book).unwrap();
        assert_eq!(cov, vec![0.999]);
        assert!(coverage_by_group(&all_in, 0, &book).is_err());
    }

    #[test]
    fn codebook_bytes_roundtrip_and_errors() {
        let book = ExponentCodebook::new(ElementFormat::E5m2, vec![3, 1, 7], 3, CodebookMode::Sentinel).unwrap();
        let bytes = book.to_bytes();
        assert_eq!(&bytes[..9], &[b'S', b'Z', b'C', b'B', 1, 1, 3, 1, 3]);
        assert_eq!(ExponentCodebook::from_bytes(&bytes).unwrap(), book);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(ExponentCodebook::from_bytes(&bad), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(ExponentCodebook::from_bytes(&bad), Err(Error::UnsupportedVersion { .. })));
        assert!(matches!(
            ExponentCodebook::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(ExponentCodebook::from_bytes(&long), Err(Error::LengthMismatch { .. })));
        assert!(book.to_text(None).contains("escape"));
    }

    fn brute_entropy(counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        let mut h = 0.0;
        for &c in counts {
            if c != 0 {
                let p = c as f64 / total as f64;
                h += p * (1.0 / p).ln() / std::f64::consts::LN_2;
            }
        }
        h
    }

    // Best k-subset by exhaustive search over the nonzero bins.
    fn brute_best_cover(counts: &[u64], k: usize) -> u64 {
        let nz: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
        let mut best = 0;
        for mask in 0u32..(1 << nz.len()) {
            if mask.count_ones() as usize <= k {
                let s: u64 = (0..nz.len()).filter(|i| mask >> i & 1 == 1).map(|i| nz[i]).sum();
                best = best.max(s);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn entropy_matches_brute_force(raw in proptest::collection::vec(0u64..1000, 32)) {
            prop_assume!(raw.iter().any(|&c| c > 0));
            let st = CalibrationStats::from_counts(ElementFormat::E5m2, raw.clone()).unwrap();
            let h = st.entropy_bits().unwrap();
            prop_assert!((h - brute_entropy(&raw)).abs() < 1e-12);
            prop_assert!((0.0..=5.0 + 1e-12).contains(&h));
        }

        #[test]
        fn top_k_is_optimal(bins in proptest::collection::vec((0u8..16, 1u64..50), 1..8), k in 1usize..8) {
            let mut counts = vec![0u64; 16];
            for (e, c) in bins { counts[e as usize] = c; }
            let st = CalibrationStats::from_counts(ElementFormat::E4m3, counts.clone()).unwrap();
            let cov = st.top_k_coverage(k).unwrap();
            let best = brute_best_cover(&counts, k) as f64 / st.total() as f64;
            prop_assert!((cov - best).abs() < 1e-15);
            let mode = CodebookMode::Explicit;
            let book = select_codebook(&st, 3, mode).unwrap();
            let book_best = brute_best_cover(&counts, 8) as f64 / st.total() as f64;
            prop_assert!((st.coverage_under(&book) - book_best).abs() < 1e-15);
        }

        #[test]
        fn coverage_monotone_in_k(raw in proptest::collection::vec(0u64..100, 16)) {
            prop_assume!(raw.iter().any(|&c| c > 0));
            let st = CalibrationStats::from_counts(ElementFormat::E4m3, raw).unwrap();
            let mut prev = 0.0;
            for k in 1..=16 {
                let c = st.top_k_coverage(k).unwrap();
                prop_assert!(c >= prev);
                prev = c;
            }
            prop_assert_eq!(prev, 1.0);
        }

        #[test]
        fn tables_consistent(raw in proptest::collection::vec(0u64..100, 256), bits in 3u32..=4, sentinel in any::<bool>()) {
            prop_assume!(raw.iter().any(|&c| c > 0));
            let mode = if sentinel { CodebookMode::Sentinel } else { CodebookMode::Explicit };
            let st = CalibrationStats::from_counts(ElementFormat::Bf16, raw).unwrap();
            let book = select_codebook(&st, bits, mode).unwrap();
            for e in 0..=255u8 {
                let member = book.entries().contains(&e);
                prop_assert_eq!(book.member_table()[e as usize], member);
                match book.encode(e) {
                    Some(c) => {
                        prop_assert!(member);
                        prop_assert_eq!(book.decode_table()[c as usize], e);
                        prop_assert_eq!(book.decode(c), Some(e));
                    }
                    None => prop_assert!(!member),
                }
            }
            // descending frequency order
            for w in book.entries().windows(2) {
                let (a, b) = (st.counts()[w[0] as usize], st.counts()[w[1] as usize]);
                prop_assert!(a > b || (a == b && w[0] < w[1]));
            }
        }

        #[test]
        fn sharded_histograms_merge_exactly(words in proptest::collection::vec(any::<u16>(), 1..500), cut in 0usize..500) {
            let cut = cut.min(words.len());
            let whole = build_histogram(&bf16(&words)).unwrap();
            let mut a = CalibrationStats::empty(ElementFormat::Bf16);
            a.accumulate(&words[..cut]);
            let mut b = CalibrationStats::empty(ElementFormat::Bf16);
            b.accumulate(&words[cut..]);
            a.merge(&b).unwrap();
            prop_assert_eq!(a, whole);
        }
    }
}
