// SPDX-License-Identifier: Apache-2.0

//! Side-by-side codec variants on one input.
//!
//! Every row is encoded, serialized, parsed and decoded before any ratio is
//! filled in; a row whose round-trip fails carries no ratios.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::calibration::{build_histogram, CodebookMode, ExponentCodebook};
use crate::codec::{self, CodecConfig, PositionMode};
use crate::container;
use crate::error::{Error, Result};
use crate::format::RawTensorStream;
use crate::verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    TopK,
    Sentinel,
    Chunk,
    Precalib,
    Positions,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::TopK, Suite::Sentinel, Suite::Chunk, Suite::Precalib, Suite::Positions];

    pub fn name(self) -> &'static str {
        match self {
            Suite::TopK => "topk",
            Suite::Sentinel => "sentinel",
            Suite::Chunk => "chunk",
            Suite::Precalib => "precalib",
            Suite::Positions => "positions",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation suite '{s}' (topk|sentinel|chunk|precalib|positions)")))
    }
}

pub const CHUNK_SWEEP: [usize; 8] = [256, 512, 1024, 2048, 4096, 8192, 16384, 65536];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub code_bits: u32,
    pub mode: &'static str,
    pub chunk_size: usize,
    pub positions: &'static str,
    pub roundtrip_ok: bool,
    /// Raw bytes over code, sign-mantissa and escape streams.
    pub stream_ratio: Option<f64>,
    /// Same, with the per-chunk count table added.
    pub payload_ratio: Option<f64>,
    /// Raw bytes over the whole container file.
    pub file_ratio: Option<f64>,
    pub escape_rate: f64,
    pub coverage: f64,
    pub container_bytes: u64,
    pub encode_secs: f64,
    pub decode_secs: f64,
    pub encode_gbps: f64,
    pub decode_gbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub suite: Suite,
    pub n_elements: u64,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.roundtrip_ok)
    }

    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "variant,code_bits,mode,chunk_size,positions,roundtrip_ok,stream_ratio,payload_ratio,file_ratio,\
             escape_rate,coverage,container_bytes,encode_gbps,decode_gbps\n",
        );
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{},{:.3},{:.3}",
                r.variant,
                r.code_bits,
                r.mode,
                r.chunk_size,
                r.positions,
                r.roundtrip_ok,
                opt(r.stream_ratio),
                opt(r.payload_ratio),
                opt(r.file_ratio),
                r.escape_rate,
                r.coverage,
                r.container_bytes,
                r.encode_gbps,
                r.decode_gbps
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("suite {} over {} elements\n", self.suite.name(), self.n_elements);
        let _ = writeln!(
            out,
            "{:<14} {:>8} {:>8} {:>8} {:>9} {:>9} {:>9} {:>9}  verify",
            "variant", "stream", "payload", "file", "escape%", "cover%", "enc GB/s", "dec GB/s"
        );
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:>8} {:>8} {:>8} {:>9.4} {:>9.4} {:>9.2} {:>9.2}  {}",
                r.variant,
                opt(r.stream_ratio),
                opt(r.payload_ratio),
                opt(r.file_ratio),
                r.escape_rate * 100.0,
                r.coverage * 100.0,
                r.encode_gbps,
                r.decode_gbps,
                if r.roundtrip_ok { "OK" } else { "FAIL" }
            );
        }
        out
    }
}

fn position_name(p: PositionMode) -> &'static str {
    match p {
        PositionMode::ChunkRelative => "chunk",
        PositionMode::Absolute32 => "abs32",
    }
}

/// Runs one variant through the full container path.
pub fn run_variant(stream: &RawTensorStream, variant: &str, config: &CodecConfig) -> Result<AblationRow> {
    let t0 = Instant::now();
    let encoded = codec::encode_quad(stream, config)?;
    let encode_secs = t0.elapsed().as_secs_f64();
    let bytes = container::to_bytes(&encoded)?;
    let t1 = Instant::now();
    let decoded = container::from_bytes(&bytes).and_then(|s| codec::decode(&s));
    let decode_secs = t1.elapsed().as_secs_f64();
    let ok = match &decoded {
        Ok(d) => verify::compare(stream, d).ok,
        Err(_) => false,
    };
    let raw = stream.raw_bytes() as f64;
    let gbps = |secs: f64| if secs > 0.0 { raw / secs / 1e9 } else { f64::INFINITY };
    Ok(AblationRow {
        variant: variant.to_string(),
        code_bits: encoded.code_bits(),
        mode: encoded.mode().name(),
        chunk_size: encoded.chunk_size,
        positions: position_name(encoded.escapes.position_mode()),
        roundtrip_ok: ok,
        stream_ratio: ok.then(|| encoded.stream_ratio()),
        payload_ratio: ok.then(|| encoded.payload_ratio()),
        file_ratio: ok.then(|| raw / bytes.len() as f64),
        escape_rate: encoded.escape_rate(),
        coverage: 1.0 - encoded.escape_rate(),
        container_bytes: bytes.len() as u64,
        encode_secs,
        decode_secs,
        encode_gbps: gbps(encode_secs),
        decode_gbps: gbps(decode_secs),
    })
}

/// Runs `suite` on `stream`. `calibration` supplies the codebook for the
/// precalibrated row of the precalib suite; without it the input's own
/// histogram is used.
pub fn run_suite(
    stream: &RawTensorStream,
    suite: Suite,
    base: &CodecConfig,
    calibration: Option<&ExponentCodebook>,
) -> Result<AblationReport> {
    let base = base.clone().dynamic();
    let variants: Vec<(String, CodecConfig)> = match suite {
        Suite::TopK => vec![
            ("top8".into(), base.clone().with_code_bits(3).with_mode(CodebookMode::Explicit)),
            ("top16".into(), base.clone().with_code_bits(4).with_mode(CodebookMode::Explicit)),
        ],
        Suite::Sentinel => vec![
            ("explicit".into(), base.clone().with_mode(CodebookMode::Explicit)),
            ("sentinel".into(), base.clone().with_mode(CodebookMode::Sentinel)),
        ],
        Suite::Positions => vec![
            (
                "chunk".into(),
                base.clone().with_mode(CodebookMode::Explicit).with_positions(PositionMode::ChunkRelative),
            ),
            (
                "abs32".into(),
                base.clone().with_mode(CodebookMode::Explicit).with_positions(PositionMode::Absolute32),
            ),
            ("sentinel".into(), base.clone().with_mode(CodebookMode::Sentinel)),
        ],
        Suite::Chunk => CHUNK_SWEEP
            .iter()
            .map(|&c| {
                (
                    format!("chunk{c}"),
                    base.clone()
                        .with_mode(CodebookMode::Explicit)
                        .with_positions(PositionMode::ChunkRelative)
                        .with_chunk_size(c),
                )
            })
            .collect(),
        Suite::Precalib => {
            let book = match calibration {
                Some(b) => b.clone(),
                None => crate::calibration::select_codebook(&build_histogram(stream)?, base.code_bits, base.mode)?,
            };
            vec![
                ("precalibrated".into(), base.clone().with_codebook(book)),
                ("dynamic".into(), base.clone()),
            ]
        }
    };
    let rows = variants
        .iter()
        .map(|(name, cfg)| run_variant(stream, name, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        suite,
        n_elements: stream.len() as u64,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, ExponentSpec};
    use crate::format::ElementFormat;

    fn data(k: usize, eps: f64) -> RawTensorStream {
        generate(&ExponentSpec::geometric(ElementFormat::Bf16, k, 8, eps, 1 << 18, 11)).unwrap()
    }

    #[test]
    fn suite_names() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!(matches!("nope".parse::<Suite>(), Err(Error::Config(_))));
    }

    #[test]
    fn topk_orders() {
        let r = run_suite(&data(8, 0.0789), Suite::TopK, &CodecConfig::new(ElementFormat::Bf16), None).unwrap();
        assert!(r.all_ok());
        assert!(r.row("top8").unwrap().stream_ratio < r.row("top16").unwrap().stream_ratio);
    }

    #[test]
    fn positions_suite() {
        let r = run_suite(&data(15, 0.0027), Suite::Positions, &CodecConfig::new(ElementFormat::Bf16), None).unwrap();
        assert!(r.all_ok());
        let s = r.row("sentinel").unwrap().stream_ratio.unwrap();
        let e = r.row("chunk").unwrap().stream_ratio.unwrap();
        let a = r.row("abs32").unwrap().stream_ratio.unwrap();
        assert!(s > e && e > a);
        assert_eq!(r.to_csv().lines().count(), 4);
    }

    #[test]
    fn chunk_suite_position_width() {
        let r = run_suite(&data(16, 0.0016), Suite::Chunk, &CodecConfig::new(ElementFormat::Bf16), None).unwrap();
        assert!(r.all_ok());
        let m = r.rows[0].escape_rate * r.n_elements as f64;
        // chunk256 -> chunk512 swaps 1-byte for 2-byte positions and halves the count table
        let c256 = r.row("chunk256").unwrap().container_bytes as f64;
        let c512 = r.row("chunk512").unwrap().container_bytes as f64;
        let tables = 4.0 * (r.n_elements as f64 / 256.0 - r.n_elements as f64 / 512.0);
        assert_eq!(c512 - c256, m - tables);
    }

    #[test]
    fn precalib_matches_dynamic() {
        let r = run_suite(&data(16, 0.0016), Suite::Precalib, &CodecConfig::new(ElementFormat::Bf16), None).unwrap();
        let p = r.row("precalibrated").unwrap();
        let d = r.row("dynamic").unwrap();
        assert_eq!(p.stream_ratio, d.stream_ratio);
        assert_eq!(p.escape_rate, d.escape_rate);
    }
}
