// SPDX-License-Identifier: Apache-2.0

//! Timing harness: verify once, warm up, then time repeated runs.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;

use crate::codec::{self, CodecConfig};
use crate::error::{Error, Result};
use crate::format::RawTensorStream;
use crate::verify::{self, VerifyReport};

pub const DEFAULT_REPS: usize = 10;
pub const WARMUP_REPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub name: &'static str,
    pub reps: usize,
    /// GB/s over uncompressed bytes.
    pub mean_gbps: f64,
    /// Sample standard deviation; absent for a single repetition.
    pub stddev_gbps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub verify: VerifyReport,
    pub raw_bytes: u64,
    pub stream_ratio: f64,
    pub payload_ratio: f64,
    pub threads: usize,
    pub timings: Vec<Timing>,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "verify={} ({} elements)\nratio stream={:.4} payload={:.4}  threads={}\n",
            if self.verify.ok { "OK" } else { "FAIL" },
            self.verify.n,
            self.stream_ratio,
            self.payload_ratio,
            self.threads
        );
        for t in &self.timings {
            match t.stddev_gbps {
                Some(sd) => {
                    let _ = writeln!(out, "{:<14} {:>10.3} ± {:.3} GB/s  (n={})", t.name, t.mean_gbps, sd, t.reps);
                }
                None => {
                    let _ = writeln!(out, "{:<14} {:>10.3} GB/s  (n=1)", t.name, t.mean_gbps);
                }
            }
        }
        out
    }
}

fn time_gbps<F: FnMut()>(name: &'static str, raw_bytes: u64, reps: usize, mut f: F) -> Timing {
    for _ in 0..WARMUP_REPS {
        f();
    }
    let samples: Vec<f64> = (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            let secs = t.elapsed().as_secs_f64().max(1e-12);
            raw_bytes as f64 / secs / 1e9
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / reps as f64;
    let stddev = (reps > 1).then(|| {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        var.sqrt()
    });
    Timing {
        name,
        reps,
        mean_gbps: mean,
        stddev_gbps: stddev,
    }
}

/// Times scalar encode, quad encode and decode. Fails without timing
/// anything when the round-trip does not verify.
pub fn run(stream: &RawTensorStream, config: &CodecConfig, reps: usize) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let report = verify::verify_roundtrip(stream, config)?;
    if !report.ok {
        return Err(Error::Corrupt(format!(
            "round-trip failed ({} mismatches); not timing",
            report.mismatch_count
        )));
    }
    // Pin the codebook so dynamic calibration is not re-run inside the timed loops.
    let encoded = codec::encode(stream, config)?;
    let fixed = config.clone().with_codebook(encoded.codebook.clone());
    let raw = stream.raw_bytes();
    let timings = vec![
        time_gbps("encode", raw, reps, || {
            black_box(codec::encode(stream, &fixed).expect("verified config"));
        }),
        time_gbps("encode_quad", raw, reps, || {
            black_box(codec::encode_quad(stream, &fixed).expect("verified config"));
        }),
        time_gbps("decode", raw, reps, || {
            black_box(codec::decode(&encoded).expect("verified streams"));
        }),
    ];
    Ok(BenchReport {
        verify: report,
        raw_bytes: raw,
        stream_ratio: encoded.stream_ratio(),
        payload_ratio: encoded.payload_ratio(),
        threads: rayon::current_num_threads(),
        timings,
    })
}
