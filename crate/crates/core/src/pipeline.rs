// SPDX-License-Identifier: Apache-2.0

//! Stage-time model for compressed KV-cache transfer.
//!
//! With raw size `S`, ratio `ρ`, codec throughputs `G_enc`/`G_dec` (measured
//! on raw bytes) and link bandwidth `B` (compressed bytes):
//!
//! ```text
//! T_enc = S / G_enc     T_xfer = S / (ρ B)     T_dec = S / G_dec
//! T_pipe = max(T_enc, T_xfer, T_dec)
//! B_hide = min(G_enc, G_dec) / ρ
//! ```
//!
//! Without overlap the stages add up, which is how [`transfer_breakdown`]
//! accounts for them. Units are bytes and seconds throughout.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub raw_bytes: f64,
    pub ratio: f64,
    pub enc_throughput: f64,
    pub dec_throughput: f64,
    pub link_bandwidth: f64,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("raw_bytes", self.raw_bytes),
            ("ratio", self.ratio),
            ("enc_throughput", self.enc_throughput),
            ("dec_throughput", self.dec_throughput),
            ("link_bandwidth", self.link_bandwidth),
        ] {
            positive(name, v)?;
        }
        Ok(())
    }

    pub fn with_raw_bytes(mut self, raw_bytes: f64) -> Self {
        self.raw_bytes = raw_bytes;
        self
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    // Infinity is allowed: an infinitely fast codec is a meaningful limit.
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub enc: f64,
    pub xfer: f64,
    pub dec: f64,
}

impl StageTimes {
    pub fn max(&self) -> f64 {
        self.enc.max(self.xfer).max(self.dec)
    }
}

pub fn stage_times(p: &PipelineParams) -> Result<StageTimes> {
    p.validate()?;
    Ok(StageTimes {
        enc: p.raw_bytes / p.enc_throughput,
        xfer: p.raw_bytes / (p.ratio * p.link_bandwidth),
        dec: p.raw_bytes / p.dec_throughput,
    })
}

/// Steady-state time of an overlapped encode / transfer / decode pipeline.
pub fn pipeline_time(p: &PipelineParams) -> Result<f64> {
    Ok(stage_times(p)?.max())
}

/// Largest link bandwidth at which both codec stages stay hidden behind
/// the transfer.
pub fn hiding_bandwidth(enc_throughput: f64, dec_throughput: f64, ratio: f64) -> Result<f64> {
    positive("enc_throughput", enc_throughput)?;
    positive("dec_throughput", dec_throughput)?;
    positive("ratio", ratio)?;
    Ok(enc_throughput.min(dec_throughput) / ratio)
}

/// True when the transfer stage is the bottleneck.
pub fn codec_hidden(p: &PipelineParams) -> Result<bool> {
    let t = stage_times(p)?;
    Ok(t.xfer >= t.enc && t.xfer >= t.dec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferBreakdown {
    pub t_enc: f64,
    pub t_xfer: f64,
    pub t_dec: f64,
    /// Fixed per-transfer cost paid by both the native and compressed paths.
    pub overhead: f64,
    pub t_total_compressed: f64,
    pub t_native: f64,
    pub frac_enc: f64,
    pub frac_xfer: f64,
    pub frac_dec: f64,
    pub frac_overhead: f64,
    pub speedup: f64,
}

/// Additive accounting from directly measured stage times. `t_native` is the
/// uncompressed transfer time and must already include `overhead`.
pub fn breakdown_from_times(stages: StageTimes, t_native: f64, overhead: f64) -> Result<TransferBreakdown> {
    positive("t_enc", stages.enc)?;
    positive("t_xfer", stages.xfer)?;
    positive("t_dec", stages.dec)?;
    positive("t_native", t_native)?;
    if !(overhead >= 0.0 && overhead.is_finite()) {
        return Err(Error::Domain(format!("overhead must be non-negative, got {overhead}")));
    }
    let total = stages.enc + stages.xfer + stages.dec + overhead;
    Ok(TransferBreakdown {
        t_enc: stages.enc,
        t_xfer: stages.xfer,
        t_dec: stages.dec,
        overhead,
        t_total_compressed: total,
        t_native,
        frac_enc: stages.enc / total,
        frac_xfer: stages.xfer / total,
        frac_dec: stages.dec / total,
        frac_overhead: overhead / total,
        speedup: t_native / total,
    })
}

/// Additive accounting from model parameters; native time is `S / B + overhead`.
pub fn transfer_breakdown(p: &PipelineParams, overhead: f64) -> Result<TransferBreakdown> {
    let t = stage_times(p)?;
    // Infinite codec throughput gives zero-time stages, which the
    // measured-times path would reject.
    let total = t.enc + t.xfer + t.dec + overhead;
    if !(overhead >= 0.0 && overhead.is_finite()) {
        return Err(Error::Domain(format!("overhead must be non-negative, got {overhead}")));
    }
    let t_native = p.raw_bytes / p.link_bandwidth + overhead;
    Ok(TransferBreakdown {
        t_enc: t.enc,
        t_xfer: t.xfer,
        t_dec: t.dec,
        overhead,
        t_total_compressed: total,
        t_native,
        frac_enc: t.enc / total,
        frac_xfer: t.xfer / total,
        frac_dec: t.dec / total,
        frac_overhead: overhead / total,
        speedup: t_native / total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kv_bytes_per_token: f64,
    pub batches: Vec<u64>,
    pub seq_lens: Vec<u64>,
    pub ratio: f64,
    pub enc_throughput: f64,
    pub dec_throughput: f64,
    pub link_bandwidth: f64,
    #[serde(default)]
    pub overhead: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub batch: u64,
    pub seq_len: u64,
    pub raw_bytes: f64,
    pub native: f64,
    pub compressed: f64,
    pub speedup: f64,
}

/// Evaluates every (batch, seq_len) point, sorted by batch then seq_len.
pub fn sweep_simulation(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    positive("kv_bytes_per_token", cfg.kv_bytes_per_token)?;
    if cfg.batches.is_empty() || cfg.seq_lens.is_empty() {
        return Err(Error::Domain("sweep needs at least one batch size and one sequence length".into()));
    }
    if cfg.batches.contains(&0) || cfg.seq_lens.contains(&0) {
        return Err(Error::Domain("batch sizes and sequence lengths must be positive".into()));
    }
    let mut batches = cfg.batches.clone();
    let mut seqs = cfg.seq_lens.clone();
    batches.sort_unstable();
    batches.dedup();
    seqs.sort_unstable();
    seqs.dedup();
    let points: Vec<(u64, u64)> = batches
        .iter()
        .flat_map(|&b| seqs.iter().map(move |&s| (b, s)))
        .collect();
    points
        .par_iter()
        .map(|&(batch, seq_len)| {
            let raw = cfg.kv_bytes_per_token * batch as f64 * seq_len as f64;
            let p = PipelineParams {
                raw_bytes: raw,
                ratio: cfg.ratio,
                enc_throughput: cfg.enc_throughput,
                dec_throughput: cfg.dec_throughput,
                link_bandwidth: cfg.link_bandwidth,
            };
            let b = transfer_breakdown(&p, cfg.overhead)?;
            Ok(SweepRow {
                batch,
                seq_len,
                raw_bytes: raw,
                native: b.t_native,
                compressed: b.t_total_compressed,
                speedup: b.speedup,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("batch,seq_len,native_ms,compressed_ms,speedup\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            r.batch,
            r.seq_len,
            r.native * 1e3,
            r.compressed * 1e3,
            r.speedup
        );
    }
    out
}
