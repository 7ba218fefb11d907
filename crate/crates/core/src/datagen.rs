// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic streams with a controlled exponent distribution.
//!
//! In exact-count mode the histogram is fixed up front: `round(ε·N)` escape
//! elements spread evenly over the escape values, the remainder split over
//! the in-book exponents by weight (largest remainder), then the whole
//! exponent sequence is shuffled. Sign-mantissa bits are uniform.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{reconstruct, ElementFormat, RawTensorStream, SplitFields};

/// Identifier recorded next to generated files.
pub const PRNG_ID: &str = "chacha12";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSpec {
    pub format: ElementFormat,
    /// `(exponent, weight)` pairs for the intended codebook set.
    pub in_book: Vec<(u8, f64)>,
    pub escape_values: Vec<u8>,
    pub escape_rate: f64,
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_exact")]
    pub exact_counts: bool,
}

fn default_exact() -> bool {
    true
}

/// Per-step decay of the default in-book weights.
pub const DEFAULT_DECAY: f64 = 0.69;

impl ExponentSpec {
    /// Geometric weights over `k` in-book exponents just below the format's
    /// bias, with `n_escape` escape values taken from the bottom of the range.
    pub fn geometric(format: ElementFormat, k: usize, n_escape: usize, escape_rate: f64, count: usize, seed: u64) -> Self {
        let bias = (format.exp_values() / 2 - 1) as i32;
        // Most frequent exponent at bias - 3, then alternating around it.
        let centre = bias - 3;
        let mut in_book = Vec::with_capacity(k);
        let mut offset = 0i32;
        let mut w = 1.0;
        while in_book.len() < k {
            let e = centre + offset;
            if (0..format.exp_values() as i32).contains(&e) {
                in_book.push((e as u8, w));
                w *= DEFAULT_DECAY;
            }
            offset = if offset > 0 { -offset } else { 1 - offset };
            if offset.unsigned_abs() as usize > format.exp_values() {
                break;
            }
        }
        let taken: Vec<u8> = in_book.iter().map(|p| p.0).collect();
        let escape_values = (0..format.exp_values())
            .map(|e| e as u8)
            .filter(|e| !taken.contains(e))
            .take(n_escape)
            .collect();
        Self {
            format,
            in_book,
            escape_values,
            escape_rate,
            count,
            seed,
            exact_counts: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.in_book.is_empty() {
            return bad("spec needs at least one in-book exponent".into());
        }
        if !(0.0..1.0).contains(&self.escape_rate) {
            return bad(format!("escape rate {} outside [0, 1)", self.escape_rate));
        }
        if self.escape_rate > 0.0 && self.escape_values.is_empty() {
            return bad("escape rate > 0 needs escape values".into());
        }
        let limit = self.format.exp_values();
        for &(e, w) in &self.in_book {
            if e as usize >= limit {
                return bad(format!("exponent {e:#x} out of range for {}", self.format));
            }
            if !(w > 0.0 && w.is_finite()) {
                return bad(format!("weight {w} for exponent {e:#x} must be positive"));
            }
        }
        for &e in &self.escape_values {
            if e as usize >= limit {
                return bad(format!("escape exponent {e:#x} out of range for {}", self.format));
            }
            if self.in_book.iter().any(|p| p.0 == e) {
                return bad(format!("exponent {e:#x} is both in-book and escape"));
            }
        }
        let mut seen = vec![false; limit];
        for e in self.in_book.iter().map(|p| p.0).chain(self.escape_values.iter().copied()) {
            if std::mem::replace(&mut seen[e as usize], true) {
                return bad(format!("exponent {e:#x} listed twice"));
            }
        }
        if self.count == 0 {
            return bad("count must be at least 1".into());
        }
        Ok(())
    }

    /// Escape elements placed in exact-count mode.
    pub fn exact_escape_count(&self) -> usize {
        (self.escape_rate * self.count as f64).round() as usize
    }

    /// Parses the `key = value` text form (TOML syntax).
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::config(format!("bad spec file: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

/// Splits `total` into integer parts proportional to `weights`.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut parts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total - parts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        parts[i] += 1;
        left -= 1;
    }
    parts
}

pub fn generate(spec: &ExponentSpec) -> Result<RawTensorStream> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let n = spec.count;
    let weights: Vec<f64> = spec.in_book.iter().map(|p| p.1).collect();

    let exponents: Vec<u8> = if spec.exact_counts {
        let m = spec.exact_escape_count();
        let mut exps = Vec::with_capacity(n);
        for (&(e, _), c) in spec.in_book.iter().zip(apportion(n - m, &weights)) {
            exps.extend(std::iter::repeat_n(e, c));
        }
        if m > 0 {
            let even = vec![1.0; spec.escape_values.len()];
            for (&e, c) in spec.escape_values.iter().zip(apportion(m, &even)) {
                exps.extend(std::iter::repeat_n(e, c));
            }
        }
        exps.shuffle(&mut rng);
        exps
    } else {
        let sum: f64 = weights.iter().sum();
        let cdf: Vec<f64> = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w / sum;
                Some(*acc)
            })
            .collect();
        (0..n)
            .map(|_| {
                if spec.escape_rate > 0.0 && rng.gen_bool(spec.escape_rate) {
                    spec.escape_values[rng.gen_range(0..spec.escape_values.len())]
                } else {
                    let u: f64 = rng.gen();
                    let i = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                    spec.in_book[i].0
                }
            })
            .collect()
    };

    let sm_limit = 1u16 << spec.format.sm_bits();
    let words = exponents
        .into_iter()
        .map(|e| {
            let a = rng.gen_range(0..sm_limit) as u8;
            reconstruct(
                SplitFields {
                    exponent: e,
                    sign_mantissa: a,
                },
                spec.format,
            )
        })
        .collect();
    RawTensorStream::new(spec.format, words)
}

/// Text written next to generated files so a corpus can be regenerated.
pub fn metadata(spec: &ExponentSpec) -> String {
    format!("# generated by splitzip datagen\nprng = \"{PRNG_ID}\"\n{}", spec.to_toml())
}

pub fn ingest_raw(path: &Path) -> Result<RawTensorStream> {
    let f = std::fs::File::open(path)?;
    crate::container::read_raw(std::io::BufReader::new(f))
}
