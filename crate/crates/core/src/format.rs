// SPDX-License-Identifier: Apache-2.0

//! Element formats and the exponent / sign-mantissa field split.
//!
//! Every element word is treated as an opaque bit pattern. The exponent field
//! is lifted out unchanged, and the sign bit is moved to the top of the
//! sign-mantissa unit so that the remaining bits form one contiguous value:
//!
//! | format | word | exponent          | sign-mantissa                     |
//! |--------|------|-------------------|-----------------------------------|
//! | BF16   | 16   | `(x >> 7) & 0xFF` | `((x >> 8) & 0x80) \| (x & 0x7F)` |
//! | E5M2   | 8    | `(x >> 2) & 0x1F` | `((x >> 7) << 2) \| (x & 0x03)`   |
//! | E4M3   | 8    | `(x >> 3) & 0x0F` | `((x >> 7) << 3) \| (x & 0x07)`   |
//!
//! NaN, infinity and subnormal encodings get no special treatment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementFormat {
    Bf16,
    E5m2,
    E4m3,
}

impl ElementFormat {
    pub const ALL: [ElementFormat; 3] = [ElementFormat::Bf16, ElementFormat::E5m2, ElementFormat::E4m3];

    #[inline]
    pub const fn word_bits(self) -> u32 {
        match self {
            ElementFormat::Bf16 => 16,
            ElementFormat::E5m2 | ElementFormat::E4m3 => 8,
        }
    }

    #[inline]
    pub const fn word_bytes(self) -> usize {
        (self.word_bits() / 8) as usize
    }

    #[inline]
    pub const fn exp_bits(self) -> u32 {
        match self {
            ElementFormat::Bf16 => 8,
            ElementFormat::E5m2 => 5,
            ElementFormat::E4m3 => 4,
        }
    }

    #[inline]
    pub const fn sm_bits(self) -> u32 {
        self.word_bits() - self.exp_bits()
    }

    /// Number of distinct exponent values, i.e. histogram bins.
    #[inline]
    pub const fn exp_values(self) -> usize {
        1 << self.exp_bits()
    }

    #[inline]
    pub const fn word_mask(self) -> u16 {
        ((1u32 << self.word_bits()) - 1) as u16
    }

    pub const fn to_byte(self) -> u8 {
        match self {
            ElementFormat::Bf16 => 0,
            ElementFormat::E5m2 => 1,
            ElementFormat::E4m3 => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(ElementFormat::Bf16),
            1 => Some(ElementFormat::E5m2),
            2 => Some(ElementFormat::E4m3),
            _ => None,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ElementFormat::Bf16 => "bf16",
            ElementFormat::E5m2 => "e5m2",
            ElementFormat::E4m3 => "e4m3",
        }
    }
}

impl fmt::Display for ElementFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bf16" => Ok(ElementFormat::Bf16),
            "e5m2" | "fp8_e5m2" => Ok(ElementFormat::E5m2),
            "e4m3" | "fp8_e4m3" => Ok(ElementFormat::E4m3),
            other => Err(Error::config(format!("unknown element format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitFields {
    pub exponent: u8,
    pub sign_mantissa: u8,
}

#[inline]
pub fn split_fields(word: u16, fmt: ElementFormat) -> SplitFields {
    match fmt {
        ElementFormat::Bf16 => SplitFields {
            exponent: ((word >> 7) & 0xFF) as u8,
            sign_mantissa: (((word >> 8) & 0x80) | (word & 0x7F)) as u8,
        },
        ElementFormat::E5m2 => SplitFields {
            exponent: ((word >> 2) & 0x1F) as u8,
            sign_mantissa: ((((word >> 7) & 1) << 2) | (word & 0x03)) as u8,
        },
        ElementFormat::E4m3 => SplitFields {
            exponent: ((word >> 3) & 0x0F) as u8,
            sign_mantissa: ((((word >> 7) & 1) << 3) | (word & 0x07)) as u8,
        },
    }
}

#[inline]
pub fn exponent_of(word: u16, fmt: ElementFormat) -> u8 {
    match fmt {
        ElementFormat::Bf16 => ((word >> 7) & 0xFF) as u8,
        ElementFormat::E5m2 => ((word >> 2) & 0x1F) as u8,
        ElementFormat::E4m3 => ((word >> 3) & 0x0F) as u8,
    }
}

#[inline]
pub fn reconstruct(fields: SplitFields, fmt: ElementFormat) -> u16 {
    let e = fields.exponent as u16;
    let a = fields.sign_mantissa as u16;
    match fmt {
        ElementFormat::Bf16 => ((a & 0x80) << 8) | (e << 7) | (a & 0x7F),
        ElementFormat::E5m2 => (((a >> 2) & 1) << 7) | ((e & 0x1F) << 2) | (a & 0x03),
        ElementFormat::E4m3 => (((a >> 3) & 1) << 7) | ((e & 0x0F) << 3) | (a & 0x07),
    }
}

/// A flat run of element words in one format. FP8 words occupy the low byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTensorStream {
    fmt: ElementFormat,
    words: Vec<u16>,
}

impl RawTensorStream {
    /// Fails if any word has bits set above the format's width.
    pub fn new(fmt: ElementFormat, words: Vec<u16>) -> Result<Self> {
        let mask = fmt.word_mask();
        if let Some(i) = words.iter().position(|&w| w & !mask != 0) {
            return Err(Error::InvalidInput(format!(
                "word {:#x} at index {i} does not fit {fmt}",
                words[i]
            )));
        }
        Ok(Self { fmt, words })
    }

    pub fn from_bytes(fmt: ElementFormat, bytes: &[u8]) -> Result<Self> {
        let words = match fmt.word_bytes() {
            1 => bytes.iter().map(|&b| b as u16).collect(),
            _ => {
                if !bytes.len().is_multiple_of(2) {
                    return Err(Error::InvalidInput(format!(
                        "odd byte count {} for 16-bit words",
                        bytes.len()
                    )));
                }
                bytes
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect()
            }
        };
        Ok(Self { fmt, words })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self.fmt.word_bytes() {
            1 => self.words.iter().map(|&w| w as u8).collect(),
            _ => self.words.iter().flat_map(|w| w.to_le_bytes()).collect(),
        }
    }

    #[inline]
    pub fn format(&self) -> ElementFormat {
        self.fmt
    }

    #[inline]
    pub fn words(&self) -> &[u16] {
        &self.words
    }

    pub fn into_words(self) -> Vec<u16> {
        self.words
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.words.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn raw_bytes(&self) -> u64 {
        self.words.len() as u64 * self.fmt.word_bytes() as u64
    }
}
