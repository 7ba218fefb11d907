// SPDX-License-Identifier: Apache-2.0

//! Lossless compression for BF16 and FP8 tensor streams.
//!
//! Exponents are replaced by fixed-length codes from a small calibrated
//! codebook; sign and mantissa bits are kept verbatim; the rare exponents
//! outside the codebook go to a sparse escape stream. The crate also carries
//! an analytic model of encode / transfer / decode pipelines for KV-cache
//! transfer between prefill and decode workers.
//!
//! ```
//! use splitzip::{codec, ElementFormat, RawTensorStream};
//!
//! let words = vec![0x3F80u16, 0xBF80, 0x4000, 0x3F00];
//! let stream = RawTensorStream::new(ElementFormat::Bf16, words).unwrap();
//! let config = codec::CodecConfig::new(ElementFormat::Bf16);
//! let encoded = codec::encode(&stream, &config).unwrap();
//! assert_eq!(codec::decode(&encoded).unwrap(), stream);
//! ```

pub mod ablation;
pub mod bench;
pub mod bitpack;
pub mod calibration;
pub mod codec;
pub mod container;
pub mod datagen;
pub mod error;
pub mod format;
pub mod pipeline;
pub mod verify;

pub use calibration::{build_histogram, select_codebook, CalibrationStats, CodebookMode, ExponentCodebook};
pub use codec::{decode, encode, encode_quad, CodecConfig, EncodedStreams, PositionMode};
pub use error::{Error, ErrorClass, Result};
pub use format::{ElementFormat, RawTensorStream};
