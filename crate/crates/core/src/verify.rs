// SPDX-License-Identifier: Apache-2.0

//! Bitwise round-trip checks through the serialized container.

use serde::Serialize;

use crate::codec::{self, CodecConfig};
use crate::container;
use crate::error::Result;
use crate::format::RawTensorStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub n: u64,
    pub mismatch_count: u64,
    pub first_mismatch_index: Option<u64>,
    /// Set when the container failed to decode at all.
    pub error: Option<String>,
}

impl VerifyReport {
    fn failed(n: u64, error: String) -> Self {
        Self {
            ok: false,
            n,
            mismatch_count: 0,
            first_mismatch_index: None,
            error: Some(error),
        }
    }
}

/// Element-wise comparison. A length or format difference counts every
/// unmatched position as a mismatch.
pub fn compare(original: &RawTensorStream, decoded: &RawTensorStream) -> VerifyReport {
    let a = original.words();
    let b = decoded.words();
    let mut mismatch_count = (a.len().max(b.len()) - a.len().min(b.len())) as u64;
    let mut first = (a.len() != b.len()).then(|| a.len().min(b.len()) as u64);
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x != y {
            mismatch_count += 1;
            if first.is_none_or(|f| (i as u64) < f) {
                first = Some(i as u64);
            }
        }
    }
    if original.format() != decoded.format() && mismatch_count == 0 {
        mismatch_count = a.len() as u64;
        first = Some(0);
    }
    VerifyReport {
        ok: mismatch_count == 0,
        n: a.len() as u64,
        mismatch_count,
        first_mismatch_index: first,
        error: None,
    }
}

/// Decodes `bytes` and compares against `original`. Decode errors become a
/// failed report rather than an `Err`.
pub fn verify_container_bytes(original: &RawTensorStream, bytes: &[u8]) -> VerifyReport {
    match container::from_bytes(bytes).and_then(|s| codec::decode(&s)) {
        Ok(decoded) => compare(original, &decoded),
        Err(e) => VerifyReport::failed(original.len() as u64, e.to_string()),
    }
}

/// Encodes, serializes, parses, decodes and compares. Errors are returned
/// only for failures on the encode side (bad config or input).
pub fn verify_roundtrip(stream: &RawTensorStream, config: &CodecConfig) -> Result<VerifyReport> {
    let encoded = codec::encode(stream, config)?;
    let bytes = container::to_bytes(&encoded)?;
    Ok(verify_container_bytes(stream, &bytes))
}
