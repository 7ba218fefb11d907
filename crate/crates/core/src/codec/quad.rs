// SPDX-License-Identifier: Apache-2.0

//! BF16 / 4-bit dense encoder that handles four elements per 64-bit word.
//!
//! Each quad yields two code bytes and one 32-bit sign-mantissa word. The
//! marked encode table doubles as the escape detector, so per-chunk escape
//! counts fall out of the same pass.

use rayon::prelude::*;

use crate::calibration::{ExponentCodebook, ESCAPE_MARK};

use super::SPAN;

pub(super) struct QuadDense {
    pub packed_codes: Vec<u8>,
    pub sign_mantissa: Vec<u8>,
    pub chunk_counts: Vec<u32>,
}

pub(super) fn dense_encode(words: &[u16], book: &ExponentCodebook, chunk_size: usize) -> QuadDense {
    let n = words.len();
    let mut packed_codes = vec![0u8; n.div_ceil(2)];
    let mut sign_mantissa = vec![0u8; n];
    let n_chunks = n.div_ceil(chunk_size);

    // Each span returns its own chunk counts, keyed by global chunk index,
    // and the results are summed in span order.
    let partial: Vec<(usize, Vec<u32>)> = words
        .par_chunks(SPAN)
        .zip(packed_codes.par_chunks_mut(SPAN / 2))
        .zip(sign_mantissa.par_chunks_mut(SPAN))
        .enumerate()
        .map(|(si, ((span, codes), sms))| {
            let base = si * SPAN;
            let first_chunk = base / chunk_size;
            let last_chunk = (base + span.len() - 1) / chunk_size;
            let mut counts = vec![0u32; last_chunk - first_chunk + 1];
            encode_span(span, book.encode_table(), base, chunk_size, first_chunk, codes, sms, &mut counts);
            (first_chunk, counts)
        })
        .collect();

    let mut chunk_counts = vec![0u32; n_chunks];
    for (first, counts) in partial {
        for (dst, c) in chunk_counts[first..].iter_mut().zip(counts) {
            *dst += c;
        }
    }
    QuadDense {
        packed_codes,
        sign_mantissa,
        chunk_counts,
    }
}

#[allow(clippy::too_many_arguments)]
fn encode_span(
    words: &[u16],
    table: &[u8],
    base: usize,
    chunk_size: usize,
    first_chunk: usize,
    codes: &mut [u8],
    sms: &mut [u8],
    counts: &mut [u32],
) {
    let aligned = chunk_size.is_multiple_of(4);
    let quads = words.chunks_exact(4);
    let tail = quads.remainder();
    for (q, ((quad, code_pair), sm_word)) in quads
        .zip(codes.chunks_exact_mut(2))
        .zip(sms.chunks_exact_mut(4))
        .enumerate()
    {
        let packed = quad[0] as u64 | (quad[1] as u64) << 16 | (quad[2] as u64) << 32 | (quad[3] as u64) << 48;
        let mut code_bits: u16 = 0;
        let mut sm_bits: u32 = 0;
        let mut marks = [0u32; 4];
        for (j, mark) in marks.iter_mut().enumerate() {
            let x = (packed >> (16 * j)) as u16;
            let c = table[((x >> 7) & 0xFF) as usize];
            *mark = (c >> 7) as u32;
            code_bits |= ((c & !ESCAPE_MARK) as u16) << (4 * j);
            sm_bits |= ((((x >> 8) & 0x80) | (x & 0x7F)) as u32) << (8 * j);
        }
        code_pair.copy_from_slice(&code_bits.to_le_bytes());
        sm_word.copy_from_slice(&sm_bits.to_le_bytes());

        let i = base + 4 * q;
        if aligned {
            counts[i / chunk_size - first_chunk] += marks.iter().sum::<u32>();
        } else {
            for (j, m) in marks.iter().enumerate() {
                counts[(i + j) / chunk_size - first_chunk] += m;
            }
        }
    }

    let start = words.len() - tail.len();
    for (j, &x) in tail.iter().enumerate() {
        let c = table[((x >> 7) & 0xFF) as usize];
        let idx = start + j;
        let nibble = c & !ESCAPE_MARK;
        if idx.is_multiple_of(2) {
            codes[idx / 2] = nibble;
        } else {
            codes[idx / 2] |= nibble << 4;
        }
        sms[idx] = (((x >> 8) & 0x80) | (x & 0x7F)) as u8;
        counts[(base + idx) / chunk_size - first_chunk] += (c >> 7) as u32;
    }
}
