// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::calibration::CalibrationStats;

fn bf16(words: Vec<u16>) -> RawTensorStream {
    RawTensorStream::new(ElementFormat::Bf16, words).unwrap()
}

fn book(fmt: ElementFormat, entries: &[u8], bits: u32, mode: CodebookMode) -> ExponentCodebook {
    ExponentCodebook::new(fmt, entries.to_vec(), bits, mode).unwrap()
}

/// BF16 word with the given exponent and sign-mantissa unit.
fn word(e: u8, a: u8) -> u16 {
    ((a as u16 & 0x80) << 8) | ((e as u16) << 7) | (a as u16 & 0x7F)
}

fn random_stream(rng: &mut ChaCha8Rng, fmt: ElementFormat, n: usize) -> RawTensorStream {
    // Skewed exponents so codebooks see both hits and escapes.
    let words = (0..n)
        .map(|_| {
            let e: u16 = if rng.gen_bool(0.9) {
                rng.gen_range(0..6) + (fmt.exp_values() as u16 / 2 - 3)
            } else {
                rng.gen_range(0..fmt.exp_values() as u16)
            };
            let a: u16 = rng.gen_range(0..(1 << fmt.sm_bits()));
            crate::format::reconstruct(
                SplitFields {
                    exponent: e as u8,
                    sign_mantissa: a as u8,
                },
                fmt,
            )
        })
        .collect();
    RawTensorStream::new(fmt, words).unwrap()
}

#[test]
fn no_escape_sizes() {
    let b = book(ElementFormat::Bf16, &[0x7F, 0x80], 4, CodebookMode::Explicit);
    let s = bf16(vec![word(0x7F, 1), word(0x80, 2), word(0x7F, 0x83), word(0x80, 0)]);
    let enc = encode(&s, &CodecConfig::new(ElementFormat::Bf16).with_codebook(b)).unwrap();
    assert_eq!(enc.n_escapes(), 0);
    assert_eq!(enc.packed_codes, vec![0x10, 0x10]);
    assert_eq!(enc.sign_mantissa, vec![1, 2, 0x83, 0]);
    assert_eq!(enc.escapes, EscapeStreams::Chunked(vec![EscapeChunk::default()]));
    assert_eq!(decode(&enc).unwrap(), s);
}

#[test]
fn single_escape_in_chunk() {
    let b = book(ElementFormat::Bf16, &[0x7F], 4, CodebookMode::Explicit);
    let mut words = vec![word(0x7F, 5); 1024];
    words[700] = word(0x42, 0x99);
    let s = bf16(words);
    let enc = encode(&s, &CodecConfig::new(ElementFormat::Bf16).with_codebook(b)).unwrap();
    let EscapeStreams::Chunked(chunks) = &enc.escapes else { panic!() };
    assert_eq!(chunks.len(), 1);
    assert_eq!(chunks[0].positions, vec![700]);
    assert_eq!(chunks[0].values, vec![0x42]);
    assert_eq!(enc.packed_codes[350] & 0x0F, 0);
    assert_eq!(enc.layout().total(), 1024 + 512 + 4 + 3);
    assert_eq!(decode(&enc).unwrap(), s);
}

#[test]
fn hand_built_streams_decode() {
    let enc = EncodedStreams {
        fmt: ElementFormat::Bf16,
        n_elements: 2,
        chunk_size: 1024,
        codebook: book(ElementFormat::Bf16, &[0x7F], 4, CodebookMode::Explicit),
        packed_codes: vec![0x00],
        sign_mantissa: vec![0x00, 0x80],
        escapes: EscapeStreams::Chunked(vec![EscapeChunk::default()]),
    };
    assert_eq!(decode(&enc).unwrap().words(), &[0x3F80, 0xBF80]);
}

#[test]
fn partial_last_chunk_is_relative() {
    let b = book(ElementFormat::Bf16, &[0x7F], 4, CodebookMode::Explicit);
    let mut words = vec![word(0x7F, 0); 2500];
    words[2048 + 3] = word(0x01, 7);
    let s = bf16(words);
    let enc = encode(&s, &CodecConfig::new(ElementFormat::Bf16).with_codebook(b)).unwrap();
    let EscapeStreams::Chunked(chunks) = &enc.escapes else { panic!() };
    assert_eq!(chunks.len(), 3);
    assert_eq!(chunks[2].positions, vec![3]);
    assert_eq!(decode(&enc).unwrap(), s);
}

#[test]
fn sentinel_mode_streams() {
    let b = book(ElementFormat::Bf16, &[0x7F, 0x80], 4, CodebookMode::Sentinel);
    let s = bf16(vec![word(0x10, 1), word(0x7F, 2), word(0x20, 3)]);
    let enc = encode(&s, &CodecConfig::new(ElementFormat::Bf16).with_codebook(b)).unwrap();
    assert_eq!(enc.packed_codes, vec![0x0F, 0x0F]);
    assert_eq!(enc.escapes, EscapeStreams::Sentinel(vec![0x10, 0x20]));
    assert_eq!(decode(&enc).unwrap(), s);
}

#[test]
fn absolute_positions() {
    let b = book(ElementFormat::Bf16, &[0x7F], 4, CodebookMode::Explicit);
    let mut words = vec![word(0x7F, 0); 5000];
    words[4321] = word(0x11, 0);
    let s = bf16(words);
    let cfg = CodecConfig::new(ElementFormat::Bf16)
        .with_codebook(b)
        .with_positions(PositionMode::Absolute32);
    let enc = encode(&s, &cfg).unwrap();
    assert_eq!(
        enc.escapes,
        EscapeStreams::Absolute {
            positions: vec![4321],
            values: vec![0x11]
        }
    );
    assert_eq!(enc.layout().count_table, 0);
    assert_eq!(enc.layout().escape_positions, 4);
    assert_eq!(decode(&enc).unwrap(), s);
}

#[test]
fn everything_escapes() {
    for fmt in ElementFormat::ALL {
        for mode in [CodebookMode::Explicit, CodebookMode::Sentinel] {
            let b = book(fmt, &[0], 3, mode);
            let words: Vec<u16> = (1..fmt.exp_values()).map(|e| e as u8)
                .map(|e| crate::format::reconstruct(SplitFields { exponent: e, sign_mantissa: 1 }, fmt))
                .collect();
            let s = RawTensorStream::new(fmt, words).unwrap();
            let enc = encode(&s, &CodecConfig::new(fmt).with_codebook(b).with_chunk_size(7)).unwrap();
            assert_eq!(enc.n_escapes() as usize, s.len());
            assert_eq!(decode(&enc).unwrap(), s);
        }
    }
}

#[test]
fn config_errors() {
    let s = bf16(vec![0x3F80]);
    let e4 = book(ElementFormat::E4m3, &[1], 3, CodebookMode::Explicit);
    assert!(matches!(
        encode(&s, &CodecConfig::new(ElementFormat::Bf16).with_codebook(e4)),
        Err(Error::Config(_))
    ));
    assert!(matches!(encode(&s, &CodecConfig::new(ElementFormat::E5m2)), Err(Error::Config(_))));
    assert!(matches!(
        encode(&s, &CodecConfig::new(ElementFormat::Bf16).with_chunk_size(0)),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        encode(&s, &CodecConfig::new(ElementFormat::Bf16).with_chunk_size(70_000)),
        Err(Error::Config(_))
    ));
    assert!(encode(
        &s,
        &CodecConfig::new(ElementFormat::Bf16)
            .with_chunk_size(70_000)
            .with_positions(PositionMode::Absolute32)
    )
    .is_ok());
    let mut cfg = CodecConfig::new(ElementFormat::Bf16).with_codebook(book(
        ElementFormat::Bf16,
        &[1],
        4,
        CodebookMode::Explicit,
    ));
    cfg.code_bits = 3;
    assert!(matches!(encode(&s, &cfg), Err(Error::Config(_))));
    assert!(matches!(
        encode(&bf16(vec![]), &CodecConfig::new(ElementFormat::Bf16)),
        Err(Error::EmptyInput(_))
    ));
}

fn encoded_sample() -> EncodedStreams {
    let b = book(ElementFormat::Bf16, &[0x7F, 0x80], 4, CodebookMode::Explicit);
    let mut words = vec![word(0x7F, 3); 40];
    words[5] = word(0x01, 0);
    words[9] = word(0x02, 0);
    encode(&bf16(words), &CodecConfig::new(ElementFormat::Bf16).with_codebook(b).with_chunk_size(16)).unwrap()
}

#[test]
fn corruption_is_classified() {
    let good = encoded_sample();
    assert!(decode(&good).is_ok());

    let with_chunks = |f: &dyn Fn(&mut Vec<EscapeChunk>)| {
        let mut e = good.clone();
        let EscapeStreams::Chunked(c) = &mut e.escapes else { unreachable!() };
        f(c);
        decode(&e).unwrap_err()
    };
    assert!(matches!(with_chunks(&|c| c[0].positions[0] = 16), Error::CorruptChunk { chunk: 0, .. }));
    assert!(matches!(with_chunks(&|c| c[0].positions[1] = 5), Error::CorruptChunk { chunk: 0, .. }));
    assert!(matches!(with_chunks(&|c| c[0].values[0] = 0x7F), Error::CorruptChunk { chunk: 0, .. }));
    assert!(matches!(with_chunks(&|c| c.pop().map(drop).unwrap_or(())), Error::Corrupt(_)));
    // last chunk holds 8 elements
    assert!(matches!(
        with_chunks(&|c| {
            c[2].positions.push(9);
            c[2].values.push(1)
        }),
        Error::CorruptChunk { chunk: 2, .. }
    ));

    let mut e = good.clone();
    e.packed_codes.pop();
    assert!(matches!(decode(&e), Err(Error::LengthMismatch { .. })));

    let mut e = good.clone();
    e.packed_codes[0] = 0x2F;
    assert!(matches!(decode(&e), Err(Error::Corrupt(_))));

    // dummy code under an escape must be zero
    let mut e = good.clone();
    e.packed_codes[2] |= 0x10;
    assert!(matches!(decode(&e), Err(Error::CorruptChunk { chunk: 0, .. })));
}

#[test]
fn nonzero_padding_rejected() {
    let b = book(ElementFormat::E5m2, &[0x0F], 3, CodebookMode::Explicit);
    let s = RawTensorStream::new(ElementFormat::E5m2, vec![0x3C; 3]).unwrap();
    let mut enc = encode(&s, &CodecConfig::new(ElementFormat::E5m2).with_codebook(b)).unwrap();
    assert!(decode(&enc).is_ok());
    enc.sign_mantissa[1] |= 0x80;
    assert!(matches!(decode(&enc), Err(Error::Corrupt(_))));
}

#[test]
fn dynamic_matches_histogram_codebook() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_stream(&mut rng, ElementFormat::Bf16, 5000);
    let enc = encode(&s, &CodecConfig::new(ElementFormat::Bf16)).unwrap();
    let stats = build_histogram(&s).unwrap();
    let expected = select_codebook(&stats, 4, CodebookMode::Explicit).unwrap();
    assert_eq!(enc.codebook, expected);
    assert_eq!(
        enc.n_escapes(),
        s.len() as u64 - (stats.coverage_under(&expected) * s.len() as f64).round() as u64
    );
}

#[test]
fn parallelism_does_not_change_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = random_stream(&mut rng, ElementFormat::Bf16, 300_001);
    let cfg = CodecConfig::new(ElementFormat::Bf16);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = single.install(|| encode(&s, &cfg).unwrap());
    let b = many.install(|| encode(&s, &cfg).unwrap());
    let q = many.install(|| encode_quad(&s, &cfg).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, q);
    assert_eq!(many.install(|| decode(&a).unwrap()), s);
}

#[test]
fn quad_matches_scalar_on_odd_lengths_and_chunks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [1usize, 2, 3, 4, 5, 7, 8, 13, 1023, 1025, 4099] {
        for chunk in [1usize, 3, 4, 256, 1000, 1024] {
            let s = random_stream(&mut rng, ElementFormat::Bf16, n);
            for mode in [CodebookMode::Explicit, CodebookMode::Sentinel] {
                let cfg = CodecConfig::new(ElementFormat::Bf16).with_mode(mode).with_chunk_size(chunk);
                assert_eq!(encode_quad(&s, &cfg).unwrap(), encode(&s, &cfg).unwrap(), "n={n} chunk={chunk}");
            }
        }
    }
}

#[test]
fn quad_falls_back_for_other_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = random_stream(&mut rng, ElementFormat::E5m2, 999);
    let cfg = CodecConfig::new(ElementFormat::E5m2);
    assert_eq!(encode_quad(&s, &cfg).unwrap(), encode(&s, &cfg).unwrap());
}

fn any_config() -> impl Strategy<Value = CodecConfig> {
    (0usize..3, 3u32..=4, any::<bool>(), prop_oneof![Just(1usize), 1usize..300, Just(1024), Just(65536)], any::<bool>())
        .prop_map(|(f, bits, sentinel, chunk, abs)| {
            let fmt = ElementFormat::ALL[f];
            CodecConfig::new(fmt)
                .with_code_bits(bits)
                .with_mode(if sentinel { CodebookMode::Sentinel } else { CodebookMode::Explicit })
                .with_chunk_size(chunk)
                .with_positions(if abs { PositionMode::Absolute32 } else { PositionMode::ChunkRelative })
        })
}

proptest! {
    #[test]
    fn lossless_for_any_words(cfg in any_config(), raw in proptest::collection::vec(any::<u16>(), 1..600), calib_seed in any::<u64>()) {
        let fmt = cfg.fmt;
        let words: Vec<u16> = raw.iter().map(|w| w & fmt.word_mask()).collect();
        let s = RawTensorStream::new(fmt, words).unwrap();
        let enc = encode(&s, &cfg).unwrap();
        prop_assert_eq!(&decode(&enc).unwrap(), &s);

        // escape accounting: escapes + covered == n
        let stats = build_histogram(&s).unwrap();
        let covered = (stats.coverage_under(&enc.codebook) * s.len() as f64).round() as u64;
        prop_assert_eq!(enc.n_escapes() + covered, s.len() as u64);

        // precalibrated on unrelated data still round-trips
        let mut rng = ChaCha8Rng::seed_from_u64(calib_seed);
        let other = random_stream(&mut rng, fmt, 64);
        let mut st = CalibrationStats::empty(fmt);
        st.accumulate(other.words());
        let b = select_codebook(&st, cfg.code_bits, cfg.mode).unwrap();
        let enc2 = encode(&s, &cfg.clone().with_codebook(b)).unwrap();
        prop_assert_eq!(&decode(&enc2).unwrap(), &s);
        prop_assert_eq!(enc2.layout().total(), compressed_payload_bytes(s.len() as u64, enc2.n_escapes(), &enc2.config()).unwrap());
    }

    #[test]
    fn explicit_and_sentinel_agree(raw in proptest::collection::vec(any::<u16>(), 1..400)) {
        let s = bf16(raw);
        let a = encode(&s, &CodecConfig::new(ElementFormat::Bf16)).unwrap();
        let b = encode(&s, &CodecConfig::new(ElementFormat::Bf16).with_mode(CodebookMode::Sentinel)).unwrap();
        prop_assert_eq!(decode(&a).unwrap(), decode(&b).unwrap());
    }
}
