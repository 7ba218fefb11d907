// SPDX-License-Identifier: Apache-2.0

use std::ffi::CStr;
use std::ptr;

use splitzip_ffi::*;

fn bf16_bytes(n: usize) -> Vec<u8> {
    (0..n)
        .flat_map(|i| {
            let e: u16 = if i % 97 == 5 { 0x10 } else { 0x7C + (i % 5) as u16 };
            ((e << 7) | (i as u16 & 0x7F) | if i % 3 == 0 { 0x8000 } else { 0 }).to_le_bytes()
        })
        .collect()
}

unsafe fn buffer_vec(buf: *const SzBuffer) -> Vec<u8> {
    std::slice::from_raw_parts(sz_buffer_data(buf), sz_buffer_len(buf)).to_vec()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sz_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn compress_decompress_roundtrip() {
    let data = bf16_bytes(5000);
    let cfg = sz_config_default(SzFormat::Bf16 as u32);
    unsafe {
        let mut packed: *mut SzBuffer = ptr::null_mut();
        assert_eq!(sz_compress(&cfg, ptr::null(), data.as_ptr(), data.len(), &mut packed), SzStatus::Ok);
        assert!(sz_buffer_len(packed) < data.len());

        let mut fmt = SzFormat::E4m3;
        let mut raw: *mut SzBuffer = ptr::null_mut();
        let c = buffer_vec(packed);
        assert_eq!(sz_decompress(c.as_ptr(), c.len(), &mut fmt, &mut raw), SzStatus::Ok);
        assert_eq!(fmt, SzFormat::Bf16);
        assert_eq!(buffer_vec(raw), data);
        assert_eq!(
            sz_verify_container(SzFormat::Bf16 as u32, data.as_ptr(), data.len(), c.as_ptr(), c.len()),
            SzStatus::Ok
        );
        sz_buffer_free(packed);
        sz_buffer_free(raw);
    }
}

#[test]
fn precalibrated_codebook() {
    let data = bf16_bytes(4000);
    unsafe {
        let mut book: *mut SzCodebook = ptr::null_mut();
        assert_eq!(
            sz_calibrate(SzFormat::Bf16 as u32, data.as_ptr(), data.len(), 3, SzMode::Explicit as u32, &mut book),
            SzStatus::Ok
        );
        assert_eq!(sz_codebook_entries(book), 6);
        let mut rec: *mut SzBuffer = ptr::null_mut();
        assert_eq!(sz_codebook_to_bytes(book, &mut rec), SzStatus::Ok);
        let bytes = buffer_vec(rec);
        let mut again: *mut SzCodebook = ptr::null_mut();
        assert_eq!(sz_codebook_from_bytes(bytes.as_ptr(), bytes.len(), &mut again), SzStatus::Ok);
        assert_eq!(sz_codebook_entries(again), 6);

        let mut cfg = sz_config_default(SzFormat::Bf16 as u32);
        cfg.chunk_size = 256;
        assert_eq!(sz_verify(&cfg, again, data.as_ptr(), data.len()), SzStatus::Ok);
        sz_buffer_free(rec);
        sz_codebook_free(book);
        sz_codebook_free(again);
    }
}

#[test]
fn errors_map_to_status() {
    let data = bf16_bytes(100);
    unsafe {
        let mut out: *mut SzBuffer = ptr::null_mut();
        assert_eq!(sz_compress(ptr::null(), ptr::null(), data.as_ptr(), data.len(), &mut out), SzStatus::NullPointer);
        assert!(last_error().contains("config"));

        let mut cfg = sz_config_default(SzFormat::Bf16 as u32);
        cfg.code_bits = 7;
        assert_eq!(sz_compress(&cfg, ptr::null(), data.as_ptr(), data.len(), &mut out), SzStatus::Config);
        cfg = sz_config_default(9);
        assert_eq!(sz_compress(&cfg, ptr::null(), data.as_ptr(), data.len(), &mut out), SzStatus::Config);
        cfg = sz_config_default(SzFormat::Bf16 as u32);
        cfg.mode = 42;
        assert_eq!(sz_verify(&cfg, ptr::null(), data.as_ptr(), data.len()), SzStatus::Config);

        // odd byte count is not a whole number of BF16 elements
        cfg = sz_config_default(SzFormat::Bf16 as u32);
        assert_ne!(sz_compress(&cfg, ptr::null(), data.as_ptr(), 7, &mut out), SzStatus::Ok);
        assert_eq!(sz_compress(&cfg, ptr::null(), ptr::null(), 0, &mut out), SzStatus::InvalidInput);

        let mut fmt = SzFormat::Bf16;
        assert_eq!(sz_decompress(b"junk".as_ptr(), 4, &mut fmt, &mut out), SzStatus::Format);
        assert!(!last_error().is_empty());

        assert_eq!(sz_compress(&cfg, ptr::null(), data.as_ptr(), data.len(), &mut out), SzStatus::Ok);
        assert!(last_error().is_empty());
        let mut c = buffer_vec(out);
        sz_buffer_free(out);
        let n = c.len();
        c[n - 1] ^= 0x40;
        assert_eq!(
            sz_verify_container(SzFormat::Bf16 as u32, data.as_ptr(), data.len(), c.as_ptr(), c.len()),
            SzStatus::VerifyFailed
        );

        sz_buffer_free(ptr::null_mut());
        sz_codebook_free(ptr::null_mut());
        assert_eq!(sz_buffer_len(ptr::null()), 0);
    }
}

#[test]
fn hiding_bandwidth() {
    let mut b = 0.0;
    unsafe {
        assert_eq!(sz_hiding_bandwidth(613.3, 2181.8, 1.324, &mut b), SzStatus::Ok);
        assert!((b - 463.2).abs() < 0.1);
        assert_eq!(sz_hiding_bandwidth(613.3, 2181.8, 0.0, &mut b), SzStatus::Domain);
        assert_eq!(sz_hiding_bandwidth(1.0, 1.0, 1.0, ptr::null_mut()), SzStatus::NullPointer);
    }
}
