// SPDX-License-Identifier: Apache-2.0

//! C ABI over the `splitzip` codec.
//!
//! Every function returns an [`SzStatus`]. On failure a message is kept per
//! thread and can be read with [`sz_last_error`]. Objects are opaque handles
//! released with their matching `*_free` function. Tensor data crosses the
//! boundary as raw little-endian element bytes: two per BF16 element, one
//! per FP8 element.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use splitzip::calibration::{build_histogram, select_codebook, CodebookMode, ExponentCodebook};
use splitzip::codec::{self, CodecConfig, PositionMode};
use splitzip::{container, pipeline, verify, ElementFormat, Error, ErrorClass, RawTensorStream};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Format = 4,
    Corrupt = 5,
    Domain = 6,
    Io = 7,
    VerifyFailed = 8,
    Panic = 9,
}

impl From<&Error> for SzStatus {
    fn from(e: &Error) -> Self {
        match e.class() {
            ErrorClass::Input => SzStatus::InvalidInput,
            ErrorClass::Config => SzStatus::Config,
            ErrorClass::Format => SzStatus::Format,
            ErrorClass::Corrupt => SzStatus::Corrupt,
            ErrorClass::Domain => SzStatus::Domain,
            ErrorClass::Io => SzStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SzFormat {
    Bf16 = 0,
    E5m2 = 1,
    E4m3 = 2,
}

impl From<ElementFormat> for SzFormat {
    fn from(f: ElementFormat) -> Self {
        match f {
            ElementFormat::Bf16 => SzFormat::Bf16,
            ElementFormat::E5m2 => SzFormat::E5m2,
            ElementFormat::E4m3 => SzFormat::E4m3,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SzMode {
    Explicit = 0,
    Sentinel = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SzPositions {
    ChunkRelative = 0,
    Absolute32 = 1,
}

/// Codec settings. Start from [`sz_config_default`]. Enumerated fields take
/// the values of [`SzFormat`], [`SzMode`] and [`SzPositions`]; anything else
/// is rejected with `SZ_STATUS_CONFIG`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SzConfig {
    pub format: u32,
    pub code_bits: u32,
    pub mode: u32,
    pub chunk_size: u32,
    pub positions: u32,
}

impl SzConfig {
    fn to_codec(self, book: Option<&SzCodebook>) -> Result<CodecConfig, (SzStatus, String)> {
        let positions = match self.positions {
            0 => PositionMode::ChunkRelative,
            1 => PositionMode::Absolute32,
            p => return Err(bad_enum("positions", p)),
        };
        let cfg = CodecConfig::new(element_format(self.format)?)
            .with_code_bits(self.code_bits)
            .with_mode(codebook_mode(self.mode)?)
            .with_chunk_size(self.chunk_size as usize)
            .with_positions(positions);
        Ok(match book {
            Some(b) => cfg.with_codebook(b.0.clone()),
            None => cfg,
        })
    }
}

fn bad_enum(what: &str, v: u32) -> (SzStatus, String) {
    (SzStatus::Config, format!("unknown {what} value {v}"))
}

fn element_format(v: u32) -> Result<ElementFormat, (SzStatus, String)> {
    u8::try_from(v)
        .ok()
        .and_then(ElementFormat::from_byte)
        .ok_or_else(|| bad_enum("format", v))
}

fn codebook_mode(v: u32) -> Result<CodebookMode, (SzStatus, String)> {
    u8::try_from(v)
        .ok()
        .and_then(CodebookMode::from_byte)
        .ok_or_else(|| bad_enum("mode", v))
}

/// Calibrated exponent codebook.
pub struct SzCodebook(ExponentCodebook);

/// Owned byte buffer returned by the library.
pub struct SzBuffer(Vec<u8>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F: FnOnce() -> Result<(), (SzStatus, String)>>(f: F) -> SzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SzStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SzStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SzStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(what: &str) -> (SzStatus, String) {
    (SzStatus::NullPointer, format!("{what} is null"))
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Result<&'a [u8], (SzStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null("data"));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn tensor(format: u32, data: *const u8, len: usize) -> Result<RawTensorStream, (SzStatus, String)> {
    RawTensorStream::from_bytes(element_format(format)?, bytes(data, len)?).map_err(lib_err)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (SzStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// 4-bit explicit codes, 1024-element chunks, chunk-relative positions.
/// `format` is not checked until the config is used.
#[no_mangle]
pub extern "C" fn sz_config_default(format: u32) -> SzConfig {
    SzConfig {
        format,
        code_bits: 4,
        mode: SzMode::Explicit as u32,
        chunk_size: codec::DEFAULT_CHUNK_SIZE as u32,
        positions: SzPositions::ChunkRelative as u32,
    }
}

/// Builds a codebook from `len` bytes of raw elements.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sz_calibrate(
    format: u32,
    data: *const u8,
    len: usize,
    code_bits: u32,
    mode: u32,
    out: *mut *mut SzCodebook,
) -> SzStatus {
    guard(|| {
        let s = tensor(format, data, len)?;
        let stats = build_histogram(&s).map_err(lib_err)?;
        let book = select_codebook(&stats, code_bits, codebook_mode(mode)?).map_err(lib_err)?;
        put(out, SzCodebook(book))
    })
}

/// Parses a serialized codebook record.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sz_codebook_from_bytes(data: *const u8, len: usize, out: *mut *mut SzCodebook) -> SzStatus {
    guard(|| {
        let book = ExponentCodebook::from_bytes(bytes(data, len)?).map_err(lib_err)?;
        put(out, SzCodebook(book))
    })
}

/// Serializes a codebook into a new buffer.
///
/// # Safety
/// `book` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sz_codebook_to_bytes(book: *const SzCodebook, out: *mut *mut SzBuffer) -> SzStatus {
    guard(|| {
        let book = book.as_ref().ok_or_else(|| null("codebook"))?;
        put(out, SzBuffer(book.0.to_bytes()))
    })
}

/// Number of exponents in the codebook, or 0 for a null handle.
///
/// # Safety
/// `book` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sz_codebook_entries(book: *const SzCodebook) -> usize {
    book.as_ref().map_or(0, |b| b.0.entries().len())
}

/// # Safety
/// `book` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sz_codebook_free(book: *mut SzCodebook) {
    if !book.is_null() {
        drop(Box::from_raw(book));
    }
}

/// Compresses raw element bytes into a container. A null `book` calibrates
/// on the input itself.
///
/// # Safety
/// `config` must be readable, `book` null or live, `data` `len` readable
/// bytes, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sz_compress(
    config: *const SzConfig,
    book: *const SzCodebook,
    data: *const u8,
    len: usize,
    out: *mut *mut SzBuffer,
) -> SzStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let s = tensor(cfg.format, data, len)?;
        let enc = codec::encode_quad(&s, &cfg.to_codec(book.as_ref())?).map_err(lib_err)?;
        put(out, SzBuffer(container::to_bytes(&enc).map_err(lib_err)?))
    })
}

/// Decompresses a container into raw element bytes and reports the format.
///
/// # Safety
/// `data` must point to `len` readable bytes; `format` and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sz_decompress(
    data: *const u8,
    len: usize,
    format: *mut SzFormat,
    out: *mut *mut SzBuffer,
) -> SzStatus {
    guard(|| {
        if format.is_null() {
            return Err(null("format"));
        }
        let enc = container::from_bytes(bytes(data, len)?).map_err(lib_err)?;
        let s = codec::decode(&enc).map_err(lib_err)?;
        *format = s.format().into();
        put(out, SzBuffer(s.to_bytes()))
    })
}

/// Round-trips the input through a container and compares bit for bit.
/// Returns `VerifyFailed` on any mismatch.
///
/// # Safety
/// Same as [`sz_compress`], without the output pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_verify(
    config: *const SzConfig,
    book: *const SzCodebook,
    data: *const u8,
    len: usize,
) -> SzStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let s = tensor(cfg.format, data, len)?;
        let r = verify::verify_roundtrip(&s, &cfg.to_codec(book.as_ref())?).map_err(lib_err)?;
        if r.ok {
            Ok(())
        } else {
            Err((
                SzStatus::VerifyFailed,
                r.error
                    .unwrap_or_else(|| format!("{} mismatches, first at {:?}", r.mismatch_count, r.first_mismatch_index)),
            ))
        }
    })
}

/// Checks a container against the original element bytes.
///
/// # Safety
/// Both pointer/length pairs must be readable.
#[no_mangle]
pub unsafe extern "C" fn sz_verify_container(
    format: u32,
    original: *const u8,
    original_len: usize,
    container_data: *const u8,
    container_len: usize,
) -> SzStatus {
    guard(|| {
        let s = tensor(format, original, original_len)?;
        let r = verify::verify_container_bytes(&s, bytes(container_data, container_len)?);
        if r.ok {
            Ok(())
        } else {
            Err((SzStatus::VerifyFailed, r.error.unwrap_or_else(|| "decoded data differs".into())))
        }
    })
}

/// `min(enc, dec) / ratio`, in the units of the throughputs.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sz_hiding_bandwidth(enc_throughput: f64, dec_throughput: f64, ratio: f64, out: *mut f64) -> SzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = pipeline::hiding_bandwidth(enc_throughput, dec_throughput, ratio).map_err(lib_err)?;
        Ok(())
    })
}

/// # Safety
/// `buf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sz_buffer_data(buf: *const SzBuffer) -> *const u8 {
    buf.as_ref().map_or(ptr::null(), |b| b.0.as_ptr())
}

/// # Safety
/// `buf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sz_buffer_len(buf: *const SzBuffer) -> usize {
    buf.as_ref().map_or(0, |b| b.0.len())
}

/// # Safety
/// `buf` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sz_buffer_free(buf: *mut SzBuffer) {
    if !buf.is_null() {
        drop(Box::from_raw(buf));
    }
}
