/* SPDX-License-Identifier: Apache-2.0 */

#ifndef SPLITZIP_H
#define SPLITZIP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SzStatus {
  SZ_STATUS_OK = 0,
  SZ_STATUS_NULL_POINTER = 1,
  SZ_STATUS_INVALID_INPUT = 2,
  SZ_STATUS_CONFIG = 3,
  SZ_STATUS_FORMAT = 4,
  SZ_STATUS_CORRUPT = 5,
  SZ_STATUS_DOMAIN = 6,
  SZ_STATUS_IO = 7,
  SZ_STATUS_VERIFY_FAILED = 8,
  SZ_STATUS_PANIC = 9,
} SzStatus;

typedef enum SzFormat {
  SZ_FORMAT_BF16 = 0,
  SZ_FORMAT_E5M2 = 1,
  SZ_FORMAT_E4M3 = 2,
} SzFormat;

typedef enum SzMode {
  SZ_MODE_EXPLICIT = 0,
  SZ_MODE_SENTINEL = 1,
} SzMode;

typedef enum SzPositions {
  SZ_POSITIONS_CHUNK_RELATIVE = 0,
  SZ_POSITIONS_ABSOLUTE32 = 1,
} SzPositions;

/**
 * Owned byte buffer returned by the library.
 */
typedef struct SzBuffer SzBuffer;

/**
 * Calibrated exponent codebook.
 */
typedef struct SzCodebook SzCodebook;

/**
 * Codec settings. Start from [`sz_config_default`]. Enumerated fields take
 * the values of [`SzFormat`], [`SzMode`] and [`SzPositions`]; anything else
 * is rejected with `SZ_STATUS_CONFIG`.
 */
typedef struct SzConfig {
  uint32_t format;
  uint32_t code_bits;
  uint32_t mode;
  uint32_t chunk_size;
  uint32_t positions;
} SzConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *sz_last_error(void);

/**
 * 4-bit explicit codes, 1024-element chunks, chunk-relative positions.
 * `format` is not checked until the config is used.
 */
struct SzConfig sz_config_default(uint32_t format);

/**
 * Builds a codebook from `len` bytes of raw elements.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum SzStatus sz_calibrate(uint32_t format,
                           const uint8_t *data,
                           size_t len,
                           uint32_t code_bits,
                           uint32_t mode,
                           struct SzCodebook **out);

/**
 * Parses a serialized codebook record.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum SzStatus sz_codebook_from_bytes(const uint8_t *data, size_t len, struct SzCodebook **out);

/**
 * Serializes a codebook into a new buffer.
 *
 * # Safety
 * `book` must be a live handle; `out` must be writable.
 */
enum SzStatus sz_codebook_to_bytes(const struct SzCodebook *book, struct SzBuffer **out);

/**
 * Number of exponents in the codebook, or 0 for a null handle.
 *
 * # Safety
 * `book` must be null or a live handle.
 */
size_t sz_codebook_entries(const struct SzCodebook *book);

/**
 * # Safety
 * `book` must be null or a handle not yet freed.
 */
void sz_codebook_free(struct SzCodebook *book);

/**
 * Compresses raw element bytes into a container. A null `book` calibrates
 * on the input itself.
 *
 * # Safety
 * `config` must be readable, `book` null or live, `data` `len` readable
 * bytes, `out` writable.
 */
enum SzStatus sz_compress(const struct SzConfig *config,
                          const struct SzCodebook *book,
                          const uint8_t *data,
                          size_t len,
                          struct SzBuffer **out);

/**
 * Decompresses a container into raw element bytes and reports the format.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `format` and `out` writable.
 */
enum SzStatus sz_decompress(const uint8_t *data,
                            size_t len,
                            enum SzFormat *format,
                            struct SzBuffer **out);

/**
 * Round-trips the input through a container and compares bit for bit.
 * Returns `VerifyFailed` on any mismatch.
 *
 * # Safety
 * Same as [`sz_compress`], without the output pointer.
 */
enum SzStatus sz_verify(const struct SzConfig *config,
                        const struct SzCodebook *book,
                        const uint8_t *data,
                        size_t len);

/**
 * Checks a container against the original element bytes.
 *
 * # Safety
 * Both pointer/length pairs must be readable.
 */
enum SzStatus sz_verify_container(uint32_t format,
                                  const uint8_t *original,
                                  size_t original_len,
                                  const uint8_t *container_data,
                                  size_t container_len);

/**
 * `min(enc, dec) / ratio`, in the units of the throughputs.
 *
 * # Safety
 * `out` must be writable.
 */
enum SzStatus sz_hiding_bandwidth(double enc_throughput,
                                  double dec_throughput,
                                  double ratio,
                                  double *out);

/**
 * # Safety
 * `buf` must be null or a live handle.
 */
const uint8_t *sz_buffer_data(const struct SzBuffer *buf);

/**
 * # Safety
 * `buf` must be null or a live handle.
 */
size_t sz_buffer_len(const struct SzBuffer *buf);

/**
 * # Safety
 * `buf` must be null or a handle not yet freed.
 */
void sz_buffer_free(struct SzBuffer *buf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLITZIP_H */
