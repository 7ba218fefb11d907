/* SPDX-License-Identifier: Apache-2.0 */
#include <stdio.h>
#include <string.h>

#include "splitzip.h"

int main(void) {
    uint8_t data[2 * 3000];
    for (int i = 0; i < 3000; i++) {
        uint16_t e = (i % 50 == 7) ? 0x05 : (uint16_t)(0x7D + i % 4);
        uint16_t w = (uint16_t)((e << 7) | (i & 0x7F));
        data[2 * i] = (uint8_t)(w & 0xFF);
        data[2 * i + 1] = (uint8_t)(w >> 8);
    }
    SzConfig cfg = sz_config_default(SZ_FORMAT_BF16);
    cfg.mode = SZ_MODE_SENTINEL;
    SzBuffer *packed = NULL;
    if (sz_compress(&cfg, NULL, data, sizeof data, &packed) != SZ_STATUS_OK) {
        fprintf(stderr, "compress: %s\n", sz_last_error());
        return 1;
    }
    SzFormat fmt;
    SzBuffer *raw = NULL;
    if (sz_decompress(sz_buffer_data(packed), sz_buffer_len(packed), &fmt, &raw) != SZ_STATUS_OK) {
        fprintf(stderr, "decompress: %s\n", sz_last_error());
        return 1;
    }
    int same = fmt == SZ_FORMAT_BF16 && sz_buffer_len(raw) == sizeof data &&
               memcmp(sz_buffer_data(raw), data, sizeof data) == 0;
    printf("%zu -> %zu bytes, roundtrip %s\n", sizeof data, sz_buffer_len(packed), same ? "ok" : "MISMATCH");
    sz_buffer_free(packed);
    sz_buffer_free(raw);

    if (sz_decompress((const uint8_t *)"SPLZ", 4, &fmt, &raw) != SZ_STATUS_FORMAT) {
        return 1;
    }
    return same ? 0 : 1;
}
