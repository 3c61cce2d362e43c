/* Tracks one vehicle on a straight lane through the C API.
 *
 *   cargo build --release -p roadlmb-ffi
 *   cc crates/ffi/examples/c/demo.c -Icrates/ffi/include \
 *      target/release/libroadlmb_ffi.a -lpthread -ldl -lm -o demo
 */
#include <stdio.h>

#include "roadlmb.h"

static const char *MAP =
    "{\"lanes\": [{\"id_prefix\": 1, \"points\": [[0, 0], [200, 0]]}]}";

int main(void) {
    RlmbMap *map = NULL;
    RlmbFilter *filter = NULL;
    if (rlmb_map_from_json(MAP, &map) != RLMB_STATUS_OK ||
        rlmb_filter_new(NULL, NULL, map, &filter) != RLMB_STATUS_OK) {
        fprintf(stderr, "setup failed: %s\n", rlmb_last_error());
        return 1;
    }
    rlmb_map_free(map);

    RlmbEstimate est[8];
    size_t n = 0;
    for (uint64_t k = 0; k < 30; ++k) {
        double x = 10.0 + 1.0 * (double)k, y = 0.0;
        if (rlmb_filter_step(filter, k, 0, &x, &y, 1, est, 8, &n) != RLMB_STATUS_OK) {
            fprintf(stderr, "step %llu: %s\n", (unsigned long long)k, rlmb_last_error());
            return 1;
        }
    }
    for (size_t i = 0; i < n; ++i) {
        printf("track %llu:%u r=%.3f x=%.2f y=%.2f v=%.2f\n", (unsigned long long)est[i].label_time,
               est[i].label_index, est[i].existence, est[i].x, est[i].y, est[i].v);
    }
    rlmb_filter_free(filter);
    return n == 1 ? 0 : 1;
}
