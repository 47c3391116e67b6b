#include <math.h>
#include <stdio.h>
#include <string.h>

#include "semianon.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        SemianonStatus s_ = (call);                                        \
        if (s_ != SEMIANON_STATUS_OK) {                                    \
            fprintf(stderr, "%s: %d %s\n", #call, s_, semianon_last_error()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    SemianonGame *base = NULL, *game = NULL;
    SemianonKernel *kernel = NULL;
    double beta = 0.0, rate = 0.0;
    size_t states = 0;

    CHECK(semianon_game_congestion3(7, 7, 1, 1.0 / 3.0, 0.0, &base));
    CHECK(semianon_calibrate_beta(base, SEMIANON_DYNAMIC_MODIFIED, 0.98, &beta));
    CHECK(semianon_game_with_beta(base, beta, &game));
    CHECK(semianon_kernel_build(game, SEMIANON_DYNAMIC_MODIFIED, &kernel));
    CHECK(semianon_kernel_info(kernel, &states, &rate));

    double pi[64], mu[64];
    if (states != 64) return 2;
    CHECK(semianon_kernel_stationary(kernel, pi, 64));
    for (size_t i = 0; i < 64; i++) mu[i] = i == 0 ? 1.0 : 0.0;
    CHECK(semianon_kernel_evolve(kernel, mu, 1e5, mu, 64));
    double tv = 0.0;
    for (size_t i = 0; i < 64; i++) tv += fabs(mu[i] - pi[i]);
    if (tv > 1e-9) return 3;

    if (semianon_kernel_stationary(kernel, pi, 10) != SEMIANON_STATUS_BUFFER_TOO_SMALL) return 4;
    if (strstr(semianon_last_error(), "64 needed") == NULL) return 5;

    printf("beta %.4f states %zu rate %.3f\n", beta, states, rate);
    semianon_kernel_free(kernel);
    semianon_game_free(game);
    semianon_game_free(base);
    return 0;
}
