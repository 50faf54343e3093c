#include <stdio.h>
#include <stdlib.h>

#include "qweyl.h"

int main(void) {
    qweyl_hamiltonian *h = NULL;
    if (qweyl_hamiltonian_new(8, 0.01, QWEYL_MODE_PAPER, QWEYL_MODEL_SUBSTITUTED, &h) != QWEYL_STATUS_OK) {
        fprintf(stderr, "%s\n", qweyl_last_error());
        return 1;
    }
    const uint32_t ground[3] = {0, 0, 0};
    double re, im;
    qweyl_hamiltonian_element(h, ground, ground, &re, &im);
    printf("dim %zu, <0|H|0> = %.6f %+.6fi\n", qweyl_hamiltonian_dim(h), re, im);

    qweyl_trajectory *t = NULL;
    if (qweyl_evolve(h, ground, 1.0, 1e-3, QWEYL_METHOD_EXPM, &t) != QWEYL_STATUS_OK) {
        fprintf(stderr, "%s\n", qweyl_last_error());
        qweyl_hamiltonian_free(h);
        return 1;
    }
    size_t n = qweyl_trajectory_len(t);
    double *p = malloc(n * sizeof *p);
    qweyl_trajectory_norms(t, NULL, p, n);
    printf("P(1) = %.10f\n", p[n - 1]);
    free(p);
    qweyl_trajectory_free(t);
    qweyl_hamiltonian_free(h);
    return 0;
}
