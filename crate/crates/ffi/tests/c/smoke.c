#include <math.h>
#include <stdio.h>
#include <string.h>

#include "gsma.h"

/* E = diag(1, 0), A = [[0, 1], [1, -2]]: the only finite eigenvalue is 0.5. */
int main(void) {
    const double e[4] = {1.0, 0.0, 0.0, 0.0};
    const double a[4] = {0.0, 1.0, 1.0, -2.0};
    GsmaPencil *pencil = NULL;
    if (gsma_pencil_from_dense(2, e, a, &pencil) != GSMA_STATUS_OK) {
        fprintf(stderr, "pencil: %s\n", gsma_last_error());
        return 1;
    }
    GsmaSolution *solution = NULL;
    const char *spec = "{\"algorithm\": 5, \"initial\": {\"kind\": \"canonical\", \"n\": 1}}";
    if (gsma_solve(pencil, spec, &solution) != GSMA_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", gsma_last_error());
        return 2;
    }
    double re = 0.0, im = 0.0;
    double v[4];
    if (gsma_solution_mode_count(solution) != 1 || gsma_solution_eigenvalue(solution, 0, &re, &im) != GSMA_STATUS_OK ||
        gsma_solution_right_vector(solution, 0, v, 4) != GSMA_STATUS_OK) {
        return 3;
    }
    if (fabs(re - 0.5) > 1e-12 || fabs(im) > 1e-12 || fabs(v[0] - 2.0 * v[2]) > 1e-12) {
        fprintf(stderr, "lambda = %g%+gi\n", re, im);
        return 4;
    }
    if (gsma_solution_eigenvalue(solution, 5, &re, &im) != GSMA_STATUS_INDEX_OUT_OF_RANGE || gsma_last_error() == NULL) {
        return 5;
    }
    printf("%s\n", gsma_solution_report_json(solution));
    gsma_solution_free(solution);
    gsma_pencil_free(pencil);
    return 0;
}
