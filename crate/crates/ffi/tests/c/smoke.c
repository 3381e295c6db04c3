#include <math.h>
#include <stdio.h>
#include "hcp.h"

#define CHECK(c) do { if (!(c)) { fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #c, hcp_last_error() ? hcp_last_error() : ""); return 1; } } while (0)

int main(void) {
    HcpMeasure *m = NULL, *next = NULL;
    double total = 0.0, g = 0.0;
    CHECK(hcp_measure_dirac(1.0, 40.0, &m) == HCP_STATUS_OK);
    CHECK(hcp_measure_pushforward(m, 1.0, 2.0, &next) == HCP_STATUS_OK);
    CHECK(hcp_measure_total(next, &total) == HCP_STATUS_OK);
    CHECK(fabs(total - 1.0) < 1e-12);
    CHECK(hcp_measure_dirac(1.0, 40.0, NULL) == HCP_STATUS_NULL_POINTER);
    CHECK(hcp_last_error() != NULL);
    hcp_measure_free(next);
    hcp_measure_free(m);

    HcpLimitLaw *law = NULL;
    CHECK(hcp_limit_law_new(1.0, 0.0, &law) == HCP_STATUS_OK);
    CHECK(fabs(hcp_limit_law_density(law, 2.0) - 0.5) < 1e-9);
    hcp_limit_law_free(law);
    CHECK(hcp_g_infinity(1.0, 1.0, &g) == HCP_STATUS_OK);
    printf("hcp %s g(1)=%.7f\n", hcp_version(), g);
    return 0;
}
