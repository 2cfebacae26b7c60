#include <math.h>
#include <stdio.h>
#include "iclcam.h"

int main(void) {
    IclConfig *cfg = icl_config_default();
    if (icl_config_set_gamma(cfg, -1.0) != ICL_STATUS_VALIDATION) return 1;
    if (icl_last_error_message() == NULL) return 2;

    double q[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    double n[3] = {0, 0, 1};
    double s[9], k[9];
    if (icl_build_gains(q, q, 1.0, n, s, k) != ICL_STATUS_OK) return 3;
    if (fabs(s[8] - sqrt(2.0)) > 1e-12 || fabs(s[0] - 1.0) > 1e-12) return 4;

    IclConfig *bad = NULL;
    if (icl_config_from_json("{\"simulation\": {\"t_end\": 1}}", &bad) != ICL_STATUS_VALIDATION) return 5;
    if (bad != NULL) return 6;

    icl_config_free(cfg);
    printf("ok\n");
    return 0;
}
