#include <math.h>
#include <stdio.h>
#include "trialmon.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (%s)\n", #cond, trialmon_last_error()); return 1; } } while (0)

int main(void) {
    TrialmonRule *rule = NULL;
    CHECK(trialmon_rule_default(30, &rule) == TRIALMON_STATUS_OK);

    int32_t bounds[30];
    CHECK(trialmon_boundary(rule, bounds, 30) == TRIALMON_STATUS_OK);
    CHECK(bounds[0] == -1);
    CHECK(bounds[2] == 3);

    double p = 0.0;
    CHECK(trialmon_stop_prob(rule, 3, 0.6, &p) == TRIALMON_STATUS_OK);
    CHECK(fabs(p - 0.064) < 1e-12);
    CHECK(trialmon_stop_prob(NULL, 3, 0.6, &p) == TRIALMON_STATUS_NULL_POINTER);
    trialmon_rule_free(rule);

    uint64_t n = 0;
    CHECK(trialmon_sample_size(0.9, 0.7, 0.9, 0.05, 0.05, &n) == TRIALMON_STATUS_OK);
    CHECK(n == 39);

    printf("ok %s\n", trialmon_version());
    return 0;
}
