#include <math.h>
#include <stdio.h>
#include <string.h>

#include "apcharge.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "line %d: %s\n", __LINE__, #cond);   \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(void) {
    ApcConfig *cfg = NULL;
    CHECK(apc_config_from_toml("[experiment]\nscenario = \"unlimited-energy\"\n", &cfg) == APC_STATUS_OK);

    ApcEnv *env = NULL;
    CHECK(apc_env_new(cfg, 7, &env) == APC_STATUS_OK);
    ApcPolicy *greedy = NULL;
    CHECK(apc_policy_new(cfg, env, APC_AGENT_GREEDY, 7, &greedy) == APC_STATUS_OK);

    double efficiency = 0.0;
    int served = 0;
    for (int t = 0; t < 200; t++) {
        ApcSlotOutcome out;
        CHECK(apc_policy_step(greedy, env, &out) == APC_STATUS_OK);
        CHECK(out.power == 200.0);
        if (out.all_devices && out.user_satisfied) {
            CHECK(fabs(out.efficiency - 5.0) < 1e-12);
            served++;
        }
        efficiency += out.efficiency;
    }
    CHECK(served > 0);

    ApcConfig *bad = NULL;
    CHECK(apc_config_from_toml("[model]\nmax_power = -1.0\n", &bad) == APC_STATUS_CONFIG);
    char msg[256];
    CHECK(apc_last_error_message(msg, sizeof msg) > 0);
    CHECK(strstr(msg, "max_power") != NULL);

    apc_policy_free(greedy);
    apc_env_free(env);
    apc_config_free(cfg);
    printf("ok %d %.3f\n", served, efficiency / 200.0);
    return 0;
}
