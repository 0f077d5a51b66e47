/* Compiled as C99: proves the public header works from plain C. */
#include <protoscope.h>

#include <stdio.h>
#include <string.h>

int main(void) {
    if (strcmp(ps_version(), "0.1.0") != 0) {
        fprintf(stderr, "unexpected version %s\n", ps_version());
        return 1;
    }

    ps_dataset* ds = NULL;
    if (ps_dataset_gen_blobs(2, 10, 3, 8.0, 0.5, 1, &ds) != PS_OK) {
        fprintf(stderr, "gen_blobs failed: %s\n", ps_last_error());
        return 1;
    }
    if (ps_dataset_size(ds) != 20) {
        fprintf(stderr, "wrong dataset size\n");
        return 1;
    }

    ps_model* model = NULL;
    if (ps_model_build(3, 8, 2, "mlp:4", 2, &model) != PS_OK) {
        fprintf(stderr, "model_build failed: %s\n", ps_last_error());
        return 1;
    }

    ps_train_config cfg;
    ps_train_config_default(&cfg);
    cfg.epochs = 5;
    cfg.phase_split = 2;
    if (ps_model_train(model, ds, &cfg, NULL) != PS_OK) {
        fprintf(stderr, "train failed: %s\n", ps_last_error());
        return 1;
    }

    double upper = 0.0, lower = 0.0;
    if (ps_accuracy_bounds(0.9, 0.01, 0.3, 0.05, &upper, &lower) != PS_OK) {
        return 1;
    }

    ps_model_free(model);
    ps_dataset_free(ds);
    printf("c header check ok\n");
    return 0;
}
