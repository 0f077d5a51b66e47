/* protoscope C API: dataset-free evaluation of one-hot softmax classifiers.
 *
 * Every object is an opaque handle created by a ps_*_new-style call and
 * released with its matching ps_*_free. Functions return PS_OK or an error
 * code; ps_last_error() describes the most recent failure on the calling
 * thread. Handles are not thread-safe individually, but independent handles
 * may be used from different threads concurrently.
 */
#ifndef PROTOSCOPE_H
#define PROTOSCOPE_H

#include <stdint.h>

#if defined(_WIN32)
#if defined(PS_BUILD_SHARED)
#define PS_API __declspec(dllexport)
#else
#define PS_API __declspec(dllimport)
#endif
#else
#define PS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ps_status {
    PS_OK = 0,
    PS_ERR_CONFIG = 2,     /* invalid parameters, specs, file contents */
    PS_ERR_TRAINING = 3,   /* training aborted (non-finite loss or params) */
    PS_ERR_EVALUATION = 4, /* too few usable prototypes / undefined similarity */
    PS_ERR_IO = 5,         /* file open/read/write failure */
    PS_ERR_USAGE = 6       /* null handles, out-of-range indices */
} ps_status;

typedef struct ps_dataset ps_dataset;
typedef struct ps_model ps_model;
typedef struct ps_history ps_history;
typedef struct ps_protoset ps_protoset;
typedef struct ps_report ps_report;

typedef struct ps_train_config {
    int32_t epochs;
    double lr_phase1;
    double lr_phase2;
    int32_t phase_split; /* epoch index where lr_phase2 takes over */
    int32_t batch_size;
    uint64_t seed;
    int32_t shuffle; /* nonzero: reshuffle every epoch */
} ps_train_config;

typedef struct ps_proto_config {
    double delta_loss; /* stop when -log p_target <= delta_loss */
    double eta;        /* step length of the normalized gradient update */
    int32_t max_iters;
    int32_t init; /* 0: standard normal, 1: uniform [0,1) */
    uint64_t seed;
} ps_proto_config;

typedef enum ps_report_field {
    PS_FIELD_H_W = 0,
    PS_FIELD_MEAN_ANGLE_DEG,
    PS_FIELD_M_IN_MEAN,
    PS_FIELD_M_IN_STD,
    PS_FIELD_BT_COSSIM_MEAN,
    PS_FIELD_BT_COSSIM_STD,
    PS_FIELD_M_BT,
    PS_FIELD_UPPER_BOUND,         /* m_in_mean - 2*std, unclamped */
    PS_FIELD_LOWER_BOUND,         /* 1 - (cs_bt + 2*std), unclamped */
    PS_FIELD_UPPER_BOUND_CLAMPED, /* clamped to [0,1] */
    PS_FIELD_LOWER_BOUND_CLAMPED,
    PS_FIELD_BOUNDS_CLAMPED, /* 1.0 when any bound was clamped */
    PS_FIELD_EXCLUDED_ZERO_FEATURES,
    PS_FIELD_EXCLUDED_UNCONVERGED,
    PS_FIELD_FRACTION, /* PS_ERR_USAGE when never set */
    PS_FIELD_ACCURACY  /* PS_ERR_USAGE when never set */
} ps_report_field;

PS_API const char* ps_version(void);
/* message for the last failure on this thread; empty string if none */
PS_API const char* ps_last_error(void);
PS_API void ps_string_free(char* text);

/* ---- datasets ---- */
PS_API ps_status ps_dataset_gen_blobs(int32_t num_classes, int32_t per_class, int32_t input_dim,
                                      double separation, double spread, uint64_t seed,
                                      ps_dataset** out);
PS_API ps_status ps_dataset_load_csv(const char* path, int32_t has_header, ps_dataset** out);
PS_API ps_status ps_dataset_save_csv(const ps_dataset* ds, const char* path);
PS_API ps_status ps_dataset_partition_fraction(const ps_dataset* ds, double fraction,
                                               uint64_t seed, ps_dataset** out);
PS_API ps_status ps_dataset_split_train_test(const ps_dataset* ds, double test_fraction,
                                             uint64_t seed, ps_dataset** train_out,
                                             ps_dataset** test_out);
PS_API int32_t ps_dataset_size(const ps_dataset* ds);
PS_API int32_t ps_dataset_input_dim(const ps_dataset* ds);
PS_API int32_t ps_dataset_num_classes(const ps_dataset* ds);
/* label as it appeared in the source file for contiguous class index cls */
PS_API ps_status ps_dataset_original_label(const ps_dataset* ds, int32_t cls, int64_t* out);
PS_API void ps_dataset_free(ps_dataset* ds);

/* number of dataset files opened by this process (dataless-contract probe) */
PS_API uint64_t ps_io_dataset_reads(void);

/* ---- models ---- */
/* hidden_spec uses the descriptor grammar, e.g. "mlp:16,8" or
 * "conv:c4k3s1+mlp:16"; "mlp:" means no hidden layer. */
PS_API ps_status ps_model_build(int32_t input_dim, int32_t feature_dim, int32_t num_classes,
                                const char* hidden_spec, uint64_t seed, ps_model** out);
PS_API ps_status ps_model_load(const char* path, ps_model** out);
PS_API ps_status ps_model_save(const ps_model* model, const char* path);
PS_API int32_t ps_model_input_dim(const ps_model* model);
PS_API int32_t ps_model_feature_dim(const ps_model* model);
PS_API int32_t ps_model_num_classes(const ps_model* model);
/* 16 hex digits + NUL into buf (size >= 17) */
PS_API ps_status ps_model_hash(const ps_model* model, char* buf, int32_t buf_len);
/* probs_out must hold num_classes doubles */
PS_API ps_status ps_model_forward(const ps_model* model, const double* x, int32_t x_len,
                                  double* probs_out);
/* features_out must hold feature_dim doubles */
PS_API ps_status ps_model_features(const ps_model* model, const double* x, int32_t x_len,
                                   double* features_out);
PS_API ps_status ps_model_weight_orthogonality(const ps_model* model, double* h_w,
                                               double* mean_angle_deg);
PS_API ps_status ps_model_train(ps_model* model, const ps_dataset* ds,
                                const ps_train_config* cfg, ps_history** history_out);
PS_API ps_status ps_model_test_accuracy(const ps_model* model, const ps_dataset* ds, double* out);
PS_API void ps_model_free(ps_model* model);

PS_API void ps_train_config_default(ps_train_config* cfg);
PS_API void ps_proto_config_default(ps_proto_config* cfg);

/* ---- training history ---- */
PS_API int32_t ps_history_epochs(const ps_history* history);
PS_API ps_status ps_history_loss(const ps_history* history, int32_t epoch, double* out);
PS_API ps_status ps_history_accuracy(const ps_history* history, int32_t epoch, double* out);
PS_API ps_status ps_history_save_csv(const ps_history* history, const char* path);
PS_API void ps_history_free(ps_history* history);

/* ---- prototypes ---- */
PS_API ps_status ps_generate_prototypes(const ps_model* model, const ps_proto_config* cfg,
                                        ps_protoset** out);
PS_API int32_t ps_protoset_count(const ps_protoset* protos); /* k + k(k-1) */
PS_API int32_t ps_protoset_converged_count(const ps_protoset* protos);
/* origin_out is -1 for seed prototypes */
PS_API ps_status ps_protoset_info(const ps_protoset* protos, int32_t idx, int32_t* target_out,
                                  int32_t* origin_out, int32_t* converged_out,
                                  double* final_loss_out, int32_t* iterations_out);
PS_API ps_status ps_protoset_vector(const ps_protoset* protos, int32_t idx, double* out,
                                    int32_t out_len);
PS_API ps_status ps_protoset_save_json(const ps_protoset* protos, const char* path);
PS_API ps_status ps_protoset_load_json(const char* path, ps_protoset** out);
PS_API void ps_protoset_free(ps_protoset* protos);

/* ---- evaluation ---- */
/* bounds from already-computed statistics */
PS_API ps_status ps_accuracy_bounds(double m_in_mean, double m_in_std, double bt_cs_mean,
                                    double bt_cs_std, double* upper_out, double* lower_out);
/* dataset-free evaluation: prototype features -> metrics -> bounds */
PS_API ps_status ps_evaluate(const ps_model* model, const ps_protoset* protos, ps_report** out);
/* prototype generation + evaluation in one call */
PS_API ps_status ps_evaluate_dataless(const ps_model* model, const ps_proto_config* cfg,
                                      ps_report** out);
PS_API ps_status ps_report_value(const ps_report* report, ps_report_field field, double* out);
PS_API ps_status ps_report_set_fraction(ps_report* report, double fraction);
PS_API ps_status ps_report_set_accuracy(ps_report* report, double accuracy);
/* caller frees with ps_string_free */
PS_API ps_status ps_report_to_json(const ps_report* report, char** out);
PS_API ps_status ps_report_to_csv(const ps_report* report, int32_t with_header, char** out);
PS_API ps_status ps_report_save_json(const ps_report* report, const char* path);
PS_API ps_status ps_report_save_csv(const ps_report* report, const char* path);
PS_API void ps_report_free(ps_report* report);

#ifdef __cplusplus
}
#endif

#endif /* PROTOSCOPE_H */
