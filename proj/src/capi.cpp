#include "protoscope.h"

#include <cstring>
#include <fstream>
#include <string>

#include "dataset.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "protogen.hpp"
#include "trainer.hpp"

using namespace protoscope;

struct ps_dataset {
    LabeledDataset ds;
};
struct ps_model {
    Model model;
};
struct ps_history {
    TrainHistory history;
};
struct ps_protoset {
    PrototypeSet set;
};
struct ps_report {
    MetricReport report;
};

namespace {

constexpr const char* kVersion = "0.1.0";

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

// Maps the library exceptions onto the C status codes.
template <typename Fn>
ps_status guarded(Fn&& fn) {
    try {
        fn();
        return PS_OK;
    } catch (const TrainingError& e) {
        set_error(e.what());
        return PS_ERR_TRAINING;
    } catch (const EvaluationError& e) {
        set_error(e.what());
        return PS_ERR_EVALUATION;
    } catch (const IoError& e) {
        set_error(e.what());
        return PS_ERR_IO;
    } catch (const UsageError& e) {
        set_error(e.what());
        return PS_ERR_USAGE;
    } catch (const Error& e) {
        // ConfigError, DimensionError, ParseError, FormatError, NumericError
        set_error(e.what());
        return PS_ERR_CONFIG;
    } catch (const std::exception& e) {
        set_error(e.what());
        return PS_ERR_CONFIG;
    }
}

ps_status require_args(bool ok) {
    if (!ok) set_error("null or invalid argument");
    return ok ? PS_OK : PS_ERR_USAGE;
}

TrainConfig to_core(const ps_train_config& cfg) {
    TrainConfig out;
    if (cfg.epochs < 0) throw ConfigError("train config: epochs must be >= 0");
    if (cfg.phase_split < 0) throw ConfigError("train config: phase_split must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    out.epochs = static_cast<std::size_t>(cfg.epochs);
    out.lr_phase1 = cfg.lr_phase1;
    out.lr_phase2 = cfg.lr_phase2;
    out.phase_split = static_cast<std::size_t>(cfg.phase_split);
    out.batch_size = static_cast<std::size_t>(cfg.batch_size);
    out.seed = cfg.seed;
    out.shuffle = cfg.shuffle != 0;
    return out;
}

ProtoConfig to_core(const ps_proto_config& cfg) {
    ProtoConfig out;
    if (cfg.max_iters < 1) throw ConfigError("proto config: max_iters must be >= 1");
    out.delta_loss = cfg.delta_loss;
    out.eta = cfg.eta;
    out.max_iters = static_cast<std::size_t>(cfg.max_iters);
    if (cfg.init == 0) {
        out.init = InitDistribution::kStandardNormal;
    } else if (cfg.init == 1) {
        out.init = InitDistribution::kUniform01;
    } else {
        throw ConfigError("proto config: init must be 0 (normal) or 1 (uniform01)");
    }
    out.seed = cfg.seed;
    return out;
}

char* dup_string(const std::string& text) {
    char* out = new char[text.size() + 1];
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace

extern "C" {

const char* ps_version(void) { return kVersion; }

const char* ps_last_error(void) { return g_last_error.c_str(); }

void ps_string_free(char* text) { delete[] text; }

/* ---- datasets ---- */

ps_status ps_dataset_gen_blobs(int32_t num_classes, int32_t per_class, int32_t input_dim,
                               double separation, double spread, uint64_t seed,
                               ps_dataset** out) {
    if (require_args(out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] {
        if (num_classes < 0 || per_class < 0 || input_dim < 0) {
            throw ConfigError("gen_blobs: sizes must be nonnegative");
        }
        *out = new ps_dataset{gen_blobs(static_cast<std::size_t>(num_classes),
                                        static_cast<std::size_t>(per_class),
                                        static_cast<std::size_t>(input_dim), separation, spread,
                                        seed)};
    });
}

ps_status ps_dataset_load_csv(const char* path, int32_t has_header, ps_dataset** out) {
    if (require_args(path != nullptr && out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { *out = new ps_dataset{load_csv(path, has_header != 0)}; });
}

ps_status ps_dataset_save_csv(const ps_dataset* ds, const char* path) {
    if (require_args(ds != nullptr && path != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { save_csv(ds->ds, path); });
}

ps_status ps_dataset_partition_fraction(const ps_dataset* ds, double fraction, uint64_t seed,
                                        ps_dataset** out) {
    if (require_args(ds != nullptr && out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { *out = new ps_dataset{partition_fraction(ds->ds, fraction, seed)}; });
}

ps_status ps_dataset_split_train_test(const ps_dataset* ds, double test_fraction, uint64_t seed,
                                      ps_dataset** train_out, ps_dataset** test_out) {
    if (require_args(ds != nullptr && train_out != nullptr && test_out != nullptr)) {
        return PS_ERR_USAGE;
    }
    return guarded([&] {
        auto [train_ds, test_ds] = split_train_test(ds->ds, test_fraction, seed);
        *train_out = new ps_dataset{std::move(train_ds)};
        *test_out = new ps_dataset{std::move(test_ds)};
    });
}

int32_t ps_dataset_size(const ps_dataset* ds) {
    return ds ? static_cast<int32_t>(ds->ds.size()) : 0;
}

int32_t ps_dataset_input_dim(const ps_dataset* ds) {
    return ds ? static_cast<int32_t>(ds->ds.input_dim()) : 0;
}

int32_t ps_dataset_num_classes(const ps_dataset* ds) {
    return ds ? static_cast<int32_t>(ds->ds.num_classes()) : 0;
}

ps_status ps_dataset_original_label(const ps_dataset* ds, int32_t cls, int64_t* out) {
    if (require_args(ds != nullptr && out != nullptr && cls >= 0 &&
                     cls < static_cast<int32_t>(ds->ds.num_classes()))) {
        return PS_ERR_USAGE;
    }
    *out = ds->ds.original_label(static_cast<std::size_t>(cls));
    return PS_OK;
}

void ps_dataset_free(ps_dataset* ds) { delete ds; }

uint64_t ps_io_dataset_reads(void) { return dataset_file_reads(); }

/* ---- models ---- */

ps_status ps_model_build(int32_t input_dim, int32_t feature_dim, int32_t num_classes,
                         const char* hidden_spec, uint64_t seed, ps_model** out) {
    if (require_args(out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] {
        if (input_dim < 0 || feature_dim < 0 || num_classes < 0) {
            throw ConfigError("model spec: sizes must be nonnegative");
        }
        NetworkSpec spec;
        spec.input_dim = static_cast<std::size_t>(input_dim);
        spec.feature_dim = static_cast<std::size_t>(feature_dim);
        spec.num_classes = static_cast<std::size_t>(num_classes);
        spec.hidden = parse_hidden_spec(hidden_spec ? hidden_spec : "mlp:");
        spec.seed = seed;
        *out = new ps_model{build_model(spec)};
    });
}

ps_status ps_model_load(const char* path, ps_model** out) {
    if (require_args(path != nullptr && out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { *out = new ps_model{load_model(path)}; });
}

ps_status ps_model_save(const ps_model* model, const char* path) {
    if (require_args(model != nullptr && path != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { save_model(model->model, path); });
}

int32_t ps_model_input_dim(const ps_model* model) {
    return model ? static_cast<int32_t>(model->model.spec().input_dim) : 0;
}

int32_t ps_model_feature_dim(const ps_model* model) {
    return model ? static_cast<int32_t>(model->model.spec().feature_dim) : 0;
}

int32_t ps_model_num_classes(const ps_model* model) {
    return model ? static_cast<int32_t>(model->model.spec().num_classes) : 0;
}

ps_status ps_model_hash(const ps_model* model, char* buf, int32_t buf_len) {
    if (require_args(model != nullptr && buf != nullptr && buf_len >= 17)) return PS_ERR_USAGE;
    return guarded([&] {
        const std::string hash = model->model.hash();
        std::memcpy(buf, hash.c_str(), hash.size() + 1);
    });
}

ps_status ps_model_forward(const ps_model* model, const double* x, int32_t x_len,
                           double* probs_out) {
    if (require_args(model != nullptr && x != nullptr && probs_out != nullptr && x_len >= 0)) {
        return PS_ERR_USAGE;
    }
    return guarded([&] {
        if (static_cast<std::size_t>(x_len) != model->model.spec().input_dim) {
            throw DimensionError("forward: input length does not match the model");
        }
        auto probs = model->model.forward_full({x, static_cast<std::size_t>(x_len)});
        std::memcpy(probs_out, probs.data(), probs.size() * sizeof(double));
    });
}

ps_status ps_model_features(const ps_model* model, const double* x, int32_t x_len,
                            double* features_out) {
    if (require_args(model != nullptr && x != nullptr && features_out != nullptr && x_len >= 0)) {
        return PS_ERR_USAGE;
    }
    return guarded([&] {
        if (static_cast<std::size_t>(x_len) != model->model.spec().input_dim) {
            throw DimensionError("features: input length does not match the model");
        }
        auto features = model->model.extract_features({x, static_cast<std::size_t>(x_len)});
        std::memcpy(features_out, features.data(), features.size() * sizeof(double));
    });
}

ps_status ps_model_weight_orthogonality(const ps_model* model, double* h_w,
                                        double* mean_angle_deg) {
    if (require_args(model != nullptr && h_w != nullptr && mean_angle_deg != nullptr)) {
        return PS_ERR_USAGE;
    }
    return guarded([&] {
        OrthogonalityResult result = classifier_orthogonality(model->model.classifier_weight());
        *h_w = result.h_w;
        *mean_angle_deg = result.mean_angle_deg;
    });
}

ps_status ps_model_train(ps_model* model, const ps_dataset* ds, const ps_train_config* cfg,
                         ps_history** history_out) {
    if (require_args(model != nullptr && ds != nullptr && cfg != nullptr)) return PS_ERR_USAGE;
    return guarded([&] {
        TrainHistory history = train(model->model, ds->ds, to_core(*cfg));
        if (history_out) *history_out = new ps_history{std::move(history)};
    });
}

ps_status ps_model_test_accuracy(const ps_model* model, const ps_dataset* ds, double* out) {
    if (require_args(model != nullptr && ds != nullptr && out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { *out = test_accuracy(model->model, ds->ds); });
}

void ps_model_free(ps_model* model) { delete model; }

void ps_train_config_default(ps_train_config* cfg) {
    if (!cfg) return;
    const TrainConfig defaults;
    cfg->epochs = static_cast<int32_t>(defaults.epochs);
    cfg->lr_phase1 = defaults.lr_phase1;
    cfg->lr_phase2 = defaults.lr_phase2;
    cfg->phase_split = static_cast<int32_t>(defaults.phase_split);
    cfg->batch_size = static_cast<int32_t>(defaults.batch_size);
    cfg->seed = defaults.seed;
    cfg->shuffle = defaults.shuffle ? 1 : 0;
}

void ps_proto_config_default(ps_proto_config* cfg) {
    if (!cfg) return;
    const ProtoConfig defaults;
    cfg->delta_loss = defaults.delta_loss;
    cfg->eta = defaults.eta;
    cfg->max_iters = static_cast<int32_t>(defaults.max_iters);
    cfg->init = defaults.init == InitDistribution::kStandardNormal ? 0 : 1;
    cfg->seed = defaults.seed;
}

/* ---- training history ---- */

int32_t ps_history_epochs(const ps_history* history) {
    return history ? static_cast<int32_t>(history->history.mean_loss.size()) : 0;
}

ps_status ps_history_loss(const ps_history* history, int32_t epoch, double* out) {
    if (require_args(history != nullptr && out != nullptr && epoch >= 0 &&
                     epoch < ps_history_epochs(history))) {
        return PS_ERR_USAGE;
    }
    *out = history->history.mean_loss[static_cast<std::size_t>(epoch)];
    return PS_OK;
}

ps_status ps_history_accuracy(const ps_history* history, int32_t epoch, double* out) {
    if (require_args(history != nullptr && out != nullptr && epoch >= 0 &&
                     epoch < ps_history_epochs(history))) {
        return PS_ERR_USAGE;
    }
    *out = history->history.train_accuracy[static_cast<std::size_t>(epoch)];
    return PS_OK;
}

ps_status ps_history_save_csv(const ps_history* history, const char* path) {
    if (require_args(history != nullptr && path != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { write_text_file(path, history->history.to_csv()); });
}

void ps_history_free(ps_history* history) { delete history; }

/* ---- prototypes ---- */

ps_status ps_generate_prototypes(const ps_model* model, const ps_proto_config* cfg,
                                 ps_protoset** out) {
    if (require_args(model != nullptr && cfg != nullptr && out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] {
        *out = new ps_protoset{generate_prototypes(model->model, to_core(*cfg))};
    });
}

int32_t ps_protoset_count(const ps_protoset* protos) {
    return protos ? static_cast<int32_t>(protos->set.total()) : 0;
}

int32_t ps_protoset_converged_count(const ps_protoset* protos) {
    return protos ? static_cast<int32_t>(protos->set.converged_count()) : 0;
}

ps_status ps_protoset_info(const ps_protoset* protos, int32_t idx, int32_t* target_out,
                           int32_t* origin_out, int32_t* converged_out, double* final_loss_out,
                           int32_t* iterations_out) {
    if (require_args(protos != nullptr && idx >= 0 && idx < ps_protoset_count(protos))) {
        return PS_ERR_USAGE;
    }
    const Prototype& proto = protos->set.at(static_cast<std::size_t>(idx));
    if (target_out) *target_out = proto.target_class;
    if (origin_out) *origin_out = proto.origin_class;
    if (converged_out) *converged_out = proto.converged ? 1 : 0;
    if (final_loss_out) *final_loss_out = proto.final_loss;
    if (iterations_out) *iterations_out = static_cast<int32_t>(proto.iterations);
    return PS_OK;
}

ps_status ps_protoset_vector(const ps_protoset* protos, int32_t idx, double* out,
                             int32_t out_len) {
    if (require_args(protos != nullptr && out != nullptr && idx >= 0 &&
                     idx < ps_protoset_count(protos))) {
        return PS_ERR_USAGE;
    }
    const Prototype& proto = protos->set.at(static_cast<std::size_t>(idx));
    if (require_args(out_len >= static_cast<int32_t>(proto.input.size()))) return PS_ERR_USAGE;
    std::memcpy(out, proto.input.data(), proto.input.size() * sizeof(double));
    return PS_OK;
}

ps_status ps_protoset_save_json(const ps_protoset* protos, const char* path) {
    if (require_args(protos != nullptr && path != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { save_prototypes(protos->set, path); });
}

ps_status ps_protoset_load_json(const char* path, ps_protoset** out) {
    if (require_args(path != nullptr && out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { *out = new ps_protoset{load_prototypes(path)}; });
}

void ps_protoset_free(ps_protoset* protos) { delete protos; }

/* ---- evaluation ---- */

ps_status ps_accuracy_bounds(double m_in_mean, double m_in_std, double bt_cs_mean,
                             double bt_cs_std, double* upper_out, double* lower_out) {
    if (require_args(upper_out != nullptr && lower_out != nullptr)) return PS_ERR_USAGE;
    const Bounds bounds = accuracy_bounds(m_in_mean, m_in_std, bt_cs_mean, bt_cs_std);
    *upper_out = bounds.upper;
    *lower_out = bounds.lower;
    return PS_OK;
}

ps_status ps_evaluate(const ps_model* model, const ps_protoset* protos, ps_report** out) {
    if (require_args(model != nullptr && protos != nullptr && out != nullptr)) {
        return PS_ERR_USAGE;
    }
    return guarded([&] {
        *out = new ps_report{evaluate_dataless(model->model, protos->set)};
    });
}

ps_status ps_evaluate_dataless(const ps_model* model, const ps_proto_config* cfg,
                               ps_report** out) {
    if (require_args(model != nullptr && cfg != nullptr && out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] {
        PrototypeSet protos = generate_prototypes(model->model, to_core(*cfg));
        *out = new ps_report{evaluate_dataless(model->model, protos)};
    });
}

ps_status ps_report_value(const ps_report* report, ps_report_field field, double* out) {
    if (require_args(report != nullptr && out != nullptr)) return PS_ERR_USAGE;
    const MetricReport& r = report->report;
    switch (field) {
        case PS_FIELD_H_W: *out = r.h_w; return PS_OK;
        case PS_FIELD_MEAN_ANGLE_DEG: *out = r.mean_weight_angle_deg; return PS_OK;
        case PS_FIELD_M_IN_MEAN: *out = r.m_in_mean; return PS_OK;
        case PS_FIELD_M_IN_STD: *out = r.m_in_std; return PS_OK;
        case PS_FIELD_BT_COSSIM_MEAN: *out = r.bt_cossim_mean; return PS_OK;
        case PS_FIELD_BT_COSSIM_STD: *out = r.bt_cossim_std; return PS_OK;
        case PS_FIELD_M_BT: *out = r.m_bt; return PS_OK;
        case PS_FIELD_UPPER_BOUND: *out = r.upper_bound; return PS_OK;
        case PS_FIELD_LOWER_BOUND: *out = r.lower_bound; return PS_OK;
        case PS_FIELD_UPPER_BOUND_CLAMPED: *out = r.upper_bound_clamped; return PS_OK;
        case PS_FIELD_LOWER_BOUND_CLAMPED: *out = r.lower_bound_clamped; return PS_OK;
        case PS_FIELD_BOUNDS_CLAMPED: *out = r.bounds_clamped ? 1.0 : 0.0; return PS_OK;
        case PS_FIELD_EXCLUDED_ZERO_FEATURES:
            *out = static_cast<double>(r.excluded_zero_features);
            return PS_OK;
        case PS_FIELD_EXCLUDED_UNCONVERGED:
            *out = static_cast<double>(r.excluded_unconverged);
            return PS_OK;
        case PS_FIELD_FRACTION:
            if (!r.fraction) {
                set_error("report: fraction was never set");
                return PS_ERR_USAGE;
            }
            *out = *r.fraction;
            return PS_OK;
        case PS_FIELD_ACCURACY:
            if (!r.accuracy) {
                set_error("report: accuracy was never set");
                return PS_ERR_USAGE;
            }
            *out = *r.accuracy;
            return PS_OK;
    }
    set_error("report: unknown field");
    return PS_ERR_USAGE;
}

ps_status ps_report_set_fraction(ps_report* report, double fraction) {
    if (require_args(report != nullptr)) return PS_ERR_USAGE;
    report->report.fraction = fraction;
    return PS_OK;
}

ps_status ps_report_set_accuracy(ps_report* report, double accuracy) {
    if (require_args(report != nullptr)) return PS_ERR_USAGE;
    report->report.accuracy = accuracy;
    return PS_OK;
}

ps_status ps_report_to_json(const ps_report* report, char** out) {
    if (require_args(report != nullptr && out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { *out = dup_string(report->report.to_json()); });
}

ps_status ps_report_to_csv(const ps_report* report, int32_t with_header, char** out) {
    if (require_args(report != nullptr && out != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { *out = dup_string(report->report.to_csv(with_header != 0)); });
}

ps_status ps_report_save_json(const ps_report* report, const char* path) {
    if (require_args(report != nullptr && path != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { write_text_file(path, report->report.to_json() + "\n"); });
}

ps_status ps_report_save_csv(const ps_report* report, const char* path) {
    if (require_args(report != nullptr && path != nullptr)) return PS_ERR_USAGE;
    return guarded([&] { write_text_file(path, report->report.to_csv(true)); });
}

void ps_report_free(ps_report* report) { delete report; }

} /* extern "C" */
