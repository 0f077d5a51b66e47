// protoscope CLI: dataset generation, training, dataset-free evaluation,
// fraction sweeps, and plot-series reports. Links the C API only.
#include <protoscope.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using nlohmann::ordered_json;

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitEvaluation = 4;

int exit_code_for(ps_status status) {
    switch (status) {
        case PS_OK: return 0;
        case PS_ERR_TRAINING: return kExitTraining;
        case PS_ERR_EVALUATION: return kExitEvaluation;
        default: return kExitConfig;
    }
}

[[noreturn]] void fail(ps_status status, const std::string& context) {
    std::cerr << "error: " << context << ": " << ps_last_error() << "\n";
    std::exit(exit_code_for(status));
}

void check(ps_status status, const std::string& context) {
    if (status != PS_OK) fail(status, context);
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// derives independent sub-seeds (model init, partitioning, shuffling, ...)
// from the single user-facing seed
std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> salts) {
    auto step = [](std::uint64_t& s) {
        s += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t s = base;
    std::uint64_t out = step(s);
    for (std::uint64_t salt : salts) {
        s ^= salt + 0x9e3779b97f4a7c15ULL;
        out = step(s);
    }
    return out;
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// Every output file gets a sibling <output>.manifest.json recording the
// command and full configuration that produced it.
void write_manifest(const std::string& command, const ordered_json& flags,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::string& model_hash = "") {
    ordered_json doc;
    doc["command"] = command;
    doc["tool_version"] = ps_version();
    doc["timestamp"] = timestamp_utc();
    doc["flags"] = flags;
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    if (!model_hash.empty()) doc["model_hash"] = model_hash;

    for (const std::string& output : outputs) {
        std::ofstream out(output + ".manifest.json", std::ios::binary);
        if (!out) {
            std::cerr << "error: cannot write manifest for '" << output << "'\n";
            std::exit(kExitConfig);
        }
        out << doc.dump(2) << "\n";
    }
}

std::string model_hash_of(const ps_model* model) {
    char buf[17];
    check(ps_model_hash(model, buf, sizeof(buf)), "model hash");
    return buf;
}

struct TrainFlags {
    std::string spec = "mlp:";
    std::int32_t feature_dim = 32;
    std::int32_t epochs = 100;
    double lr1 = 0.1;
    double lr2 = 0.05;
    std::int32_t phase_split = -1;  // -1: epochs / 2
    std::int32_t batch = 32;
    bool no_shuffle = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--spec", spec, "hidden layers, e.g. mlp:16,8 or conv:c4k3s1+mlp:16")
            ->capture_default_str();
        cmd->add_option("--q", feature_dim, "feature dimension")->capture_default_str();
        cmd->add_option("--epochs", epochs)->capture_default_str();
        cmd->add_option("--lr1", lr1, "learning rate before the phase split")
            ->capture_default_str();
        cmd->add_option("--lr2", lr2, "learning rate after the phase split")
            ->capture_default_str();
        cmd->add_option("--phase-split", phase_split, "epoch where lr2 takes over (default epochs/2)");
        cmd->add_option("--batch", batch)->capture_default_str();
        cmd->add_flag("--no-shuffle", no_shuffle, "keep example order fixed across epochs");
    }

    ps_train_config to_config(std::uint64_t shuffle_seed) const {
        ps_train_config cfg;
        ps_train_config_default(&cfg);
        cfg.epochs = epochs;
        cfg.lr_phase1 = lr1;
        cfg.lr_phase2 = lr2;
        cfg.phase_split = phase_split >= 0 ? phase_split : epochs / 2;
        cfg.batch_size = batch;
        cfg.seed = shuffle_seed;
        cfg.shuffle = no_shuffle ? 0 : 1;
        return cfg;
    }

    ordered_json flags_json() const {
        ordered_json flags;
        flags["spec"] = spec;
        flags["q"] = feature_dim;
        flags["epochs"] = epochs;
        flags["lr1"] = lr1;
        flags["lr2"] = lr2;
        flags["phase_split"] = phase_split >= 0 ? phase_split : epochs / 2;
        flags["batch"] = batch;
        flags["shuffle"] = !no_shuffle;
        return flags;
    }
};

struct ProtoFlags {
    double delta_loss = 0.01;
    double eta = 0.05;
    std::int32_t max_iters = 2000;
    std::string init = "normal";

    void attach(CLI::App* cmd) {
        cmd->add_option("--delta-loss", delta_loss, "loss threshold ending the descent")
            ->capture_default_str();
        cmd->add_option("--eta", eta, "step length of every prototype update")
            ->capture_default_str();
        cmd->add_option("--max-iters", max_iters)->capture_default_str();
        cmd->add_option("--init", init, "prototype start distribution")
            ->check(CLI::IsMember({"normal", "uniform01"}))
            ->capture_default_str();
    }

    ps_proto_config to_config(std::uint64_t seed) const {
        ps_proto_config cfg;
        ps_proto_config_default(&cfg);
        cfg.delta_loss = delta_loss;
        cfg.eta = eta;
        cfg.max_iters = max_iters;
        cfg.init = init == "uniform01" ? 1 : 0;
        cfg.seed = seed;
        return cfg;
    }

    ordered_json flags_json() const {
        ordered_json flags;
        flags["delta_loss"] = delta_loss;
        flags["eta"] = eta;
        flags["max_iters"] = max_iters;
        flags["init"] = init;
        return flags;
    }
};

// ---- gen-data ----

int cmd_gen_data(std::int32_t k, std::int32_t per_class, std::int32_t p, double separation,
                 double spread, std::uint64_t seed, const std::string& out_path) {
    ps_dataset* ds = nullptr;
    check(ps_dataset_gen_blobs(k, per_class, p, separation, spread, seed, &ds), "gen-data");
    check(ps_dataset_save_csv(ds, out_path.c_str()), "writing " + out_path);
    ps_dataset_free(ds);

    ordered_json flags;
    flags["blobs"] = true;
    flags["k"] = k;
    flags["per_class"] = per_class;
    flags["p"] = p;
    flags["separation"] = separation;
    flags["spread"] = spread;
    flags["seed"] = seed;
    write_manifest("gen-data", flags, {}, {out_path});
    std::cout << "wrote " << out_path << " (" << k * per_class << " rows)\n";
    return 0;
}

// ---- train ----

int cmd_train(const std::string& data_path, bool has_header, const TrainFlags& train_flags,
              double fraction, std::uint64_t seed, const std::string& out_path,
              const std::string& history_path) {
    ps_dataset* full = nullptr;
    check(ps_dataset_load_csv(data_path.c_str(), has_header ? 1 : 0, &full), "loading data");

    ps_dataset* train_ds = full;
    if (fraction < 1.0) {
        ps_dataset* part = nullptr;
        check(ps_dataset_partition_fraction(full, fraction, mix_seed(seed, {2}), &part),
              "partitioning");
        ps_dataset_free(full);
        train_ds = part;
    }

    ps_model* model = nullptr;
    check(ps_model_build(ps_dataset_input_dim(train_ds), train_flags.feature_dim,
                         ps_dataset_num_classes(train_ds), train_flags.spec.c_str(),
                         mix_seed(seed, {1}), &model),
          "building model");

    const ps_train_config cfg = train_flags.to_config(mix_seed(seed, {3}));
    ps_history* history = nullptr;
    check(ps_model_train(model, train_ds, &cfg, &history), "training");

    check(ps_model_save(model, out_path.c_str()), "writing " + out_path);
    std::vector<std::string> outputs{out_path};
    if (!history_path.empty()) {
        check(ps_history_save_csv(history, history_path.c_str()), "writing " + history_path);
        outputs.push_back(history_path);
    }

    const int epochs = ps_history_epochs(history);
    double final_acc = 0.0;
    if (epochs > 0) check(ps_history_accuracy(history, epochs - 1, &final_acc), "history");

    ordered_json flags = train_flags.flags_json();
    flags["data"] = data_path;
    flags["header"] = has_header;
    flags["fraction"] = fraction;
    flags["seed"] = seed;
    flags["seed_model"] = mix_seed(seed, {1});
    flags["seed_partition"] = mix_seed(seed, {2});
    flags["seed_shuffle"] = mix_seed(seed, {3});
    // label_map[i] is the source label behind contiguous class i
    ordered_json label_map = ordered_json::array();
    for (std::int32_t c = 0; c < ps_dataset_num_classes(train_ds); ++c) {
        std::int64_t original = 0;
        check(ps_dataset_original_label(train_ds, c, &original), "label map");
        label_map.push_back(original);
    }
    flags["label_map"] = label_map;
    write_manifest("train", flags, {data_path}, outputs, model_hash_of(model));

    std::cout << "trained " << out_path;
    if (epochs > 0) std::cout << " (final train acc " << final_acc << ")";
    std::cout << "\n";

    ps_history_free(history);
    ps_model_free(model);
    ps_dataset_free(train_ds);
    return 0;
}

// ---- evaluate ----

int cmd_evaluate(const std::string& model_path, const ProtoFlags& proto_flags,
                 std::uint64_t seed, const std::string& out_path, const std::string& csv_path,
                 const std::string& protos_path, const std::string& validate_path,
                 bool validate_header, std::optional<double> fraction) {
    ps_model* model = nullptr;
    check(ps_model_load(model_path.c_str(), &model), "loading model");

    const ps_proto_config cfg = proto_flags.to_config(mix_seed(seed, {4}));
    ps_protoset* protos = nullptr;
    check(ps_generate_prototypes(model, &cfg, &protos), "generating prototypes");

    std::vector<std::string> outputs;
    if (!protos_path.empty()) {
        check(ps_protoset_save_json(protos, protos_path.c_str()), "writing " + protos_path);
        outputs.push_back(protos_path);
    }

    ps_report* report = nullptr;
    check(ps_evaluate(model, protos, &report), "evaluating");

    if (fraction) check(ps_report_set_fraction(report, *fraction), "report");
    if (!validate_path.empty()) {
        ps_dataset* test_ds = nullptr;
        check(ps_dataset_load_csv(validate_path.c_str(), validate_header ? 1 : 0, &test_ds),
              "loading validation data");
        double accuracy = 0.0;
        check(ps_model_test_accuracy(model, test_ds, &accuracy), "validation accuracy");
        check(ps_report_set_accuracy(report, accuracy), "report");
        ps_dataset_free(test_ds);
    }

    check(ps_report_save_json(report, out_path.c_str()), "writing " + out_path);
    outputs.push_back(out_path);
    if (!csv_path.empty()) {
        check(ps_report_save_csv(report, csv_path.c_str()), "writing " + csv_path);
        outputs.push_back(csv_path);
    }

    ordered_json flags = proto_flags.flags_json();
    flags["model"] = model_path;
    flags["seed"] = seed;
    flags["seed_prototypes"] = mix_seed(seed, {4});
    if (fraction) flags["fraction"] = *fraction;
    if (!validate_path.empty()) flags["validate"] = validate_path;
    std::vector<std::string> inputs{model_path};
    if (!validate_path.empty()) inputs.push_back(validate_path);
    write_manifest("evaluate", flags, inputs, outputs, model_hash_of(model));

    char* json = nullptr;
    check(ps_report_to_json(report, &json), "report");
    std::cout << json << "\n";
    ps_string_free(json);

    ps_report_free(report);
    ps_protoset_free(protos);
    ps_model_free(model);
    return 0;
}

// ---- sweep ----

struct SweepCell {
    double fraction = 0.0;
    std::size_t fraction_index = 0;
    std::size_t run = 0;  // seed index within the fraction
    bool ok = false;
    std::string error;
    double h_w = 0.0, angle = 0.0, m_in = 0.0, in_std = 0.0, upper = 0.0;
    double cs_bt = 0.0, bt_std = 0.0, lower = 0.0, train_acc = 0.0, accuracy = 0.0;
};

const char* kSweepHeader =
    "fraction,seed,status,h_w,mean_angle_deg,m_in,in_std,upper,cs_bt,bt_std,cs_bt_plus_2std,"
    "lower,train_acc,accuracy\n";

std::string sanitize_cell(std::string text) {
    for (char& c : text) {
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    return text;
}

void run_sweep_cell(SweepCell& cell, const ps_dataset* train_base, const ps_dataset* test_ds,
                    const TrainFlags& train_flags, const ProtoFlags& proto_flags,
                    std::uint64_t seed) {
    const std::uint64_t fi = cell.fraction_index;
    const std::uint64_t run = cell.run;

    ps_dataset* part = nullptr;
    ps_model* model = nullptr;
    ps_protoset* protos = nullptr;
    ps_report* report = nullptr;
    auto cleanup = [&]() {
        ps_report_free(report);
        ps_protoset_free(protos);
        ps_model_free(model);
        ps_dataset_free(part);
    };

    auto attempt = [&](ps_status status, const char* what) {
        if (status != PS_OK) {
            cell.ok = false;
            cell.error = std::string(what) + ": " + ps_last_error();
            return false;
        }
        return true;
    };

    // the partition depends only on the fraction; model/shuffle/prototype
    // streams vary per run, mirroring repeated trainings of fixed partitions
    if (!attempt(ps_dataset_partition_fraction(train_base, cell.fraction,
                                               mix_seed(seed, {11, fi}), &part),
                 "partition")) {
        cleanup();
        return;
    }
    if (!attempt(ps_model_build(ps_dataset_input_dim(part), train_flags.feature_dim,
                                ps_dataset_num_classes(part), train_flags.spec.c_str(),
                                mix_seed(seed, {12, fi, run}), &model),
                 "build")) {
        cleanup();
        return;
    }
    const ps_train_config train_cfg = train_flags.to_config(mix_seed(seed, {13, fi, run}));
    if (!attempt(ps_model_train(model, part, &train_cfg, nullptr), "train")) {
        cleanup();
        return;
    }
    if (!attempt(ps_model_test_accuracy(model, part, &cell.train_acc), "train accuracy")) {
        cleanup();
        return;
    }

    const ps_proto_config proto_cfg = proto_flags.to_config(mix_seed(seed, {14, fi, run}));
    if (!attempt(ps_generate_prototypes(model, &proto_cfg, &protos), "prototypes")) {
        cleanup();
        return;
    }
    if (!attempt(ps_evaluate(model, protos, &report), "evaluate")) {
        cleanup();
        return;
    }
    if (!attempt(ps_model_test_accuracy(model, test_ds, &cell.accuracy), "test accuracy")) {
        cleanup();
        return;
    }

    auto field = [&](ps_report_field f) {
        double v = 0.0;
        ps_report_value(report, f, &v);
        return v;
    };
    cell.h_w = field(PS_FIELD_H_W);
    cell.angle = field(PS_FIELD_MEAN_ANGLE_DEG);
    cell.m_in = field(PS_FIELD_M_IN_MEAN);
    cell.in_std = field(PS_FIELD_M_IN_STD);
    cell.upper = field(PS_FIELD_UPPER_BOUND_CLAMPED);
    cell.cs_bt = field(PS_FIELD_BT_COSSIM_MEAN);
    cell.bt_std = field(PS_FIELD_BT_COSSIM_STD);
    cell.lower = field(PS_FIELD_LOWER_BOUND_CLAMPED);
    cell.ok = true;
    cleanup();
}

int cmd_sweep(const std::string& data_path, bool has_header, std::vector<double> fractions,
              std::int32_t runs, double test_fraction, const TrainFlags& train_flags,
              const ProtoFlags& proto_flags, std::uint64_t seed, std::int32_t jobs,
              const std::string& out_path) {
    if (fractions.empty()) {
        fractions = {0.25, 0.4, 0.6, 0.7, 0.8, 0.9, 1.0};
    }
    std::sort(fractions.begin(), fractions.end());
    if (runs < 1) {
        std::cerr << "error: --seeds must be >= 1\n";
        return kExitConfig;
    }

    ps_dataset* full = nullptr;
    check(ps_dataset_load_csv(data_path.c_str(), has_header ? 1 : 0, &full), "loading data");
    ps_dataset* train_base = nullptr;
    ps_dataset* test_ds = nullptr;
    check(ps_dataset_split_train_test(full, test_fraction, mix_seed(seed, {10}), &train_base,
                                      &test_ds),
          "splitting held-out test set");
    ps_dataset_free(full);

    std::vector<SweepCell> cells;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        for (std::size_t run = 0; run < static_cast<std::size_t>(runs); ++run) {
            SweepCell cell;
            cell.fraction = fractions[fi];
            cell.fraction_index = fi;
            cell.run = run;
            cells.push_back(cell);
        }
    }

    const std::size_t worker_count =
        std::min<std::size_t>(std::max(1, jobs), cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            run_sweep_cell(cells[idx], train_base, test_ds, train_flags, proto_flags, seed);
        }
    };
    if (worker_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < worker_count; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    std::size_t succeeded = 0;
    std::ostringstream out;
    out << kSweepHeader;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        SweepCell mean;
        std::size_t ok_count = 0;
        for (const SweepCell& cell : cells) {
            if (cell.fraction_index != fi) continue;
            out << fmt_double(cell.fraction) << ',' << cell.run << ',';
            if (!cell.ok) {
                out << "error:" << sanitize_cell(cell.error) << ",,,,,,,,,,,\n";
                continue;
            }
            ++succeeded;
            ++ok_count;
            out << "ok," << fmt_double(cell.h_w) << ',' << fmt_double(cell.angle) << ','
                << fmt_double(cell.m_in) << ',' << fmt_double(cell.in_std) << ','
                << fmt_double(cell.upper) << ',' << fmt_double(cell.cs_bt) << ','
                << fmt_double(cell.bt_std) << ','
                << fmt_double(cell.cs_bt + 2.0 * cell.bt_std) << ',' << fmt_double(cell.lower)
                << ',' << fmt_double(cell.train_acc) << ',' << fmt_double(cell.accuracy) << '\n';
            mean.h_w += cell.h_w;
            mean.angle += cell.angle;
            mean.m_in += cell.m_in;
            mean.in_std += cell.in_std;
            mean.upper += cell.upper;
            mean.cs_bt += cell.cs_bt;
            mean.bt_std += cell.bt_std;
            mean.lower += cell.lower;
            mean.train_acc += cell.train_acc;
            mean.accuracy += cell.accuracy;
        }
        if (ok_count == 0) continue;
        const double n = static_cast<double>(ok_count);
        out << fmt_double(fractions[fi]) << ",mean,ok," << fmt_double(mean.h_w / n) << ','
            << fmt_double(mean.angle / n) << ',' << fmt_double(mean.m_in / n) << ','
            << fmt_double(mean.in_std / n) << ',' << fmt_double(mean.upper / n) << ','
            << fmt_double(mean.cs_bt / n) << ',' << fmt_double(mean.bt_std / n) << ','
            << fmt_double((mean.cs_bt + 2.0 * mean.bt_std) / n) << ','
            << fmt_double(mean.lower / n) << ',' << fmt_double(mean.train_acc / n) << ','
            << fmt_double(mean.accuracy / n) << '\n';
    }

    std::ofstream file(out_path, std::ios::binary);
    if (!file) {
        std::cerr << "error: cannot open '" << out_path << "' for writing\n";
        return kExitConfig;
    }
    file << out.str();
    file.close();

    ordered_json flags = train_flags.flags_json();
    const ordered_json proto_json = proto_flags.flags_json();
    for (const auto& [key, value] : proto_json.items()) flags[key] = value;
    flags["data"] = data_path;
    flags["fractions"] = fractions;
    flags["seeds"] = runs;
    flags["test_fraction"] = test_fraction;
    flags["seed"] = seed;
    flags["jobs"] = jobs;
    write_manifest("sweep", flags, {data_path}, {out_path});

    std::cout << "sweep: " << succeeded << "/" << cells.size() << " cells succeeded -> "
              << out_path << "\n";
    if (succeeded == 0) {
        std::cerr << "error: every sweep cell failed\n";
        return kExitEvaluation;
    }
    return 0;
}

// ---- report ----

int cmd_report(const std::string& sweep_path, const std::string& out_path) {
    std::ifstream in(sweep_path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot open '" << sweep_path << "'\n";
        return kExitConfig;
    }
    std::string header;
    if (!std::getline(in, header) || header + "\n" != kSweepHeader) {
        std::cerr << "error: '" << sweep_path << "' is not a sweep results file\n";
        return kExitConfig;
    }

    struct Series {
        double lower, accuracy, upper;
    };
    std::map<double, Series> rows;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 2) {
            std::cerr << "error: " << sweep_path << ":" << line_no << ": short row\n";
            return kExitConfig;
        }
        if (cells[1] != "mean") continue;  // cells and error rows feed the means already
        if (cells.size() < 14) {
            std::cerr << "error: " << sweep_path << ":" << line_no << ": short mean row\n";
            return kExitConfig;
        }
        try {
            const double fraction = std::stod(cells[0]);
            rows[fraction] = Series{std::stod(cells[11]), std::stod(cells[13]),
                                    std::stod(cells[7])};
        } catch (const std::exception&) {
            std::cerr << "error: " << sweep_path << ":" << line_no << ": non-numeric cell\n";
            return kExitConfig;
        }
    }
    if (rows.empty()) {
        std::cerr << "error: '" << sweep_path << "' has no per-fraction mean rows\n";
        return kExitConfig;
    }

    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot open '" << out_path << "' for writing\n";
        return kExitConfig;
    }
    out << "fraction,lower,accuracy,upper\n";
    for (const auto& [fraction, series] : rows) {
        out << fmt_double(fraction) << ',' << fmt_double(series.lower) << ','
            << fmt_double(series.accuracy) << ',' << fmt_double(series.upper) << '\n';
    }
    out.close();

    ordered_json flags;
    flags["sweep"] = sweep_path;
    write_manifest("report", flags, {sweep_path}, {out_path});
    std::cout << "wrote " << out_path << " (" << rows.size() << " fractions)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dataset-free evaluation of one-hot softmax classifiers"};
    app.set_version_flag("--version", ps_version());
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a labeled dataset as CSV");
    bool blobs = false;
    std::int32_t gen_k = 4, gen_per_class = 100, gen_p = 8;
    double gen_separation = 10.0, gen_spread = 0.5;
    std::uint64_t gen_seed = 1;
    std::string gen_out = "data.csv";
    gen->add_flag("--blobs", blobs, "gaussian blob generator")->required();
    gen->add_option("--k", gen_k, "number of classes")->capture_default_str();
    gen->add_option("--per-class", gen_per_class)->capture_default_str();
    gen->add_option("--p", gen_p, "input dimension")->capture_default_str();
    gen->add_option("--separation", gen_separation)->capture_default_str();
    gen->add_option("--spread", gen_spread)->capture_default_str();
    gen->add_option("--seed", gen_seed)->envname("PROTOSCOPE_SEED")->capture_default_str();
    gen->add_option("--out", gen_out)->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "train a model on a CSV dataset");
    std::string train_data;
    bool train_header = false;
    TrainFlags train_flags;
    double train_fraction = 1.0;
    std::uint64_t train_seed = 1;
    std::string train_out = "model.json", train_history;
    train->add_option("--data", train_data)->required();
    train->add_flag("--header", train_header, "first data row is a header");
    train_flags.attach(train);
    train->add_option("--fraction", train_fraction, "stratified training fraction")
        ->capture_default_str();
    train->add_option("--seed", train_seed)->envname("PROTOSCOPE_SEED")->capture_default_str();
    train->add_option("--out", train_out)->capture_default_str();
    train->add_option("--history", train_history, "write per-epoch loss/accuracy CSV");

    // evaluate
    auto* evaluate = app.add_subcommand(
        "evaluate", "dataset-free evaluation of a trained model (reads no dataset)");
    std::string eval_model;
    ProtoFlags eval_proto;
    std::uint64_t eval_seed = 1;
    std::string eval_out = "report.json", eval_csv, eval_protos, eval_validate;
    bool eval_validate_header = false;
    double eval_fraction = -1.0;
    evaluate->add_option("--model", eval_model)->required();
    eval_proto.attach(evaluate);
    evaluate->add_option("--seed", eval_seed)->envname("PROTOSCOPE_SEED")->capture_default_str();
    evaluate->add_option("--out", eval_out)->capture_default_str();
    evaluate->add_option("--csv", eval_csv, "also write the one-row CSV");
    evaluate->add_option("--protos", eval_protos, "also write the prototype set JSON");
    evaluate->add_option("--validate", eval_validate,
                         "test CSV for comparing the bounds against true accuracy");
    evaluate->add_flag("--validate-header", eval_validate_header);
    evaluate->add_option("--fraction", eval_fraction, "fraction tag echoed into the report");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "fraction x seed grid: train, evaluate, validate");
    std::string sweep_data;
    bool sweep_header = false;
    std::vector<double> sweep_fractions;
    std::int32_t sweep_runs = 5;
    double sweep_test_fraction = 0.3;
    TrainFlags sweep_train;
    ProtoFlags sweep_proto;
    std::uint64_t sweep_seed = 1;
    std::int32_t sweep_jobs = 1;
    std::string sweep_out = "sweep.csv";
    sweep->add_option("--data", sweep_data)->required();
    sweep->add_flag("--header", sweep_header);
    sweep->add_option("--fractions", sweep_fractions,
                      "training fractions (default 0.25,0.4,0.6,0.7,0.8,0.9,1.0)")
        ->delimiter(',');
    sweep->add_option("--seeds", sweep_runs, "runs per fraction")->capture_default_str();
    sweep->add_option("--test-fraction", sweep_test_fraction)->capture_default_str();
    sweep_train.attach(sweep);
    sweep_proto.attach(sweep);
    sweep->add_option("--seed", sweep_seed)->envname("PROTOSCOPE_SEED")->capture_default_str();
    sweep->add_option("--jobs", sweep_jobs, "parallel sweep cells")->capture_default_str();
    sweep->add_option("--out", sweep_out)->capture_default_str();

    // report
    auto* report = app.add_subcommand("report", "plot series from a sweep CSV");
    std::string report_sweep, report_out = "series.csv";
    report->add_option("--sweep", report_sweep)->required();
    report->add_option("--out", report_out)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help / --version
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return kExitConfig;
    }

    if (gen->parsed()) {
        return cmd_gen_data(gen_k, gen_per_class, gen_p, gen_separation, gen_spread, gen_seed,
                            gen_out);
    }
    if (train->parsed()) {
        return cmd_train(train_data, train_header, train_flags, train_fraction, train_seed,
                         train_out, train_history);
    }
    if (evaluate->parsed()) {
        return cmd_evaluate(eval_model, eval_proto, eval_seed, eval_out, eval_csv, eval_protos,
                            eval_validate, eval_validate_header,
                            eval_fraction >= 0.0 ? std::optional<double>(eval_fraction)
                                                 : std::nullopt);
    }
    if (sweep->parsed()) {
        return cmd_sweep(sweep_data, sweep_header, sweep_fractions, sweep_runs,
                         sweep_test_fraction, sweep_train, sweep_proto, sweep_seed, sweep_jobs,
                         sweep_out);
    }
    if (report->parsed()) {
        return cmd_report(report_sweep, report_out);
    }
    return kExitConfig;
}
