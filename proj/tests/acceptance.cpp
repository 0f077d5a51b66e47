// Acceptance suite: every criterion below runs against the desk-scale blobs
// recipe (direct MLP p=8, q=32, k=4; gaussian blobs separation 10, spread 0.5;
// the trainer and prototype defaults) and prints one PASS/FAIL line. The
// binary exits nonzero if any criterion fails.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "protogen.hpp"
#include "rng.hpp"
#include "support/gradcheck.hpp"
#include "tensor.hpp"
#include "trainer.hpp"

using namespace protoscope;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!pass) ++g_failures;
}

NetworkSpec recipe_spec(std::uint64_t seed) {
    NetworkSpec spec;
    spec.input_dim = 8;
    spec.feature_dim = 32;
    spec.num_classes = 4;
    spec.hidden = {};
    spec.seed = seed;
    return spec;
}

LabeledDataset recipe_blobs(std::size_t per_class, std::uint64_t seed) {
    return gen_blobs(4, per_class, 8, 10.0, 0.5, seed);
}

Model train_recipe_model(const LabeledDataset& ds, std::uint64_t model_seed,
                         std::uint64_t shuffle_seed) {
    Model model = build_model(recipe_spec(model_seed));
    TrainConfig cfg;  // 100 epochs, split 50, lr 0.1 -> 0.05, batch 32
    cfg.seed = shuffle_seed;
    train(model, ds, cfg);
    return model;
}

// ---- criterion 1: bound arithmetic against reference statistics ----

void criterion_1() {
    const Bounds upper_case = accuracy_bounds(0.9844, 0.0077, 0.0, 0.0);
    const Bounds weak = accuracy_bounds(1.0, 0.0, 0.3721, 0.1140);
    const Bounds strong = accuracy_bounds(1.0, 0.0, 0.2897, 0.0858);

    const bool pass = std::fabs(upper_case.upper - 0.9690) <= 1e-4 &&
                      std::fabs(weak.lower - 0.3998) <= 1e-3 &&
                      std::fabs(strong.lower - 0.5386) <= 1e-3;
    std::ostringstream detail;
    detail << "upper(0.9844, 0.0077) = " << upper_case.upper << ", lower(0.3721, 0.1140) = "
           << weak.lower << ", lower(0.2897, 0.0858) = " << strong.lower;
    report(1, "bound arithmetic matches reference statistics", pass, detail.str());
}

// ---- criterion 2: weight orthogonality across five training seeds ----

void criterion_2() {
    bool pass = true;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        LabeledDataset ds = recipe_blobs(100, seed * 1000 + 1);
        Model model = train_recipe_model(ds, seed * 1000, seed * 1000 + 2);
        const OrthogonalityResult ortho = classifier_orthogonality(model.classifier_weight());
        const bool angle_ok = ortho.mean_angle_deg >= 85.0 && ortho.mean_angle_deg <= 90.0;
        const bool h_w_ok = std::fabs(ortho.h_w - 1.0) <= 0.08;
        if (!(angle_ok && h_w_ok)) pass = false;
        detail << "seed " << seed << ": angle=" << ortho.mean_angle_deg << " h_w=" << ortho.h_w
               << (angle_ok && h_w_ok ? " ok; " : " out of range; ");
    }
    report(2, "mean weight angles in [85, 90] deg and h_w within 0.08 of 1", pass, detail.str());
}

// ---- criteria 3 and 4: bound enclosure and monotone trends over a sweep ----

struct SweepCell {
    double fraction;
    std::uint64_t run;
    double train_acc;
    double test_acc;
    double upper;
    double lower;
    double m_in;
    bool usable;
};

std::vector<SweepCell> run_recipe_sweep() {
    LabeledDataset base = recipe_blobs(200, 42);
    auto [train_side, test_side] = split_train_test(base, 0.3, 43);

    const double fractions[] = {0.25, 0.5, 1.0};
    std::vector<SweepCell> cells;
    for (std::size_t fi = 0; fi < 3; ++fi) {
        LabeledDataset part =
            partition_fraction(train_side, fractions[fi], mix_seed(44, {11, fi}));
        for (std::uint64_t run = 0; run < 3; ++run) {
            SweepCell cell{fractions[fi], run, 0.0, 0.0, 0.0, 0.0, 0.0, false};
            try {
                Model model = build_model(recipe_spec(mix_seed(44, {12, fi, run})));
                TrainConfig tc;
                tc.seed = mix_seed(44, {13, fi, run});
                train(model, part, tc);
                cell.train_acc = test_accuracy(model, part);
                cell.test_acc = test_accuracy(model, test_side);

                ProtoConfig pc;  // defaults: delta 0.01, eta 0.05, 2000 iters
                pc.seed = mix_seed(44, {14, fi, run});
                PrototypeSet protos = generate_prototypes(model, pc);
                MetricReport rep = evaluate_dataless(model, protos);
                cell.upper = rep.upper_bound_clamped;
                cell.lower = rep.lower_bound_clamped;
                cell.m_in = rep.m_in_mean;
                cell.usable = true;
            } catch (const Error& e) {
                std::printf("  (cell fraction=%.2f run=%llu failed: %s)\n", cell.fraction,
                            static_cast<unsigned long long>(run), e.what());
            }
            cells.push_back(cell);
        }
    }
    return cells;
}

void criterion_3(const std::vector<SweepCell>& cells) {
    int failing = 0;
    std::ostringstream detail;
    for (const SweepCell& cell : cells) {
        if (!cell.usable) {
            ++failing;
            continue;
        }
        if (cell.train_acc < 0.95) continue;  // low-accuracy cells are excluded
        const bool enclosed = cell.lower <= cell.test_acc && cell.test_acc <= cell.upper + 0.05;
        if (!enclosed) ++failing;
        detail << "f=" << cell.fraction << " r=" << cell.run << ": acc=" << cell.test_acc
               << " in [" << cell.lower << ", " << cell.upper << "+0.05]"
               << (enclosed ? " ok; " : " MISS; ");
    }
    const bool pass = static_cast<int>(cells.size()) - failing >= 8;
    std::ostringstream head;
    head << (cells.size() - failing) << "/" << cells.size() << " cells enclose. " << detail.str();
    report(3, "bounds enclose test accuracy on >= 8/9 trained cells", pass, head.str());
}

void criterion_4(const std::vector<SweepCell>& cells) {
    // per-fraction means over the sweep cells
    std::vector<double> fractions{0.25, 0.5, 1.0};
    std::vector<double> acc_means, m_in_means;
    for (double fraction : fractions) {
        double acc = 0.0, m_in = 0.0;
        int n = 0;
        for (const SweepCell& cell : cells) {
            if (cell.fraction != fraction || !cell.usable) continue;
            acc += cell.test_acc;
            m_in += cell.m_in;
            ++n;
        }
        if (n == 0) {
            report(4, "per-fraction mean accuracy and m_in are non-decreasing", false,
                   "a fraction has no usable cells");
            return;
        }
        acc_means.push_back(acc / n);
        m_in_means.push_back(m_in / n);
    }

    auto check_series = [](const std::vector<double>& series, std::ostringstream& out) {
        int inversions = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i + 1 < series.size(); ++i) {
            if (series[i + 1] < series[i]) {
                ++inversions;
                worst = std::max(worst, series[i] - series[i + 1]);
            }
            out << series[i] << " -> ";
        }
        out << series.back();
        return inversions <= 1 && worst <= 0.01;
    };
    std::ostringstream acc_detail, m_in_detail;
    const bool acc_ok = check_series(acc_means, acc_detail);
    const bool m_in_ok = check_series(m_in_means, m_in_detail);
    report(4, "per-fraction mean accuracy and m_in are non-decreasing",
           acc_ok && m_in_ok,
           "acc: " + acc_detail.str() + (acc_ok ? " ok" : " INVERTED") +
               "; m_in: " + m_in_detail.str() + (m_in_ok ? " ok" : " INVERTED"));
}

// ---- criterion 5: gradient oracle on a random 3-layer network ----

// false when any relu pre-activation sits within `margin` of its kink
bool away_from_kinks(const Model& model, const std::vector<double>& x, double margin) {
    std::vector<double> h = x;
    for (const Model::Layer& layer : model.extractor()) {
        const auto& dense = std::get<Model::DenseLayer>(layer);
        const std::size_t rows = dense.weight.shape()[0];
        const std::size_t cols = dense.weight.shape()[1];
        std::vector<double> z(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            double acc = dense.bias[i];
            for (std::size_t j = 0; j < cols; ++j) acc += dense.weight[i * cols + j] * h[j];
            if (std::fabs(acc) < margin) return false;
            z[i] = acc > 0.0 ? acc : 0.0;
        }
        h = std::move(z);
    }
    return true;
}

void criterion_5() {
    NetworkSpec spec;
    spec.input_dim = 5;
    spec.feature_dim = 6;
    spec.num_classes = 3;
    spec.hidden = {DenseSpec{7}};  // three affine layers in total
    spec.seed = 77;
    Model model = build_model(spec);

    Rng rng(78);
    double worst = 0.0;
    int checked = 0;
    while (checked < 20) {
        std::vector<double> xv(5);
        for (auto& v : xv) v = rng.normal();
        if (!away_from_kinks(model, xv, 1e-3)) continue;
        const std::size_t target = static_cast<std::size_t>(rng.below(3));

        Tensor x = Tensor::vec(xv, true);
        Tape tape;
        Tensor loss = tape.cross_entropy(model.forward_full(tape, x), target);
        tape.backward(loss);

        auto loss_of = [&]() {
            Tape fresh;
            return fresh.cross_entropy(model.forward_full(fresh, x), target).value();
        };
        std::vector<Tensor> checked_tensors = model.parameters();
        checked_tensors.push_back(x);
        for (Tensor tensor : checked_tensors) {
            const auto fd = testsupport::finite_difference(tensor, loss_of, 1e-5);
            worst = std::max(worst, testsupport::max_rel_error(tensor.grad(), fd));
        }
        for (Tensor param : model.parameters()) param.zero_grad();
        ++checked;
    }
    std::ostringstream detail;
    detail << "max relative error " << worst << " over 20 points (params and inputs)";
    report(5, "backward gradients match central finite differences to 1e-4", worst < 1e-4,
           detail.str());
}

// ---- criterion 6: prototype contract on the converged blobs model ----

void criterion_6() {
    LabeledDataset ds = recipe_blobs(100, 1001);
    Model model = train_recipe_model(ds, 1, 2);
    const double train_acc = test_accuracy(model, ds);

    ProtoConfig cfg;  // delta 0.01, eta 0.05, max 2000
    cfg.seed = 3;
    PrototypeSet protos = generate_prototypes(model, cfg);

    bool pass = train_acc >= 0.95;
    std::size_t worst_iters = 0;
    double worst_prob = 1.0;
    for (std::size_t i = 0; i < protos.total(); ++i) {
        const Prototype& proto = protos.at(i);
        if (!proto.converged || proto.iterations > 2000) pass = false;
        worst_iters = std::max(worst_iters, proto.iterations);
        const auto probs = model.forward_full(proto.input);
        const double p = probs[static_cast<std::size_t>(proto.target_class)];
        worst_prob = std::min(worst_prob, p);
        if (p < 0.990) pass = false;
    }
    std::ostringstream detail;
    detail << protos.converged_count() << "/" << protos.total() << " converged, max iterations "
           << worst_iters << ", min target probability " << worst_prob << " (train acc "
           << train_acc << ")";
    report(6, "all seeds and cores converge with target probability >= 0.990", pass,
           detail.str());
}

// ---- criterion 7: brute-force metric equivalence ----

void criterion_7() {
    Rng rng(79);
    double worst_within = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        FeatureGroup fg(3, 7);
        std::vector<std::vector<std::vector<double>>> raw(3);
        for (std::size_t cls = 0; cls < 3; ++cls) {
            for (int i = 0; i < 5; ++i) {
                std::vector<double> v(7);
                for (auto& e : v) e = rng.uniform01() + 1e-3;
                fg.add(cls, v);
                raw[cls].push_back(std::move(v));
            }
        }
        const WithinStats stats = within_class_similarity(fg);

        // oracle: naive double loop over raw vector pairs
        double class_sum = 0.0;
        for (const auto& vectors : raw) {
            double pair_sum = 0.0;
            int pairs = 0;
            for (std::size_t i = 0; i < vectors.size(); ++i) {
                for (std::size_t j = 0; j < i; ++j) {
                    pair_sum += cos_sim(vectors[i], vectors[j]);
                    ++pairs;
                }
            }
            class_sum += pair_sum / pairs;
        }
        worst_within = std::max(worst_within, std::fabs(stats.mean - class_sum / 3.0));
    }

    // identical vectors per class, dyadic so both estimator routes are exact
    const std::vector<double> u1 = {0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0};
    const std::vector<double> u2 = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    const std::vector<double> u3 = {0.0, 0.5, 0.25, 0.25, 0.75, 0.25, 0.0};
    FeatureGroup identical(3, 7);
    std::vector<std::vector<std::vector<double>>> groups = {{u1, u1, u1, u1},
                                                            {u2, u2, u2, u2},
                                                            {u3, u3, u3, u3}};
    for (std::size_t cls = 0; cls < 3; ++cls) {
        for (const auto& v : groups[cls]) identical.add(cls, v);
    }
    const BetweenStats reduced = between_class_separation(identical);
    double all_pairs_sum = 0.0;
    int all_pairs = 0;
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            if (a == b) continue;
            for (const auto& va : groups[a]) {
                for (const auto& vb : groups[b]) {
                    all_pairs_sum += cos_sim(va, vb);
                    ++all_pairs;
                }
            }
        }
    }
    const double all_pairs_mean = all_pairs_sum / all_pairs;
    const bool pass = worst_within <= 1e-12 && reduced.cs_mean == all_pairs_mean;
    std::ostringstream detail;
    detail << "max |gram - naive| = " << worst_within << "; reduced " << reduced.cs_mean
           << (reduced.cs_mean == all_pairs_mean ? " == " : " != ") << "all-pairs "
           << all_pairs_mean;
    report(7, "gram m_in equals the naive loop; reduced m_bt equals all-pairs", pass,
           detail.str());
}

// ---- criterion 8: byte-identical outputs for repeated commands ----

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_8() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ps_acceptance_determinism";
    std::error_code ec;
    fs::remove_all(dir, ec);
    fs::create_directories(dir);

    auto path = [&](const char* name) { return (dir / name).string(); };
    bool pass = true;
    std::string detail = "model files, prototype sets, and reports byte-identical across reruns";

    for (int round = 0; round < 2; ++round) {
        const std::string tag = round == 0 ? "a" : "b";
        if (run_cli("gen-data --blobs --k 4 --per-class 50 --p 8 --seed 7 --out " +
                    path(("data_" + tag + ".csv").c_str())) != 0 ||
            run_cli("train --data " + path(("data_" + tag + ".csv").c_str()) +
                    " --spec mlp: --q 32 --epochs 50 --seed 1 --out " +
                    path(("model_" + tag + ".json").c_str())) != 0 ||
            run_cli("evaluate --model " + path(("model_" + tag + ".json").c_str()) +
                    " --seed 2 --out " + path(("report_" + tag + ".json").c_str()) + " --csv " +
                    path(("report_" + tag + ".csv").c_str()) + " --protos " +
                    path(("protos_" + tag + ".json").c_str())) != 0) {
            pass = false;
            detail = "a pipeline command failed";
            break;
        }
    }
    if (pass) {
        for (const char* name : {"data", "model", "report", "protos"}) {
            const std::string ext = std::string(name) == "data"
                                        ? ".csv"
                                        : (std::string(name) == "report" ? ".json" : ".json");
            const std::string a = slurp(dir / (std::string(name) + "_a" + ext));
            const std::string b = slurp(dir / (std::string(name) + "_b" + ext));
            if (a.empty() || a != b) {
                pass = false;
                detail = std::string(name) + " files differ between identical runs";
                break;
            }
        }
        if (pass) {
            const std::string a = slurp(dir / "report_a.csv");
            const std::string b = slurp(dir / "report_b.csv");
            if (a.empty() || a != b) {
                pass = false;
                detail = "report csv differs between identical runs";
            }
        }
    }
    fs::remove_all(dir, ec);
    report(8, "repeated commands produce byte-identical outputs", pass, detail);
}

}  // namespace

int main() {
    std::printf("acceptance suite (recipe: direct MLP p=8 q=32 k=4, blobs sep 10 spread 0.5)\n");
    criterion_1();
    criterion_2();
    const std::vector<SweepCell> cells = run_recipe_sweep();
    criterion_3(cells);
    criterion_4(cells);
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();

    if (g_failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria failed\n", g_failures);
    return 1;
}
