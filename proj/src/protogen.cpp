#include "protogen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace protoscope {

namespace {

constexpr double kStalledGradNorm = 1e-12;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool argmax_is(const Model& model, std::span<const double> m, std::size_t target) {
    auto probs = model.forward_full(m);
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[argmax]) argmax = i;
    }
    return argmax == target;
}

// Descend from m0 towards `target` until the loss threshold or the budget.
Prototype run_descent(const Model& model, std::vector<double> m0, std::size_t target,
                      std::int32_t origin, const ProtoConfig& cfg) {
    Prototype proto;
    proto.target_class = static_cast<std::int32_t>(target);
    proto.origin_class = origin;

    std::vector<double> m = std::move(m0);
    std::size_t steps = 0;
    for (;;) {
        StepResult result = prototype_step(model, m, target, cfg.eta);
        if (result.loss <= cfg.delta_loss) {
            proto.converged = argmax_is(model, m, target);
            proto.final_loss = result.loss;
            break;
        }
        if (steps >= cfg.max_iters || result.stalled) {
            proto.converged = false;
            proto.final_loss = result.loss;
            break;
        }
        m = std::move(result.next);
        ++steps;
    }
    proto.iterations = steps;
    proto.input = std::move(m);
    return proto;
}

}  // namespace

void ProtoConfig::validate() const {
    if (!(delta_loss > 0.0)) throw ConfigError("proto config: delta_loss must be > 0");
    if (!(eta > 0.0)) throw ConfigError("proto config: eta must be > 0");
    if (max_iters < 1) throw ConfigError("proto config: max_iters must be >= 1");
}

std::size_t PrototypeSet::converged_count() const {
    std::size_t n = 0;
    for (const Prototype& proto : seeds) n += proto.converged ? 1 : 0;
    for (const Prototype& proto : cores) n += proto.converged ? 1 : 0;
    return n;
}

const Prototype& PrototypeSet::at(std::size_t idx) const {
    if (idx < seeds.size()) return seeds[idx];
    idx -= seeds.size();
    if (idx >= cores.size()) throw UsageError("prototype index out of range");
    return cores[idx];
}

StepResult prototype_step(const Model& model, std::span<const double> m, std::size_t target,
                          double eta) {
    if (m.size() != model.spec().input_dim) {
        throw DimensionError("prototype_step: input length does not match model input_dim");
    }
    if (target >= model.spec().num_classes) {
        throw ConfigError("prototype_step: target class out of range");
    }

    Tape tape;
    Tensor input = Tensor::vec({m.begin(), m.end()}, true);
    Tensor loss = tape.cross_entropy(model.forward_full(tape, input), target);
    tape.backward(loss);

    auto grad = input.grad();
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    norm = std::sqrt(norm);

    StepResult result;
    result.loss = loss.value();
    result.stalled = norm < kStalledGradNorm;
    if (result.stalled) {
        result.next.assign(m.begin(), m.end());
        return result;
    }
    result.next.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) result.next[i] = m[i] - eta * grad[i] / norm;
    return result;
}

std::vector<Prototype> generate_seed_prototypes(const Model& model, const ProtoConfig& cfg) {
    cfg.validate();
    const std::size_t k = model.spec().num_classes;
    const std::size_t p = model.spec().input_dim;

    std::vector<Prototype> seeds;
    seeds.reserve(k);
    for (std::size_t target = 0; target < k; ++target) {
        Rng rng(mix_seed(cfg.seed, {0x5eedULL, target}));
        std::vector<double> start(p);
        for (auto& v : start) {
            v = cfg.init == InitDistribution::kStandardNormal ? rng.normal() : rng.uniform01();
        }
        seeds.push_back(run_descent(model, std::move(start), target, -1, cfg));
    }
    return seeds;
}

std::vector<Prototype> generate_core_prototypes(const Model& model,
                                                const std::vector<Prototype>& seeds,
                                                const ProtoConfig& cfg) {
    cfg.validate();
    const std::size_t k = model.spec().num_classes;
    if (seeds.size() != k) {
        throw ConfigError("core prototypes: expected one seed per class, got " +
                          std::to_string(seeds.size()));
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (seeds[c].target_class != static_cast<std::int32_t>(c)) {
            throw ConfigError("core prototypes: seeds are not ordered by class");
        }
    }

    std::vector<Prototype> cores;
    cores.reserve(k * (k - 1));
    for (std::size_t target = 0; target < k; ++target) {
        for (std::size_t origin = 0; origin < k; ++origin) {
            if (origin == target) continue;
            cores.push_back(run_descent(model, seeds[origin].input, target,
                                        static_cast<std::int32_t>(origin), cfg));
        }
    }
    return cores;
}

PrototypeSet generate_prototypes(const Model& model, const ProtoConfig& cfg) {
    PrototypeSet set;
    set.config = cfg;
    set.model_hash = model.hash();
    set.num_classes = model.spec().num_classes;
    set.input_dim = model.spec().input_dim;
    set.seeds = generate_seed_prototypes(model, cfg);
    set.cores = generate_core_prototypes(model, set.seeds, cfg);
    return set;
}

void save_prototypes(const PrototypeSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    out << "{\"version\":1,\"model_hash\":\"" << set.model_hash << "\",\"config\":{"
        << "\"delta_loss\":" << fmt_double(set.config.delta_loss)
        << ",\"eta\":" << fmt_double(set.config.eta) << ",\"max_iters\":" << set.config.max_iters
        << ",\"init\":\""
        << (set.config.init == InitDistribution::kStandardNormal ? "standard_normal" : "uniform01")
        << "\",\"seed\":" << set.config.seed << "},\"k\":" << set.num_classes
        << ",\"input_dim\":" << set.input_dim << ",\"prototypes\":[";

    bool first = true;
    auto write_proto = [&](const Prototype& proto) {
        if (!first) out << ",";
        first = false;
        out << "{\"target\":" << proto.target_class << ",\"origin\":";
        if (proto.is_seed()) {
            out << "null";
        } else {
            out << proto.origin_class;
        }
        out << ",\"converged\":" << (proto.converged ? "true" : "false")
            << ",\"final_loss\":" << fmt_double(proto.final_loss)
            << ",\"iterations\":" << proto.iterations << ",\"vector\":[";
        for (std::size_t i = 0; i < proto.input.size(); ++i) {
            if (i) out << ",";
            out << fmt_double(proto.input[i]);
        }
        out << "]}";
    };
    for (const Prototype& proto : set.seeds) write_proto(proto);
    for (const Prototype& proto : set.cores) write_proto(proto);
    out << "]}\n";
    if (!out) throw IoError("failed while writing '" + path + "'");
}

PrototypeSet load_prototypes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("prototype file '" + path + "': " + e.what());
    }

    auto require = [&](const nlohmann::json& obj, const char* field) -> const nlohmann::json& {
        if (!obj.contains(field)) {
            throw FormatError("prototype file '" + path + "': missing field '" + field + "'");
        }
        return obj.at(field);
    };

    if (require(doc, "version").get<int>() != 1) {
        throw FormatError("prototype file '" + path + "': unsupported version");
    }

    PrototypeSet set;
    set.model_hash = require(doc, "model_hash").get<std::string>();
    const auto& cfg = require(doc, "config");
    set.config.delta_loss = require(cfg, "delta_loss").get<double>();
    set.config.eta = require(cfg, "eta").get<double>();
    set.config.max_iters = require(cfg, "max_iters").get<std::size_t>();
    const std::string init = require(cfg, "init").get<std::string>();
    if (init == "standard_normal") {
        set.config.init = InitDistribution::kStandardNormal;
    } else if (init == "uniform01") {
        set.config.init = InitDistribution::kUniform01;
    } else {
        throw FormatError("prototype file '" + path + "': unknown init '" + init + "'");
    }
    set.config.seed = require(cfg, "seed").get<std::uint64_t>();
    set.num_classes = require(doc, "k").get<std::size_t>();
    set.input_dim = require(doc, "input_dim").get<std::size_t>();

    for (const auto& item : require(doc, "prototypes")) {
        Prototype proto;
        proto.target_class = require(item, "target").get<std::int32_t>();
        const auto& origin = require(item, "origin");
        proto.origin_class = origin.is_null() ? -1 : origin.get<std::int32_t>();
        proto.converged = require(item, "converged").get<bool>();
        proto.final_loss = require(item, "final_loss").get<double>();
        proto.iterations = require(item, "iterations").get<std::size_t>();
        proto.input = require(item, "vector").get<std::vector<double>>();
        if (proto.input.size() != set.input_dim) {
            throw FormatError("prototype file '" + path + "': vector length mismatch");
        }
        if (proto.target_class < 0 ||
            static_cast<std::size_t>(proto.target_class) >= set.num_classes) {
            throw FormatError("prototype file '" + path + "': target class out of range");
        }
        (proto.is_seed() ? set.seeds : set.cores).push_back(std::move(proto));
    }

    // structural completeness: one seed per class, every (target, origin) pair
    if (set.seeds.size() != set.num_classes) {
        throw FormatError("prototype file '" + path + "': expected one seed per class");
    }
    if (set.cores.size() != set.num_classes * (set.num_classes - 1)) {
        throw FormatError("prototype file '" + path + "': expected k(k-1) core prototypes");
    }
    std::vector<std::vector<bool>> seen(set.num_classes,
                                        std::vector<bool>(set.num_classes, false));
    for (std::size_t c = 0; c < set.num_classes; ++c) {
        if (set.seeds[c].target_class != static_cast<std::int32_t>(c)) {
            throw FormatError("prototype file '" + path + "': seeds out of order");
        }
    }
    for (const Prototype& proto : set.cores) {
        const auto target = static_cast<std::size_t>(proto.target_class);
        if (proto.origin_class < 0 ||
            static_cast<std::size_t>(proto.origin_class) >= set.num_classes ||
            proto.origin_class == proto.target_class) {
            throw FormatError("prototype file '" + path + "': bad core origin");
        }
        const auto origin = static_cast<std::size_t>(proto.origin_class);
        if (seen[target][origin]) {
            throw FormatError("prototype file '" + path + "': duplicate core (target, origin)");
        }
        seen[target][origin] = true;
    }
    return set;
}

}  // namespace protoscope
