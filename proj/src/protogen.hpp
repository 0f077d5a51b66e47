#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "network.hpp"

namespace protoscope {

enum class InitDistribution { kStandardNormal, kUniform01 };

struct ProtoConfig {
    double delta_loss = 0.01;  // terminate when -log p_target falls below this
    double eta = 0.05;         // Euclidean length of every update step
    std::size_t max_iters = 2000;
    InitDistribution init = InitDistribution::kStandardNormal;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Prototype {
    std::vector<double> input;         // length p
    std::int32_t target_class = 0;
    std::int32_t origin_class = -1;    // -1 for seeds, j for cores grown from seed j
    double final_loss = 0.0;
    std::size_t iterations = 0;        // update steps taken
    bool converged = false;

    bool is_seed() const { return origin_class < 0; }
};

// k seeds (one per class) followed by k(k-1) cores (target-major, origins
// ascending, origin != target). Structurally complete even when some entries
// did not converge.
struct PrototypeSet {
    ProtoConfig config;
    std::string model_hash;
    std::size_t num_classes = 0;
    std::size_t input_dim = 0;
    std::vector<Prototype> seeds;
    std::vector<Prototype> cores;

    std::size_t total() const { return seeds.size() + cores.size(); }
    std::size_t converged_count() const;
    const Prototype& at(std::size_t idx) const;  // seeds then cores
};

struct StepResult {
    std::vector<double> next;  // m - eta * grad / ||grad||; == m when stalled
    double loss;               // cross-entropy at m, before the step
    bool stalled;              // ||grad|| < 1e-12
};

// One normalized-gradient descent step on the input; the step length is
// exactly eta unless the gradient has stalled.
StepResult prototype_step(const Model& model, std::span<const double> m, std::size_t target,
                          double eta);

// Descend from a per-class random start until loss <= delta_loss or the
// iteration budget runs out. RNG streams are derived per (seed, class), so
// results do not depend on generation order.
std::vector<Prototype> generate_seed_prototypes(const Model& model, const ProtoConfig& cfg);

// Descend towards each target class starting from every other class's seed.
std::vector<Prototype> generate_core_prototypes(const Model& model,
                                                const std::vector<Prototype>& seeds,
                                                const ProtoConfig& cfg);

// Algorithm pair end to end: seeds, then cores.
PrototypeSet generate_prototypes(const Model& model, const ProtoConfig& cfg);

void save_prototypes(const PrototypeSet& set, const std::string& path);
PrototypeSet load_prototypes(const std::string& path);

}  // namespace protoscope
