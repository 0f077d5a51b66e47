#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tensor.hpp"

namespace protoscope {

// Hidden-layer descriptors. A conv stage, when present, must be the first
// entry: the input vector is interpreted as a single-channel square image.
struct DenseSpec {
    std::size_t width;
    bool operator==(const DenseSpec&) const = default;
};
struct ConvSpec {
    std::size_t channels;
    std::size_t kernel;
    std::size_t stride;
    bool operator==(const ConvSpec&) const = default;
};
using LayerSpec = std::variant<DenseSpec, ConvSpec>;

struct NetworkSpec {
    std::size_t input_dim = 0;    // p
    std::size_t feature_dim = 0;  // q, dimension of the feature tap
    std::size_t num_classes = 0;  // k
    std::vector<LayerSpec> hidden;
    std::uint64_t seed = 0;

    // ConfigError when p < 1, k < 2, q < k, any width < 1, or a conv stage
    // is misplaced / does not tile the input.
    void validate() const;
};

// Parses the CLI descriptor grammar for hidden layers:
//   "mlp:16,8"            two dense hidden layers
//   "mlp:"                no hidden layer (extractor is one affine+relu)
//   "conv:c4k3s1+mlp:16"  conv stage (4 channels, 3x3 kernel, stride 1) first
std::vector<LayerSpec> parse_hidden_spec(const std::string& text);

// f = h(g(x)): extractor layers (all relu-activated, the last one projecting
// to the q-dimensional feature space) followed by one affine classifier and
// softmax. Immutable after construction except through the trainer.
class Model {
public:
    struct DenseLayer {
        Tensor weight;  // {out,in}
        Tensor bias;    // {out}
    };
    struct ConvLayer {
        Tensor kernel;  // {O,C,K,K}
        Tensor bias;    // {O}
        std::size_t stride;
        std::size_t in_side;  // input interpreted as {1, in_side, in_side}
    };
    using Layer = std::variant<DenseLayer, ConvLayer>;

    const NetworkSpec& spec() const { return spec_; }
    const std::vector<Layer>& extractor() const { return extractor_; }
    const Tensor& classifier_weight() const { return classifier_weight_; }
    const Tensor& classifier_bias() const { return classifier_bias_; }

    // v = g(x): q-dimensional, elementwise >= 0 (relu output)
    Tensor extract_features(Tape& tape, const Tensor& x) const;
    // class probability vector, sums to 1
    Tensor forward_full(Tape& tape, const Tensor& x) const;

    std::vector<double> extract_features(std::span<const double> x) const;
    std::vector<double> forward_full(std::span<const double> x) const;

    // every parameter tensor in declared layer order, classifier last
    std::vector<Tensor> parameters() const;
    // stable names matching parameters(): extractor.<i>.weight / .bias,
    // classifier.weight / classifier.bias
    std::vector<std::string> parameter_names() const;

    // FNV-1a over the spec and raw parameter bytes, as 16 hex digits
    std::string hash() const;

    friend Model build_model(const NetworkSpec& spec);
    friend Model load_model(const std::string& path);

private:
    NetworkSpec spec_;
    std::vector<Layer> extractor_;
    Tensor classifier_weight_;
    Tensor classifier_bias_;

    Tensor check_input(const Tensor& x) const;
};

// Deterministic He-style initialization from spec.seed; biases start at zero.
Model build_model(const NetworkSpec& spec);

// JSON model file: {"version":1,"spec":{...},"params":{name:[...]}} with
// parameter values printed to 17 significant digits (exact round trip).
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace protoscope
