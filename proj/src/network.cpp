#include "network.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace protoscope {

namespace {

// 17 significant digits: enough for an exact double round trip.
std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::size_t square_side(std::size_t p) {
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(p))));
    return side * side == p ? side : 0;
}

std::uint64_t fnv1a(std::uint64_t h, const void* bytes, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v) { return fnv1a(h, &v, sizeof(v)); }

}  // namespace

void NetworkSpec::validate() const {
    if (input_dim < 1) throw ConfigError("network spec: input_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("network spec: num_classes must be >= 2");
    if (feature_dim < num_classes) {
        throw ConfigError("network spec: feature_dim (" + std::to_string(feature_dim) +
                          ") must be >= num_classes (" + std::to_string(num_classes) + ")");
    }
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (const auto* dense = std::get_if<DenseSpec>(&hidden[i])) {
            if (dense->width < 1) throw ConfigError("network spec: hidden widths must be >= 1");
        } else {
            const auto& conv = std::get<ConvSpec>(hidden[i]);
            if (i != 0) throw ConfigError("network spec: a conv stage must be the first layer");
            if (conv.channels < 1 || conv.kernel < 1 || conv.stride < 1) {
                throw ConfigError("network spec: conv channels/kernel/stride must be >= 1");
            }
            const std::size_t side = square_side(input_dim);
            if (side == 0) {
                throw ConfigError("network spec: conv stage needs a square input, got input_dim " +
                                  std::to_string(input_dim));
            }
            if (conv.kernel > side) {
                throw ConfigError("network spec: conv kernel exceeds input side " +
                                  std::to_string(side));
            }
        }
    }
}

std::vector<LayerSpec> parse_hidden_spec(const std::string& text) {
    std::vector<LayerSpec> layers;
    std::stringstream stream(text);
    std::string segment;
    while (std::getline(stream, segment, '+')) {
        if (segment.rfind("mlp:", 0) == 0) {
            std::string widths = segment.substr(4);
            if (widths.empty()) continue;
            std::stringstream ws(widths);
            std::string item;
            while (std::getline(ws, item, ',')) {
                std::size_t w = 0;
                auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), w);
                if (ec != std::errc() || ptr != item.data() + item.size() || w == 0) {
                    throw ParseError("spec: bad dense width '" + item + "' in '" + text + "'");
                }
                layers.push_back(DenseSpec{w});
            }
        } else if (segment.rfind("conv:", 0) == 0) {
            // conv:c<channels>k<kernel>s<stride>
            ConvSpec conv{};
            unsigned c = 0, k = 0, s = 0;
            if (std::sscanf(segment.c_str(), "conv:c%uk%us%u", &c, &k, &s) != 3 || !c || !k || !s) {
                throw ParseError("spec: bad conv descriptor '" + segment +
                                 "', expected conv:c<n>k<n>s<n>");
            }
            conv.channels = c;
            conv.kernel = k;
            conv.stride = s;
            layers.push_back(conv);
        } else {
            throw ParseError("spec: unknown segment '" + segment + "' in '" + text + "'");
        }
    }
    return layers;
}

Model build_model(const NetworkSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    auto he_tensor = [&rng](std::vector<std::size_t> shape, std::size_t fan_in) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        std::vector<double> values(n);
        for (auto& v : values) v = rng.normal(0.0, scale);
        return Tensor::from_data(std::move(shape), std::move(values), true);
    };

    Model model;
    model.spec_ = spec;

    std::size_t dim = spec.input_dim;
    for (const LayerSpec& layer : spec.hidden) {
        if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
            Model::DenseLayer built;
            built.weight = he_tensor({dense->width, dim}, dim);
            built.bias = Tensor::zeros({dense->width}, true);
            model.extractor_.push_back(std::move(built));
            dim = dense->width;
        } else {
            const auto& conv = std::get<ConvSpec>(layer);
            const std::size_t side = square_side(dim);
            Model::ConvLayer built;
            built.kernel = he_tensor({conv.channels, 1, conv.kernel, conv.kernel},
                                     conv.kernel * conv.kernel);
            built.bias = Tensor::zeros({conv.channels}, true);
            built.stride = conv.stride;
            built.in_side = side;
            const std::size_t out_side = (side - conv.kernel) / conv.stride + 1;
            dim = conv.channels * out_side * out_side;
            model.extractor_.push_back(std::move(built));
        }
    }
    // feature layer: exactly q relu units
    Model::DenseLayer feature_layer;
    feature_layer.weight = he_tensor({spec.feature_dim, dim}, dim);
    feature_layer.bias = Tensor::zeros({spec.feature_dim}, true);
    model.extractor_.push_back(std::move(feature_layer));

    model.classifier_weight_ = he_tensor({spec.num_classes, spec.feature_dim}, spec.feature_dim);
    model.classifier_bias_ = Tensor::zeros({spec.num_classes}, true);
    return model;
}

Tensor Model::check_input(const Tensor& x) const {
    if (x.shape().size() != 1 || x.shape()[0] != spec_.input_dim) {
        throw DimensionError("model: input must be a vector of length " +
                             std::to_string(spec_.input_dim));
    }
    return x;
}

Tensor Model::extract_features(Tape& tape, const Tensor& x) const {
    Tensor h = check_input(x);
    for (const Layer& layer : extractor_) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            h = tape.relu(tape.affine(h, dense->weight, dense->bias));
        } else {
            const auto& conv = std::get<ConvLayer>(layer);
            Tensor img = tape.reshape(h, {1, conv.in_side, conv.in_side});
            Tensor mapped = tape.relu(tape.conv2d(img, conv.kernel, conv.bias, conv.stride));
            h = tape.reshape(mapped, {mapped.size()});
        }
    }
    return h;
}

Tensor Model::forward_full(Tape& tape, const Tensor& x) const {
    return tape.softmax(tape.affine(extract_features(tape, x), classifier_weight_, classifier_bias_));
}

std::vector<double> Model::extract_features(std::span<const double> x) const {
    Tape tape;
    Tensor out = extract_features(tape, Tensor::vec({x.begin(), x.end()}));
    return {out.data().begin(), out.data().end()};
}

std::vector<double> Model::forward_full(std::span<const double> x) const {
    Tape tape;
    Tensor out = forward_full(tape, Tensor::vec({x.begin(), x.end()}));
    return {out.data().begin(), out.data().end()};
}

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> params;
    for (const Layer& layer : extractor_) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            params.push_back(dense->weight);
            params.push_back(dense->bias);
        } else {
            const auto& conv = std::get<ConvLayer>(layer);
            params.push_back(conv.kernel);
            params.push_back(conv.bias);
        }
    }
    params.push_back(classifier_weight_);
    params.push_back(classifier_bias_);
    return params;
}

std::vector<std::string> Model::parameter_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < extractor_.size(); ++i) {
        names.push_back("extractor." + std::to_string(i) + ".weight");
        names.push_back("extractor." + std::to_string(i) + ".bias");
    }
    names.push_back("classifier.weight");
    names.push_back("classifier.bias");
    return names;
}

std::string Model::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a_u64(h, spec_.input_dim);
    h = fnv1a_u64(h, spec_.feature_dim);
    h = fnv1a_u64(h, spec_.num_classes);
    h = fnv1a_u64(h, spec_.seed);
    for (const LayerSpec& layer : spec_.hidden) {
        if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
            h = fnv1a_u64(h, 1);
            h = fnv1a_u64(h, dense->width);
        } else {
            const auto& conv = std::get<ConvSpec>(layer);
            h = fnv1a_u64(h, 2);
            h = fnv1a_u64(h, conv.channels);
            h = fnv1a_u64(h, conv.kernel);
            h = fnv1a_u64(h, conv.stride);
        }
    }
    for (const Tensor& param : parameters()) {
        auto d = param.data();
        h = fnv1a(h, d.data(), d.size() * sizeof(double));
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    const NetworkSpec& spec = model.spec();
    out << "{\"version\":1,\"spec\":{\"p\":" << spec.input_dim << ",\"q\":" << spec.feature_dim
        << ",\"k\":" << spec.num_classes << ",\"hidden\":[";
    for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
        if (i) out << ",";
        if (const auto* dense = std::get_if<DenseSpec>(&spec.hidden[i])) {
            out << dense->width;
        } else {
            const auto& conv = std::get<ConvSpec>(spec.hidden[i]);
            out << "{\"channels\":" << conv.channels << ",\"kernel\":" << conv.kernel
                << ",\"stride\":" << conv.stride << "}";
        }
    }
    out << "],\"seed\":" << spec.seed << "},\"params\":{";

    const auto params = model.parameters();
    const auto names = model.parameter_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out << ",";
        out << "\"" << names[i] << "\":[";
        auto d = params[i].data();
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (j) out << ",";
            out << fmt_double(d[j]);
        }
        out << "]";
    }
    out << "}}\n";
    if (!out) throw IoError("failed while writing '" + path + "'");
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model file '" + path + "': " + e.what());
    }

    auto require = [&](const nlohmann::json& obj, const char* field) -> const nlohmann::json& {
        if (!obj.contains(field)) {
            throw FormatError("model file '" + path + "': missing field '" + field + "'");
        }
        return obj.at(field);
    };

    if (require(doc, "version").get<int>() != 1) {
        throw FormatError("model file '" + path + "': unsupported version");
    }
    const auto& spec_json = require(doc, "spec");
    NetworkSpec spec;
    spec.input_dim = require(spec_json, "p").get<std::size_t>();
    spec.feature_dim = require(spec_json, "q").get<std::size_t>();
    spec.num_classes = require(spec_json, "k").get<std::size_t>();
    spec.seed = require(spec_json, "seed").get<std::uint64_t>();
    for (const auto& item : require(spec_json, "hidden")) {
        if (item.is_number_unsigned()) {
            spec.hidden.push_back(DenseSpec{item.get<std::size_t>()});
        } else if (item.is_object()) {
            ConvSpec conv;
            conv.channels = require(item, "channels").get<std::size_t>();
            conv.kernel = require(item, "kernel").get<std::size_t>();
            conv.stride = require(item, "stride").get<std::size_t>();
            spec.hidden.push_back(conv);
        } else {
            throw FormatError("model file '" + path + "': bad hidden layer entry");
        }
    }
    spec.validate();

    // Build a skeleton with the right shapes, then overwrite every parameter.
    Model model = build_model(spec);
    const auto params = model.parameters();
    const auto names = model.parameter_names();
    const auto& params_json = require(doc, "params");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params_json.contains(names[i])) {
            throw FormatError("model file '" + path + "': missing param '" + names[i] + "'");
        }
        const auto& arr = params_json.at(names[i]);
        if (!arr.is_array() || arr.size() != params[i].size()) {
            throw FormatError("model file '" + path + "': param '" + names[i] + "' expects " +
                              std::to_string(params[i].size()) + " values");
        }
        Tensor tensor = params[i];
        auto dst = tensor.data_mut();
        for (std::size_t j = 0; j < arr.size(); ++j) {
            if (!arr[j].is_number()) {
                throw FormatError("model file '" + path + "': param '" + names[i] +
                                  "' has a non-numeric entry");
            }
            const double v = arr[j].get<double>();
            if (!std::isfinite(v)) {
                throw FormatError("model file '" + path + "': param '" + names[i] +
                                  "' has a non-finite entry");
            }
            dst[j] = v;
        }
    }
    return model;
}

}  // namespace protoscope
