#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "errors.hpp"
#include "network.hpp"
#include "rng.hpp"

using namespace protoscope;

namespace {

NetworkSpec tiny_spec() {
    NetworkSpec spec;
    spec.input_dim = 2;
    spec.feature_dim = 8;
    spec.num_classes = 2;
    spec.hidden = {DenseSpec{16}};
    spec.seed = 7;
    return spec;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("spec validation") {
    NetworkSpec spec = tiny_spec();
    CHECK_NOTHROW(spec.validate());

    spec.feature_dim = 1;  // q < k
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = tiny_spec();
    spec.num_classes = 1;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = tiny_spec();
    spec.hidden = {DenseSpec{16}, ConvSpec{2, 2, 1}};  // conv not first
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = tiny_spec();
    spec.input_dim = 3;  // not square
    spec.hidden = {ConvSpec{2, 2, 1}};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("hidden spec grammar") {
    CHECK(parse_hidden_spec("mlp:16,8") == std::vector<LayerSpec>{DenseSpec{16}, DenseSpec{8}});
    CHECK(parse_hidden_spec("mlp:").empty());
    CHECK(parse_hidden_spec("conv:c4k3s1+mlp:16") ==
          std::vector<LayerSpec>{ConvSpec{4, 3, 1}, DenseSpec{16}});
    CHECK_THROWS_AS(parse_hidden_spec("mlp:abc"), ParseError);
    CHECK_THROWS_AS(parse_hidden_spec("dense:4"), ParseError);
    CHECK_THROWS_AS(parse_hidden_spec("conv:4x3"), ParseError);
}

TEST_CASE("build is deterministic and shapes match the spec") {
    Model a = build_model(tiny_spec());
    Model b = build_model(tiny_spec());
    auto pa = a.parameters();
    auto pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i].size() == pb[i].size());
        for (std::size_t j = 0; j < pa[i].size(); ++j) CHECK(pa[i].data()[j] == pb[i].data()[j]);
    }

    CHECK(a.classifier_weight().shape() == std::vector<std::size_t>{2, 8});
    CHECK(a.classifier_bias().shape() == std::vector<std::size_t>{2});
    CHECK(a.hash() == b.hash());

    NetworkSpec other = tiny_spec();
    other.seed = 8;
    CHECK(build_model(other).hash() != a.hash());
}

TEST_CASE("fresh model scores at chance on balanced two-class data") {
    Model model = build_model(tiny_spec());
    Rng rng(99);
    int correct = 0;
    const int n = 500;
    for (int i = 0; i < n; ++i) {
        std::vector<double> x{rng.normal(), rng.normal()};
        auto probs = model.forward_full(x);
        const std::size_t pred = probs[0] >= probs[1] ? 0 : 1;
        const std::size_t label = static_cast<std::size_t>(i % 2);
        if (pred == label) ++correct;
    }
    const double acc = static_cast<double>(correct) / n;
    CHECK(acc > 0.35);
    CHECK(acc < 0.65);
}

TEST_CASE("features are relu outputs: length q and nonnegative") {
    Model model = build_model(tiny_spec());
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x{rng.normal(0.0, 3.0), rng.normal(0.0, 3.0)};
        auto v = model.extract_features(x);
        REQUIRE(v.size() == 8);
        for (double e : v) CHECK(e >= 0.0);
    }
}

TEST_CASE("zero weights in the feature layer reduce features to relu(bias)") {
    Model model = build_model(tiny_spec());
    auto& layer = std::get<Model::DenseLayer>(const_cast<std::vector<Model::Layer>&>(model.extractor())[1]);
    for (auto& v : layer.weight.data_mut()) v = 0.0;
    auto bias = layer.bias.data_mut();
    bias[0] = 1.5;
    bias[1] = -2.0;

    auto v = model.extract_features(std::vector<double>{0.3, -0.7});
    CHECK(v[0] == 1.5);
    CHECK(v[1] == 0.0);
    for (std::size_t i = 2; i < v.size(); ++i) CHECK(v[i] == 0.0);
}

TEST_CASE("forward_full is exactly softmax(affine(features))") {
    Model model = build_model(tiny_spec());
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x{rng.normal(), rng.normal()};
        auto probs = model.forward_full(x);

        Tape tape;
        Tensor feats = Tensor::vec(model.extract_features(x));
        Tensor composed =
            tape.softmax(tape.affine(feats, model.classifier_weight(), model.classifier_bias()));

        double total = 0.0;
        std::size_t argmax = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            CHECK(probs[i] == composed[i]);  // bit-exact decomposition
            total += probs[i];
            if (probs[i] > probs[argmax]) argmax = i;
        }
        CHECK(std::fabs(total - 1.0) <= 1e-12);
        CHECK(argmax < 2);
    }
}

TEST_CASE("model round-trips through its file format") {
    Model model = build_model(tiny_spec());
    const auto path = temp_file("ps_model_roundtrip.json");
    save_model(model, path.string());
    Model loaded = load_model(path.string());

    CHECK(loaded.hash() == model.hash());
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x{rng.normal(), rng.normal()};
        auto a = model.forward_full(x);
        auto b = loaded.forward_full(x);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("conv model round-trips and runs") {
    NetworkSpec spec;
    spec.input_dim = 16;  // 4x4
    spec.feature_dim = 6;
    spec.num_classes = 3;
    spec.hidden = {ConvSpec{2, 3, 1}, DenseSpec{5}};
    spec.seed = 21;
    Model model = build_model(spec);

    auto v = model.extract_features(std::vector<double>(16, 0.25));
    REQUIRE(v.size() == 6);

    const auto path = temp_file("ps_model_conv.json");
    save_model(model, path.string());
    Model loaded = load_model(path.string());
    CHECK(loaded.hash() == model.hash());
    std::filesystem::remove(path);
}

TEST_CASE("truncated model files are rejected outright") {
    Model model = build_model(tiny_spec());
    const auto path = temp_file("ps_model_truncated.json");
    save_model(model, path.string());

    std::ifstream in(path, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text.substr(0, text.size() / 2);
    out.close();

    CHECK_THROWS_AS(load_model(path.string()), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("model files with q < k fail validation") {
    const auto path = temp_file("ps_model_badspec.json");
    std::ofstream out(path);
    out << R"({"version":1,"spec":{"p":2,"q":1,"k":2,"hidden":[],"seed":0},"params":{}})";
    out.close();
    CHECK_THROWS_AS(load_model(path.string()), ConfigError);
    std::filesystem::remove(path);
}

TEST_CASE("model files with missing params are rejected") {
    const auto path = temp_file("ps_model_missing.json");
    std::ofstream out(path);
    out << R"({"version":1,"spec":{"p":2,"q":2,"k":2,"hidden":[],"seed":0},"params":{}})";
    out.close();
    CHECK_THROWS_AS(load_model(path.string()), FormatError);
    std::filesystem::remove(path);
}
