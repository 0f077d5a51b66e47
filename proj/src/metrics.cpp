#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "errors.hpp"

namespace protoscope {

namespace {

constexpr double kZeroNorm = 1e-12;
constexpr double kPi = 3.141592653589793238462643383279502884;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double sample_stddev(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

}  // namespace

double cos_sim(std::span<const double> v1, std::span<const double> v2) {
    if (v1.size() != v2.size()) throw DimensionError("cos_sim: vectors differ in length");
    const double n1 = norm(v1);
    const double n2 = norm(v2);
    if (n1 < kZeroNorm || n2 < kZeroNorm) {
        throw UndefinedSimilarityError("cos_sim: vector norm below 1e-12");
    }
    return dot(v1, v2) / (n1 * n2);
}

FeatureGroup::FeatureGroup(std::size_t num_classes, std::size_t dim)
    : dim_(dim), classes_(num_classes) {
    if (num_classes < 2) throw ConfigError("feature group: need at least 2 classes");
    if (dim < 1) throw ConfigError("feature group: dimension must be >= 1");
}

bool FeatureGroup::add(std::size_t cls, std::span<const double> raw) {
    if (cls >= classes_.size()) throw ConfigError("feature group: class index out of range");
    if (raw.size() != dim_) throw DimensionError("feature group: vector has wrong dimension");
    const double n = norm(raw);
    if (n < kZeroNorm) {
        ++excluded_zero_;
        return false;
    }
    auto& store = classes_[cls];
    store.reserve(store.size() + dim_);
    for (double v : raw) store.push_back(v / n);
    return true;
}

OrthogonalityResult classifier_orthogonality(const Tensor& w) {
    if (w.shape().size() != 2) throw DimensionError("orthogonality: expected a k x q matrix");
    const std::size_t k = w.shape()[0];
    const std::size_t q = w.shape()[1];
    if (k < 2) throw ConfigError("orthogonality: need at least 2 weight rows");

    auto data = w.data();
    auto row = [&](std::size_t i) { return std::span<const double>{data.data() + i * q, q}; };
    for (std::size_t i = 0; i < k; ++i) {
        if (norm(row(i)) < kZeroNorm) {
            throw UndefinedSimilarityError("orthogonality: weight row " + std::to_string(i) +
                                           " is zero");
        }
    }

    double cos_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < i; ++j) cos_sum += cos_sim(row(i), row(j));
    }
    const double pairs = static_cast<double>(k * (k - 1)) / 2.0;
    const double mean_cos = cos_sum / pairs;

    OrthogonalityResult result;
    result.mean_cosine = mean_cos;
    result.h_w = 1.0 - mean_cos;
    result.mean_angle_deg = std::acos(std::clamp(mean_cos, -1.0, 1.0)) * 180.0 / kPi;
    return result;
}

WithinStats within_class_similarity(const FeatureGroup& fg) {
    const std::size_t k = fg.num_classes();
    WithinStats stats;
    stats.per_class.reserve(k);
    std::vector<double> pooled;

    for (std::size_t cls = 0; cls < k; ++cls) {
        const std::size_t n = fg.count(cls);
        if (n < 2) {
            throw ConfigError("within-class similarity: class " + std::to_string(cls) + " has " +
                              std::to_string(n) + " usable vectors, need at least 2");
        }
        // Gram matrix of the unit rows; rows are unit vectors so the diagonal
        // is 1 and the off-diagonal upper triangle holds the pairwise cosines.
        std::vector<double> gram(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                gram[i * n + j] = dot(fg.row(cls, i), fg.row(cls, j));
            }
        }
        double tri_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                tri_sum += gram[i * n + j];
                pooled.push_back(gram[i * n + j]);
            }
        }
        const double pairs = static_cast<double>(n * (n - 1)) / 2.0;
        stats.per_class.push_back(tri_sum / pairs);
    }

    double mean = 0.0;
    for (double v : stats.per_class) mean += v;
    stats.mean = mean / static_cast<double>(k);
    stats.stddev = sample_stddev(pooled);
    return stats;
}

BetweenStats between_class_separation(const FeatureGroup& fg) {
    const std::size_t k = fg.num_classes();
    const std::size_t dim = fg.dim();

    // mean of each class's unit vectors, renormalized so every dot product
    // below is a true cosine
    std::vector<std::vector<double>> mean_vectors(k, std::vector<double>(dim, 0.0));
    for (std::size_t cls = 0; cls < k; ++cls) {
        const std::size_t n = fg.count(cls);
        if (n < 1) {
            throw ConfigError("between-class separation: class " + std::to_string(cls) +
                              " has no usable vectors");
        }
        auto& mv = mean_vectors[cls];
        for (std::size_t i = 0; i < n; ++i) {
            auto r = fg.row(cls, i);
            for (std::size_t d = 0; d < dim; ++d) mv[d] += r[d];
        }
        for (double& v : mv) v /= static_cast<double>(n);
        const double mn = norm(mv);
        if (mn < kZeroNorm) {
            throw UndefinedSimilarityError("between-class separation: class " +
                                           std::to_string(cls) + " mean vector is zero");
        }
        for (double& v : mv) v /= mn;
    }

    std::vector<double> pooled;
    double pair_mean_sum = 0.0;
    std::size_t pair_count = 0;
    for (std::size_t l = 0; l < k; ++l) {
        for (std::size_t other = 0; other < k; ++other) {
            if (other == l) continue;
            const std::size_t n = fg.count(other);
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double c = dot(fg.row(other, j), mean_vectors[l]);
                acc += c;
                pooled.push_back(c);
            }
            pair_mean_sum += acc / static_cast<double>(n);
            ++pair_count;
        }
    }

    BetweenStats stats;
    stats.cs_mean = pair_mean_sum / static_cast<double>(pair_count);
    stats.cs_std = sample_stddev(pooled);
    stats.m_bt = 1.0 - stats.cs_mean;
    return stats;
}

Bounds accuracy_bounds(double m_in_mean, double m_in_std, double bt_cs_mean, double bt_cs_std) {
    Bounds bounds;
    bounds.upper = m_in_mean - 2.0 * m_in_std;
    bounds.lower = 1.0 - (bt_cs_mean + 2.0 * bt_cs_std);
    bounds.upper_clamped = std::clamp(bounds.upper, 0.0, 1.0);
    bounds.lower_clamped = std::clamp(bounds.lower, 0.0, 1.0);
    bounds.clamped =
        bounds.upper_clamped != bounds.upper || bounds.lower_clamped != bounds.lower;
    return bounds;
}

std::string MetricReport::to_json() const {
    std::ostringstream out;
    out << "{\"h_w\":" << fmt_double(h_w)
        << ",\"mean_weight_angle_deg\":" << fmt_double(mean_weight_angle_deg)
        << ",\"m_in_mean\":" << fmt_double(m_in_mean) << ",\"m_in_std\":" << fmt_double(m_in_std)
        << ",\"m_in_per_class\":[";
    for (std::size_t i = 0; i < m_in_per_class.size(); ++i) {
        if (i) out << ",";
        out << fmt_double(m_in_per_class[i]);
    }
    out << "],\"bt_cossim_mean\":" << fmt_double(bt_cossim_mean)
        << ",\"bt_cossim_std\":" << fmt_double(bt_cossim_std) << ",\"m_bt\":" << fmt_double(m_bt)
        << ",\"upper_bound\":" << fmt_double(upper_bound)
        << ",\"lower_bound\":" << fmt_double(lower_bound)
        << ",\"upper_bound_clamped\":" << fmt_double(upper_bound_clamped)
        << ",\"lower_bound_clamped\":" << fmt_double(lower_bound_clamped)
        << ",\"bounds_clamped\":" << (bounds_clamped ? "true" : "false")
        << ",\"excluded_zero_features\":" << excluded_zero_features
        << ",\"excluded_unconverged\":" << excluded_unconverged;
    if (fraction) out << ",\"fraction\":" << fmt_double(*fraction);
    if (accuracy) out << ",\"accuracy\":" << fmt_double(*accuracy);
    out << "}";
    return out.str();
}

std::string MetricReport::to_csv(bool with_header) const {
    std::ostringstream out;
    if (with_header) {
        out << "fraction,m_in,in_std,upper,cs_bt,bt_std,cs_bt_plus_2std,m_bt_lower,accuracy\n";
    }
    if (fraction) out << fmt_double(*fraction);
    out << ',' << fmt_double(m_in_mean) << ',' << fmt_double(m_in_std) << ','
        << fmt_double(upper_bound_clamped) << ',' << fmt_double(bt_cossim_mean) << ','
        << fmt_double(bt_cossim_std) << ',' << fmt_double(bt_cossim_mean + 2.0 * bt_cossim_std)
        << ',' << fmt_double(lower_bound_clamped) << ',';
    if (accuracy) out << fmt_double(*accuracy);
    out << '\n';
    return out.str();
}

MetricReport evaluate_dataless(const Model& model, const PrototypeSet& protos) {
    const std::size_t k = model.spec().num_classes;
    if (protos.num_classes != k) {
        throw ConfigError("evaluate: prototype set has " + std::to_string(protos.num_classes) +
                          " classes, model expects " + std::to_string(k));
    }
    if (protos.input_dim != model.spec().input_dim) {
        throw ConfigError("evaluate: prototype input dimension does not match the model");
    }
    if (protos.seeds.size() != k || protos.cores.size() != k * (k - 1)) {
        throw ConfigError("evaluate: prototype set is structurally incomplete");
    }
    if (!protos.model_hash.empty() && protos.model_hash != model.hash()) {
        throw ConfigError("evaluate: prototype set was generated from model " +
                          protos.model_hash + ", not from this model (" + model.hash() + ")");
    }

    MetricReport report;
    FeatureGroup features(k, model.spec().feature_dim);
    auto feed = [&](const Prototype& proto) {
        if (!proto.converged) {
            ++report.excluded_unconverged;
            return;
        }
        features.add(static_cast<std::size_t>(proto.target_class),
                     model.extract_features(proto.input));
    };
    for (const Prototype& proto : protos.seeds) feed(proto);
    for (const Prototype& proto : protos.cores) feed(proto);
    report.excluded_zero_features = static_cast<std::int64_t>(features.excluded_zero());

    std::string starving;
    for (std::size_t cls = 0; cls < k; ++cls) {
        if (features.count(cls) < 2) {
            starving += (starving.empty() ? "" : ", ") + std::to_string(cls);
        }
    }
    if (!starving.empty()) {
        throw EvaluationError("evaluate: classes [" + starving +
                              "] have fewer than 2 usable prototypes");
    }

    const OrthogonalityResult ortho = classifier_orthogonality(model.classifier_weight());
    report.h_w = ortho.h_w;
    report.mean_weight_angle_deg = ortho.mean_angle_deg;

    const WithinStats within = within_class_similarity(features);
    report.m_in_mean = within.mean;
    report.m_in_std = within.stddev;
    report.m_in_per_class = within.per_class;

    const BetweenStats between = between_class_separation(features);
    report.bt_cossim_mean = between.cs_mean;
    report.bt_cossim_std = between.cs_std;
    report.m_bt = between.m_bt;

    const Bounds bounds =
        accuracy_bounds(within.mean, within.stddev, between.cs_mean, between.cs_std);
    report.upper_bound = bounds.upper;
    report.lower_bound = bounds.lower;
    report.upper_bound_clamped = bounds.upper_clamped;
    report.lower_bound_clamped = bounds.lower_clamped;
    report.bounds_clamped = bounds.clamped;
    return report;
}

}  // namespace protoscope
