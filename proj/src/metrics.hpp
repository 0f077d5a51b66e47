#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "network.hpp"
#include "protogen.hpp"

namespace protoscope {

// (v1 . v2) / (||v1|| ||v2||); UndefinedSimilarityError when either norm is
// below 1e-12. In [0,1] when both vectors are nonnegative.
double cos_sim(std::span<const double> v1, std::span<const double> v2);

// Unit-normalized feature vectors grouped by class. Zero vectors (possible
// under relu) are excluded and counted instead of being treated as cosine 0.
class FeatureGroup {
public:
    FeatureGroup(std::size_t num_classes, std::size_t dim);

    // normalizes and stores; returns false (and counts) when ||raw|| < 1e-12
    bool add(std::size_t cls, std::span<const double> raw);

    std::size_t num_classes() const { return classes_.size(); }
    std::size_t dim() const { return dim_; }
    std::size_t count(std::size_t cls) const { return classes_[cls].size() / dim_; }
    std::span<const double> row(std::size_t cls, std::size_t i) const {
        return {classes_[cls].data() + i * dim_, dim_};
    }
    std::size_t excluded_zero() const { return excluded_zero_; }

private:
    std::size_t dim_;
    std::vector<std::vector<double>> classes_;  // flattened unit rows per class
    std::size_t excluded_zero_ = 0;
};

struct OrthogonalityResult {
    double h_w;             // 1 - mean pairwise cosine of the rows of W
    double mean_cosine;     // over the k(k-1)/2 unordered row pairs
    double mean_angle_deg;  // arccos(mean_cosine) in degrees
};

// Pairwise-cosine orthogonality of the classifier weight rows (bias excluded).
// UndefinedSimilarityError names the row when a row is zero.
OrthogonalityResult classifier_orthogonality(const Tensor& w);

struct WithinStats {
    double mean;                    // per-class Gram-triangle means, averaged over classes
    double stddev;                  // sample std over the pooled pairwise cosines
    std::vector<double> per_class;  // one Gram-triangle mean per class
};

// Per class: mean of the off-diagonal upper triangle of G^(l) (G^(l))^T.
// ConfigError naming the class when a class has fewer than 2 usable vectors.
WithinStats within_class_similarity(const FeatureGroup& fg);

struct BetweenStats {
    double cs_mean;  // mean over ordered class pairs of mean cosine vs. the
                     // other class's renormalized mean vector
    double cs_std;   // sample std over all individual cross-class cosines
    double m_bt;     // 1 - cs_mean
};

// Reduced estimator: each class's mean unit vector (renormalized) against
// every vector of every other class.
BetweenStats between_class_separation(const FeatureGroup& fg);

struct Bounds {
    double upper;  // m_in_mean - 2 * m_in_std, exactly
    double lower;  // 1 - (cs_mean + 2 * cs_std), exactly
    double upper_clamped;
    double lower_clamped;
    bool clamped;  // true when either value fell outside [0,1]
};

Bounds accuracy_bounds(double m_in_mean, double m_in_std, double bt_cs_mean, double bt_cs_std);

struct MetricReport {
    double h_w = 0.0;
    double mean_weight_angle_deg = 0.0;
    double m_in_mean = 0.0;
    double m_in_std = 0.0;
    std::vector<double> m_in_per_class;
    double bt_cossim_mean = 0.0;
    double bt_cossim_std = 0.0;
    double m_bt = 0.0;
    double upper_bound = 0.0;  // identity: m_in_mean - 2 * m_in_std
    double lower_bound = 0.0;  // identity: 1 - (bt_cossim_mean + 2 * bt_cossim_std)
    double upper_bound_clamped = 0.0;
    double lower_bound_clamped = 0.0;
    bool bounds_clamped = false;
    std::int64_t excluded_zero_features = 0;
    std::int64_t excluded_unconverged = 0;
    std::optional<double> fraction;  // echo from the caller, for the csv row
    std::optional<double> accuracy;  // only present when a validation set was supplied

    std::string to_json() const;
    // `fraction,m_in,in_std,upper,cs_bt,bt_std,cs_bt_plus_2std,m_bt_lower,accuracy`;
    // bounds appear clamped to [0,1], absent optionals are left empty
    std::string to_csv(bool with_header) const;
};

// Features of the converged prototypes per class -> both feature metrics and
// bounds, plus the weight orthogonality of the classifier. Never touches any
// dataset. EvaluationError naming the classes left with fewer than 2 usable
// prototypes.
MetricReport evaluate_dataless(const Model& model, const PrototypeSet& protos);

}  // namespace protoscope
