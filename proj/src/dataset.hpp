#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace protoscope {

// Labeled inputs with contiguous class indices in [0, k). Immutable after
// construction; safe to share across threads.
class LabeledDataset {
public:
    LabeledDataset() = default;
    // original_labels maps contiguous class index -> label as found in the
    // source (identity for generated data). ConfigError/DimensionError on
    // inconsistent sizes, labels out of range, or non-finite inputs.
    LabeledDataset(std::size_t input_dim, std::size_t num_classes, std::vector<double> inputs,
                   std::vector<std::int32_t> labels, std::vector<std::int64_t> original_labels = {});

    std::size_t size() const { return labels_.size(); }
    std::size_t input_dim() const { return input_dim_; }
    std::size_t num_classes() const { return num_classes_; }

    std::span<const double> input(std::size_t i) const {
        return {inputs_.data() + i * input_dim_, input_dim_};
    }
    std::int32_t label(std::size_t i) const { return labels_[i]; }
    const std::vector<std::int32_t>& labels() const { return labels_; }
    // label as it appeared in the source file
    std::int64_t original_label(std::size_t cls) const { return original_labels_[cls]; }

    std::vector<std::size_t> per_class_counts() const;

private:
    std::size_t input_dim_ = 0;
    std::size_t num_classes_ = 0;
    std::vector<double> inputs_;  // n x p row-major
    std::vector<std::int32_t> labels_;
    std::vector<std::int64_t> original_labels_;
};

// k isotropic Gaussian clusters with pairwise-distant means: a scaled
// standard-basis simplex when k <= p, otherwise random unit directions kept
// apart by rejection. Deterministic per seed.
LabeledDataset gen_blobs(std::size_t k, std::size_t per_class, std::size_t p, double separation,
                         double spread, std::uint64_t seed);

// CSV rows are `label,f1,...,fp`; labels are integers remapped to contiguous
// class indices in ascending order (the mapping is kept on the dataset).
// ParseError with the line number on ragged rows or non-numeric cells.
LabeledDataset load_csv(const std::string& path, bool has_header);

// Inverse of load_csv for generated data: no header, label then features,
// features printed with 17 significant digits.
void save_csv(const LabeledDataset& ds, const std::string& path);

// Stratified subsample: round(fraction * n_l) examples per class, half-up,
// drawn without replacement; output preserves source order, so fraction 1.0
// is the identity. ConfigError when a class would end up empty.
LabeledDataset partition_fraction(const LabeledDataset& ds, double fraction, std::uint64_t seed);

// Stratified disjoint split; test side gets round(test_fraction * n_l) per
// class. Both sides preserve source order.
std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed);

// Number of dataset files opened since process start. The dataless-evaluation
// contract is checked against this counter.
std::uint64_t dataset_file_reads();

}  // namespace protoscope
