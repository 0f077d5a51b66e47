#include "dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "errors.hpp"
#include "rng.hpp"

namespace protoscope {

namespace {

std::atomic<std::uint64_t> g_dataset_reads{0};

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

// Draws m distinct positions from pool (order of pool preserved in output by
// sorting the chosen indices).
std::vector<std::size_t> sample_without_replacement(const std::vector<std::size_t>& pool,
                                                    std::size_t m, Rng& rng) {
    std::vector<std::size_t> shuffled = pool;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(shuffled.size() - i));
        std::swap(shuffled[i], shuffled[j]);
    }
    std::vector<std::size_t> chosen(shuffled.begin(), shuffled.begin() + m);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
    std::vector<double> inputs;
    inputs.reserve(rows.size() * ds.input_dim());
    std::vector<std::int32_t> labels;
    labels.reserve(rows.size());
    for (std::size_t row : rows) {
        auto x = ds.input(row);
        inputs.insert(inputs.end(), x.begin(), x.end());
        labels.push_back(ds.label(row));
    }
    std::vector<std::int64_t> original(ds.num_classes());
    for (std::size_t c = 0; c < ds.num_classes(); ++c) original[c] = ds.original_label(c);
    return LabeledDataset(ds.input_dim(), ds.num_classes(), std::move(inputs), std::move(labels),
                          std::move(original));
}

std::vector<std::vector<std::size_t>> rows_by_class(const LabeledDataset& ds) {
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
    }
    return by_class;
}

}  // namespace

LabeledDataset::LabeledDataset(std::size_t input_dim, std::size_t num_classes,
                               std::vector<double> inputs, std::vector<std::int32_t> labels,
                               std::vector<std::int64_t> original_labels)
    : input_dim_(input_dim),
      num_classes_(num_classes),
      inputs_(std::move(inputs)),
      labels_(std::move(labels)),
      original_labels_(std::move(original_labels)) {
    if (input_dim_ < 1) throw ConfigError("dataset: input_dim must be >= 1");
    if (num_classes_ < 1) throw ConfigError("dataset: num_classes must be >= 1");
    if (inputs_.size() != labels_.size() * input_dim_) {
        throw DimensionError("dataset: inputs length does not match n * input_dim");
    }
    for (std::int32_t label : labels_) {
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes_) {
            throw ConfigError("dataset: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(num_classes_) + ")");
        }
    }
    for (double v : inputs_) {
        if (!std::isfinite(v)) throw NumericError("dataset: non-finite input value");
    }
    if (original_labels_.empty()) {
        original_labels_.resize(num_classes_);
        std::iota(original_labels_.begin(), original_labels_.end(), 0);
    }
    if (original_labels_.size() != num_classes_) {
        throw DimensionError("dataset: original_labels must have one entry per class");
    }
}

std::vector<std::size_t> LabeledDataset::per_class_counts() const {
    std::vector<std::size_t> counts(num_classes_, 0);
    for (std::int32_t label : labels_) ++counts[static_cast<std::size_t>(label)];
    return counts;
}

LabeledDataset gen_blobs(std::size_t k, std::size_t per_class, std::size_t p, double separation,
                         double spread, std::uint64_t seed) {
    if (k < 2) throw ConfigError("gen_blobs: k must be >= 2");
    if (per_class < 1) throw ConfigError("gen_blobs: per_class must be >= 1");
    if (p < 1) throw ConfigError("gen_blobs: p must be >= 1");
    if (!(separation > 0.0)) throw ConfigError("gen_blobs: separation must be > 0");
    if (!(spread > 0.0)) throw ConfigError("gen_blobs: spread must be > 0");

    Rng rng(seed);
    std::vector<std::vector<double>> means(k, std::vector<double>(p, 0.0));
    if (k <= p) {
        // scaled standard-basis simplex: pairwise distance is exactly `separation`
        const double scale = separation / std::sqrt(2.0);
        for (std::size_t c = 0; c < k; ++c) means[c][c] = scale;
    } else {
        // random unit directions, rejected until pairwise distance >= separation
        for (std::size_t c = 0; c < k; ++c) {
            bool placed = false;
            for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
                std::vector<double> dir(p);
                double norm = 0.0;
                for (auto& v : dir) {
                    v = rng.normal();
                    norm += v * v;
                }
                norm = std::sqrt(norm);
                if (norm < 1e-12) continue;
                for (auto& v : dir) v = v / norm * separation;
                bool ok = true;
                for (std::size_t prev = 0; prev < c && ok; ++prev) {
                    double d2 = 0.0;
                    for (std::size_t j = 0; j < p; ++j) {
                        const double diff = dir[j] - means[prev][j];
                        d2 += diff * diff;
                    }
                    ok = d2 >= separation * separation;
                }
                if (ok) {
                    means[c] = std::move(dir);
                    placed = true;
                }
            }
            if (!placed) {
                throw ConfigError("gen_blobs: cannot place " + std::to_string(k) +
                                  " means at separation " + std::to_string(separation) +
                                  " in dimension " + std::to_string(p));
            }
        }
    }

    std::vector<double> inputs;
    inputs.reserve(k * per_class * p);
    std::vector<std::int32_t> labels;
    labels.reserve(k * per_class);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            for (std::size_t j = 0; j < p; ++j) inputs.push_back(means[c][j] + spread * rng.normal());
            labels.push_back(static_cast<std::int32_t>(c));
        }
    }
    return LabeledDataset(p, k, std::move(inputs), std::move(labels));
}

LabeledDataset load_csv(const std::string& path, bool has_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    g_dataset_reads.fetch_add(1, std::memory_order_relaxed);

    std::vector<std::int64_t> raw_labels;
    std::vector<double> features;
    std::size_t input_dim = 0;
    std::string line;
    std::size_t line_no = 0;
    bool skip_header = has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (skip_header) {
            skip_header = false;
            continue;
        }
        if (line.empty()) continue;

        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() < 2) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected label,f1,...,fp");
        }
        const std::size_t row_dim = cells.size() - 1;
        if (input_dim == 0) {
            input_dim = row_dim;
        } else if (row_dim != input_dim) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": row has " +
                             std::to_string(row_dim) + " features, expected " +
                             std::to_string(input_dim));
        }

        std::int64_t label = 0;
        {
            const std::string& cell = cells[0];
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw ParseError(path + ":" + std::to_string(line_no) + ": non-integer label '" +
                                 cell + "'");
            }
        }
        raw_labels.push_back(label);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const std::string& cell = cells[c];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw ParseError(path + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                                 cell + "'");
            }
            features.push_back(v);
        }
    }
    if (raw_labels.empty()) throw ParseError(path + ": no data rows");

    // remap labels to contiguous [0, k) in ascending order of original label
    std::map<std::int64_t, std::int32_t> mapping;
    for (std::int64_t label : raw_labels) mapping.emplace(label, 0);
    std::vector<std::int64_t> original;
    original.reserve(mapping.size());
    for (auto& [label, idx] : mapping) {
        idx = static_cast<std::int32_t>(original.size());
        original.push_back(label);
    }
    std::vector<std::int32_t> labels;
    labels.reserve(raw_labels.size());
    for (std::int64_t label : raw_labels) labels.push_back(mapping[label]);

    return LabeledDataset(input_dim, mapping.size(), std::move(features), std::move(labels),
                          std::move(original));
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.original_label(static_cast<std::size_t>(ds.label(i)));
        for (double v : ds.input(i)) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

LabeledDataset partition_fraction(const LabeledDataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ConfigError("partition_fraction: fraction must be in (0, 1]");
    }
    auto by_class = rows_by_class(ds);
    Rng rng(seed);
    std::vector<std::size_t> selected;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const std::size_t want = round_half_up(fraction * static_cast<double>(by_class[c].size()));
        if (want == 0) {
            throw ConfigError("partition_fraction: fraction " + std::to_string(fraction) +
                              " leaves class " + std::to_string(c) + " empty");
        }
        auto chosen = sample_without_replacement(by_class[c], want, rng);
        selected.insert(selected.end(), chosen.begin(), chosen.end());
    }
    std::sort(selected.begin(), selected.end());
    return subset(ds, selected);
}

std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
        throw ConfigError("split_train_test: test_fraction must be in (0, 1)");
    }
    auto by_class = rows_by_class(ds);
    Rng rng(seed);
    std::vector<std::size_t> test_rows;
    std::vector<bool> in_test(ds.size(), false);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const std::size_t want =
            round_half_up(test_fraction * static_cast<double>(by_class[c].size()));
        if (want == 0 || want >= by_class[c].size()) {
            throw ConfigError("split_train_test: class " + std::to_string(c) + " with " +
                              std::to_string(by_class[c].size()) +
                              " examples cannot be split at test_fraction " +
                              std::to_string(test_fraction));
        }
        for (std::size_t row : sample_without_replacement(by_class[c], want, rng)) {
            test_rows.push_back(row);
            in_test[row] = true;
        }
    }
    std::sort(test_rows.begin(), test_rows.end());
    std::vector<std::size_t> train_rows;
    train_rows.reserve(ds.size() - test_rows.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!in_test[i]) train_rows.push_back(i);
    }
    return {subset(ds, train_rows), subset(ds, test_rows)};
}

std::uint64_t dataset_file_reads() { return g_dataset_reads.load(std::memory_order_relaxed); }

}  // namespace protoscope
