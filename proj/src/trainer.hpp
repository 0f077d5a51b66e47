#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "network.hpp"

namespace protoscope {

// Two-phase schedule: lr_phase1 for epochs [0, phase_split), lr_phase2 after.
struct TrainConfig {
    std::size_t epochs = 100;
    double lr_phase1 = 0.1;
    double lr_phase2 = 0.05;
    std::size_t phase_split = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool shuffle = true;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> mean_loss;       // one entry per epoch
    std::vector<double> train_accuracy;  // measured during the epoch's forward passes

    // `epoch,loss,train_acc` rows with a header
    std::string to_csv() const;
};

// Plain minibatch SGD on cross-entropy; deterministic shuffling per seed; the
// final partial batch is kept. The model is updated in place (exclusive
// access). TrainingError when the loss or a parameter goes non-finite.
TrainHistory train(Model& model, const LabeledDataset& ds, const TrainConfig& cfg);

// Fraction of examples whose argmax prediction matches the label.
double test_accuracy(const Model& model, const LabeledDataset& ds);

}  // namespace protoscope
