#include "trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace protoscope {

void TrainConfig::validate() const {
    if (!(lr_phase1 > 0.0) || !(lr_phase2 > 0.0)) {
        throw ConfigError("train config: learning rates must be > 0");
    }
    if (phase_split > epochs) {
        throw ConfigError("train config: phase_split must be within [0, epochs]");
    }
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
}

std::string TrainHistory::to_csv() const {
    std::ostringstream out;
    out << "epoch,loss,train_acc\n";
    char buf[32];
    for (std::size_t e = 0; e < mean_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.17g", mean_loss[e]);
        out << e << ',' << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", train_accuracy[e]);
        out << ',' << buf << '\n';
    }
    return out.str();
}

TrainHistory train(Model& model, const LabeledDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.size() == 0) throw ConfigError("train: dataset is empty");
    if (ds.num_classes() != model.spec().num_classes) {
        throw ConfigError("train: dataset has " + std::to_string(ds.num_classes()) +
                          " classes, model expects " + std::to_string(model.spec().num_classes));
    }
    if (ds.input_dim() != model.spec().input_dim) {
        throw ConfigError("train: dataset input_dim " + std::to_string(ds.input_dim()) +
                          " does not match model input_dim " +
                          std::to_string(model.spec().input_dim));
    }

    const auto params = model.parameters();
    Rng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    history.mean_loss.reserve(cfg.epochs);
    history.train_accuracy.reserve(cfg.epochs);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = epoch < cfg.phase_split ? cfg.lr_phase1 : cfg.lr_phase2;
        if (cfg.shuffle) shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t cursor = 0;
        while (cursor < order.size()) {
            const std::size_t batch_n = std::min(cfg.batch_size, order.size() - cursor);
            for (Tensor param : params) param.zero_grad();

            try {
                for (std::size_t b = 0; b < batch_n; ++b) {
                    const std::size_t row = order[cursor + b];
                    auto xv = ds.input(row);
                    const auto target = static_cast<std::size_t>(ds.label(row));

                    Tape tape;
                    Tensor x = Tensor::vec({xv.begin(), xv.end()});
                    Tensor probs = model.forward_full(tape, x);
                    Tensor loss = tape.cross_entropy(probs, target);
                    if (!std::isfinite(loss.value())) {
                        throw NumericError("loss is not finite");
                    }
                    loss_sum += loss.value();

                    std::size_t argmax = 0;
                    for (std::size_t i = 1; i < probs.size(); ++i) {
                        if (probs[i] > probs[argmax]) argmax = i;
                    }
                    if (argmax == target) ++correct;

                    tape.backward(loss);
                }

                // mean-loss gradient over the batch
                const double step = lr / static_cast<double>(batch_n);
                for (const Tensor& param : params) {
                    if (!param.has_grad()) continue;
                    Tensor mut = param;
                    auto values = mut.data_mut();
                    auto grads = param.grad();
                    for (std::size_t i = 0; i < values.size(); ++i) {
                        values[i] -= step * grads[i];
                        if (!std::isfinite(values[i])) {
                            throw NumericError("parameter became non-finite");
                        }
                    }
                }
            } catch (const NumericError& e) {
                throw TrainingError("training aborted at epoch " + std::to_string(epoch) + ": " +
                                    e.what() + " (learning rate may be too high)");
            }
            cursor += batch_n;
        }

        history.mean_loss.push_back(loss_sum / static_cast<double>(ds.size()));
        history.train_accuracy.push_back(static_cast<double>(correct) /
                                         static_cast<double>(ds.size()));
    }
    return history;
}

double test_accuracy(const Model& model, const LabeledDataset& ds) {
    if (ds.size() == 0) throw ConfigError("test_accuracy: dataset is empty");
    if (ds.num_classes() != model.spec().num_classes || ds.input_dim() != model.spec().input_dim) {
        throw ConfigError("test_accuracy: dataset does not match model dimensions");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto probs = model.forward_full(ds.input(i));
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < probs.size(); ++c) {
            if (probs[c] > probs[argmax]) argmax = c;
        }
        if (argmax == static_cast<std::size_t>(ds.label(i))) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace protoscope
