#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tensor.hpp"

namespace testsupport {

// Central finite differences d(loss)/d(param[i]) for every entry of `param`,
// with the loss recomputed from scratch by `loss_of` after each perturbation.
// Independent of the tape: this is the oracle the backward pass is checked
// against.
inline std::vector<double> finite_difference(protoscope::Tensor param,
                                             const std::function<double()>& loss_of,
                                             double h = 1e-5) {
    auto values = param.data_mut();
    std::vector<double> fd(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = loss_of();
        values[i] = saved - h;
        const double down = loss_of();
        values[i] = saved;
        fd[i] = (up - down) / (2.0 * h);
    }
    return fd;
}

// Relative error with a small absolute floor so near-zero gradients are
// compared absolutely.
inline double rel_error(double a, double b) {
    const double scale = std::max({1e-6, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) / scale;
}

inline double max_rel_error(std::span<const double> analytic, const std::vector<double>& fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        worst = std::max(worst, rel_error(analytic[i], fd[i]));
    }
    return worst;
}

}  // namespace testsupport
