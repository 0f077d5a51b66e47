#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "errors.hpp"

namespace protoscope {

struct Tensor::Impl {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // allocated the first time backward reaches this tensor
};

// Gradients for one backward pass. Kept separate from the persistent .grad
// stores so each backward() call contributes exactly d(root)/d(tensor),
// regardless of earlier passes over the same tape or other tapes.
class Tape::GradBuffers {
public:
    std::span<const double> view(Tensor::Impl* t) const {
        auto it = buffers_.find(t);
        if (it == buffers_.end()) return {};
        return it->second;
    }

    void add(Tensor::Impl* t, std::size_t i, double v) {
        auto& buf = buffers_[t];
        if (buf.empty()) buf.assign(t->data.size(), 0.0);
        buf[i] += v;
    }

    void flush_into_persistent() {
        for (auto& [impl, buf] : buffers_) {
            if (!impl->requires_grad) continue;
            if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
            for (std::size_t i = 0; i < buf.size(); ++i) impl->grad[i] += buf[i];
        }
    }

private:
    std::unordered_map<Tensor::Impl*, std::vector<double>> buffers_;
};

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void check_finite(std::span<const double> values, const char* where) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(where) + ": non-finite value encountered");
        }
    }
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto impl = std::make_shared<Impl>();
    impl->data.assign(shape_numel(shape), 0.0);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("tensor: shape product " + std::to_string(shape_numel(shape)) +
                             " != data length " + std::to_string(data.size()));
    }
    check_finite(data, "tensor");
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({}, {value}, requires_grad);
}

Tensor Tensor::vec(std::vector<double> values, bool requires_grad) {
    const std::size_t n = values.size();
    return from_data({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
    return from_data({rows, cols}, std::move(values), requires_grad);
}

const std::vector<std::size_t>& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::size() const { return impl_->data.size(); }

double Tensor::value() const {
    if (!is_scalar()) throw UsageError("value(): tensor is not a scalar");
    return impl_->data[0];
}

std::span<const double> Tensor::data() const { return impl_->data; }

std::span<double> Tensor::data_mut() { return impl_->data; }

bool Tensor::requires_grad() const { return impl_->requires_grad; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw UsageError("grad(): no gradient has been accumulated");
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

bool Tape::wants_grad(std::initializer_list<const Tensor*> ins) const {
    for (const Tensor* t : ins) {
        if (t->impl_->requires_grad) return true;
    }
    return false;
}

void Tape::record(const Tensor& out, std::initializer_list<const Tensor*> ins,
                  std::function<void(GradBuffers&)> back) {
    Node node;
    node.out = out.impl_.get();
    node.ins.reserve(ins.size());
    for (const Tensor* t : ins) node.ins.push_back(t->impl_.get());
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
}

Tensor Tape::affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 1 || w.shape().size() != 2 || b.shape().size() != 1) {
        throw DimensionError("affine: expected x[q], w[k,q], b[k]");
    }
    const std::size_t q = x.shape()[0];
    const std::size_t k = w.shape()[0];
    if (w.shape()[1] != q || b.shape()[0] != k) {
        throw DimensionError("affine: w is " + std::to_string(w.shape()[0]) + "x" +
                             std::to_string(w.shape()[1]) + ", x has length " + std::to_string(q) +
                             ", b has length " + std::to_string(b.shape()[0]));
    }
    std::vector<double> out(k);
    auto xd = x.data();
    auto wd = w.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < k; ++i) {
        double acc = bd[i];
        const double* row = wd.data() + i * q;
        for (std::size_t j = 0; j < q; ++j) acc += row[j] * xd[j];
        out[i] = acc;
    }
    check_finite(out, "affine");
    Tensor y = Tensor::from_data({k}, std::move(out), false);
    y.impl_->requires_grad = wants_grad({&x, &w, &b});
    if (y.impl_->requires_grad) {
        record(y, {&x, &w, &b}, [x, w, b, y, k, q](GradBuffers& gb) {
            auto gy = gb.view(y.impl_.get());
            if (gy.empty()) return;
            auto xd = x.data();
            auto wd = w.data();
            for (std::size_t i = 0; i < k; ++i) {
                const double g = gy[i];
                if (g == 0.0) continue;
                if (w.impl_->requires_grad) {
                    for (std::size_t j = 0; j < q; ++j) gb.add(w.impl_.get(), i * q + j, g * xd[j]);
                }
                if (x.impl_->requires_grad) {
                    const double* row = wd.data() + i * q;
                    for (std::size_t j = 0; j < q; ++j) gb.add(x.impl_.get(), j, g * row[j]);
                }
                if (b.impl_->requires_grad) gb.add(b.impl_.get(), i, g);
            }
        });
    }
    return y;
}

Tensor Tape::relu(const Tensor& x) {
    std::vector<double> out(x.size());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
    Tensor y = Tensor::from_data(x.shape(), std::move(out), false);
    y.impl_->requires_grad = wants_grad({&x});
    if (y.impl_->requires_grad) {
        // subgradient at exactly 0 is 0
        record(y, {&x}, [x, y](GradBuffers& gb) {
            auto gy = gb.view(y.impl_.get());
            if (gy.empty()) return;
            auto xd = x.data();
            for (std::size_t i = 0; i < gy.size(); ++i) {
                if (xd[i] > 0.0 && gy[i] != 0.0) gb.add(x.impl_.get(), i, gy[i]);
            }
        });
    }
    return y;
}

Tensor Tape::softmax(const Tensor& z) {
    if (z.shape().size() != 1 || z.shape()[0] < 2) {
        throw DimensionError("softmax: expected a vector of length >= 2");
    }
    auto zd = z.data();
    const double zmax = *std::max_element(zd.begin(), zd.end());
    std::vector<double> out(zd.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < zd.size(); ++i) {
        out[i] = std::exp(zd[i] - zmax);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    check_finite(out, "softmax");
    Tensor p = Tensor::from_data(z.shape(), std::move(out), false);
    p.impl_->requires_grad = wants_grad({&z});
    if (p.impl_->requires_grad) {
        record(p, {&z}, [z, p](GradBuffers& gb) {
            auto gp = gb.view(p.impl_.get());
            if (gp.empty()) return;
            auto pd = p.data();
            double dot = 0.0;
            for (std::size_t i = 0; i < gp.size(); ++i) dot += gp[i] * pd[i];
            for (std::size_t i = 0; i < gp.size(); ++i) {
                gb.add(z.impl_.get(), i, pd[i] * (gp[i] - dot));
            }
        });
    }
    return p;
}

Tensor Tape::cross_entropy(const Tensor& p, std::size_t target) {
    if (p.shape().size() != 1) throw DimensionError("cross_entropy: expected a vector");
    if (target >= p.shape()[0]) {
        throw ConfigError("cross_entropy: target " + std::to_string(target) +
                          " out of range for " + std::to_string(p.shape()[0]) + " classes");
    }
    const double clamped = std::max(p[target], kCrossEntropyClamp);
    Tensor loss = Tensor::scalar(-std::log(clamped));
    loss.impl_->requires_grad = wants_grad({&p});
    if (loss.impl_->requires_grad) {
        record(loss, {&p}, [p, loss, target, clamped](GradBuffers& gb) {
            auto gl = gb.view(loss.impl_.get());
            if (gl.empty()) return;
            gb.add(p.impl_.get(), target, gl[0] * (-1.0 / clamped));
        });
    }
    return loss;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw DimensionError("add: shape mismatch");
    std::vector<double> out(a.size());
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    check_finite(out, "add");
    Tensor y = Tensor::from_data(a.shape(), std::move(out), false);
    y.impl_->requires_grad = wants_grad({&a, &b});
    if (y.impl_->requires_grad) {
        record(y, {&a, &b}, [a, b, y](GradBuffers& gb) {
            auto gy = gb.view(y.impl_.get());
            if (gy.empty()) return;
            for (std::size_t i = 0; i < gy.size(); ++i) {
                if (gy[i] == 0.0) continue;
                if (a.impl_->requires_grad) gb.add(a.impl_.get(), i, gy[i]);
                if (b.impl_->requires_grad) gb.add(b.impl_.get(), i, gy[i]);
            }
        });
    }
    return y;
}

Tensor Tape::sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    if (!std::isfinite(total)) throw NumericError("sum: non-finite value encountered");
    Tensor y = Tensor::scalar(total);
    y.impl_->requires_grad = wants_grad({&x});
    if (y.impl_->requires_grad) {
        record(y, {&x}, [x, y](GradBuffers& gb) {
            auto gy = gb.view(y.impl_.get());
            if (gy.empty()) return;
            for (std::size_t i = 0; i < x.size(); ++i) gb.add(x.impl_.get(), i, gy[0]);
        });
    }
    return y;
}

Tensor Tape::reshape(const Tensor& x, std::vector<std::size_t> shape) {
    if (shape_numel(shape) != x.size()) {
        throw DimensionError("reshape: new shape does not preserve element count");
    }
    Tensor y = Tensor::from_data(std::move(shape), {x.data().begin(), x.data().end()}, false);
    y.impl_->requires_grad = wants_grad({&x});
    if (y.impl_->requires_grad) {
        record(y, {&x}, [x, y](GradBuffers& gb) {
            auto gy = gb.view(y.impl_.get());
            if (gy.empty()) return;
            for (std::size_t i = 0; i < gy.size(); ++i) {
                if (gy[i] != 0.0) gb.add(x.impl_.get(), i, gy[i]);
            }
        });
    }
    return y;
}

Tensor Tape::conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                    std::size_t stride) {
    if (x.shape().size() != 3 || kernel.shape().size() != 4 || bias.shape().size() != 1) {
        throw DimensionError("conv2d: expected x[C,H,W], kernel[O,C,K,K], bias[O]");
    }
    if (stride == 0) throw ConfigError("conv2d: stride must be >= 1");
    const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    const std::size_t o = kernel.shape()[0], kc = kernel.shape()[1];
    const std::size_t kh = kernel.shape()[2], kw = kernel.shape()[3];
    if (kc != c || kh != kw || bias.shape()[0] != o) {
        throw DimensionError("conv2d: kernel/bias shapes do not match input channels");
    }
    if (kh > h || kw > w) throw DimensionError("conv2d: kernel larger than input");
    const std::size_t oh = (h - kh) / stride + 1;
    const std::size_t ow = (w - kw) / stride + 1;

    std::vector<double> out(o * oh * ow, 0.0);
    auto xd = x.data();
    auto kd = kernel.data();
    auto bd = bias.data();
    for (std::size_t oc = 0; oc < o; ++oc) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                double acc = bd[oc];
                for (std::size_t ic = 0; ic < c; ++ic) {
                    for (std::size_t ki = 0; ki < kh; ++ki) {
                        for (std::size_t kj = 0; kj < kw; ++kj) {
                            const double xv = xd[ic * h * w + (i * stride + ki) * w + (j * stride + kj)];
                            const double kv = kd[((oc * c + ic) * kh + ki) * kw + kj];
                            acc += xv * kv;
                        }
                    }
                }
                out[oc * oh * ow + i * ow + j] = acc;
            }
        }
    }
    check_finite(out, "conv2d");
    Tensor y = Tensor::from_data({o, oh, ow}, std::move(out), false);
    y.impl_->requires_grad = wants_grad({&x, &kernel, &bias});
    if (y.impl_->requires_grad) {
        record(y, {&x, &kernel, &bias},
               [x, kernel, bias, y, c, h, w, o, kh, kw, oh, ow, stride](GradBuffers& gb) {
                   auto gy = gb.view(y.impl_.get());
                   if (gy.empty()) return;
                   auto xd = x.data();
                   auto kd = kernel.data();
                   for (std::size_t oc = 0; oc < o; ++oc) {
                       for (std::size_t i = 0; i < oh; ++i) {
                           for (std::size_t j = 0; j < ow; ++j) {
                               const double g = gy[oc * oh * ow + i * ow + j];
                               if (g == 0.0) continue;
                               if (bias.impl_->requires_grad) gb.add(bias.impl_.get(), oc, g);
                               for (std::size_t ic = 0; ic < c; ++ic) {
                                   for (std::size_t ki = 0; ki < kh; ++ki) {
                                       for (std::size_t kj = 0; kj < kw; ++kj) {
                                           const std::size_t xi =
                                               ic * h * w + (i * stride + ki) * w + (j * stride + kj);
                                           const std::size_t kidx = ((oc * c + ic) * kh + ki) * kw + kj;
                                           if (kernel.impl_->requires_grad) {
                                               gb.add(kernel.impl_.get(), kidx, g * xd[xi]);
                                           }
                                           if (x.impl_->requires_grad) {
                                               gb.add(x.impl_.get(), xi, g * kd[kidx]);
                                           }
                                       }
                                   }
                               }
                           }
                       }
                   }
               });
    }
    return y;
}

void Tape::backward(const Tensor& root) {
    if (!root.defined() || !root.is_scalar()) {
        throw UsageError("backward: root must be a scalar tensor");
    }
    Tensor::Impl* root_impl = root.impl_.get();
    bool on_tape = false;
    for (const Node& node : nodes_) {
        if (node.out == root_impl) {
            on_tape = true;
            break;
        }
    }
    if (!on_tape) throw UsageError("backward: root was not produced by this tape");

    // Mark the ops root actually depends on, so only tensors reachable from
    // the root receive gradient.
    std::unordered_set<Tensor::Impl*> needed{root_impl};
    std::vector<bool> active(nodes_.size(), false);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        const Node& node = nodes_[i];
        if (needed.count(node.out)) {
            active[i] = true;
            for (Tensor::Impl* in : node.ins) needed.insert(in);
        }
    }

    GradBuffers gb;
    gb.add(root_impl, 0, 1.0);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (active[i]) nodes_[i].back(gb);
    }

    // Every reachable requires_grad tensor ends up with an allocated gradient,
    // even if its contribution this pass was all zeros (dead relu branches).
    for (Tensor::Impl* impl : needed) {
        if (impl->requires_grad && impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
    }
    gb.flush_into_persistent();
}

}  // namespace protoscope
