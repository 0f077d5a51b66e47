#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace protoscope {

// Lower clamp applied to the target probability inside cross_entropy before
// taking the log, so saturated outputs never produce -inf.
inline constexpr double kCrossEntropyClamp = 1e-12;

// Dense tensor of doubles, row-major, 64-bit throughout. A Tensor is a handle
// to shared storage: copies alias the same data and the same gradient buffer.
// Data is immutable once created except through data_mut() (used by the
// trainer, which owns its model exclusively) and gradient accumulation.
class Tensor {
public:
    struct Impl;  // defined in tensor.cpp

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor vec(std::vector<double> values, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<std::size_t>& shape() const;
    std::size_t size() const;
    bool is_scalar() const { return size() == 1 && shape().empty(); }
    double value() const;  // scalar tensors only

    std::span<const double> data() const;
    std::span<double> data_mut();
    double operator[](std::size_t i) const { return data()[i]; }

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const double> grad() const;  // UsageError if never populated
    void zero_grad();

private:
    std::shared_ptr<Impl> impl_;
    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
    friend class Tape;
};

// Records executed ops so a scalar result can be differentiated with respect
// to every tensor it depends on, inputs included. A tape is rebuilt per
// forward pass; a tape and its tensors stay on one thread. Independent tapes
// may run concurrently as long as they share no requires_grad tensors.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // out[i] = sum_j w[i,j] * x[j] + b[i]
    Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
    Tensor relu(const Tensor& x);
    // stable softmax over a length-k vector, k >= 2
    Tensor softmax(const Tensor& z);
    // -log(p[target]), p a probability vector
    Tensor cross_entropy(const Tensor& p, std::size_t target);
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sum(const Tensor& x);
    Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
    // x: {C,H,W}, kernel: {O,C,K,K}, bias: {O}; valid padding
    Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride);

    // Seeds d(root)/d(root) = 1 and walks the recorded ops backwards,
    // accumulating into .grad of every requires_grad tensor root depends on.
    // Grads add up across repeated uses and across backward calls.
    void backward(const Tensor& root);

    std::size_t recorded_ops() const { return nodes_.size(); }

private:
    class GradBuffers;  // transient per-backward gradient store
    struct Node {
        Tensor::Impl* out;
        std::vector<Tensor::Impl*> ins;
        std::function<void(GradBuffers&)> back;
    };
    std::vector<Node> nodes_;

    bool wants_grad(std::initializer_list<const Tensor*> ins) const;
    void record(const Tensor& out, std::initializer_list<const Tensor*> ins,
                std::function<void(GradBuffers&)> back);
};

}  // namespace protoscope
