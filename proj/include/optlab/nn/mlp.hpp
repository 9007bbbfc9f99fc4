// Minimal dense network kernel: flat float64 parameter tensors, MLP forward /
// analytic backward, Adam, tempered softmax, and a finite-difference gradient
// checker. No autodiff graph; every architecture in this repo is a fixed
// feed-forward stack with hand-written layer gradients.
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "optlab/common.hpp"

namespace optlab::nn {

enum class Activation { Tanh, Relu };
enum class Head { Linear, Softmax, Sigmoid };

struct ParamTensor {
    std::vector<double> values;
    std::vector<int> shape;
    std::vector<double> grad;

    ParamTensor() = default;
    ParamTensor(std::vector<double> v, std::vector<int> s)
        : values(std::move(v)), shape(std::move(s)), grad(values.size(), 0.0) {}

    size_t numel() const { return values.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Numerically stable softmax with temperature; output sums to 1.
std::vector<double> softmax_temp(std::span<const double> logits, double temperature);

// Fully-connected net. `layer_sizes` = [in, h1, ..., out]; at least one
// weight layer (input->output counts as one). Hidden layers share one
// activation; the head is applied to the last layer's pre-activation.
//
// forward() caches per-layer activations for a subsequent backward();
// evaluate() is the pure, cache-free read path used for target networks and
// live policy views.
class Mlp {
public:
    Mlp(std::vector<int> layer_sizes, Activation hidden, Head head, double temperature,
        uint64_t seed);

    std::vector<double> forward(std::span<const double> input);
    std::vector<double> evaluate(std::span<const double> input) const;

    // Pre-head outputs (logits); same caveats as evaluate().
    std::vector<double> evaluate_logits(std::span<const double> input) const;

    // Accumulates dLoss/dparam into each tensor's grad, given dLoss/doutput.
    // Returns dLoss/dinput. Requires a forward() since the last backward().
    std::vector<double> backward(std::span<const double> upstream);

    void zero_grad();
    std::vector<ParamTensor*> params();
    std::vector<const ParamTensor*> params() const;

    void copy_params_from(const Mlp& other);
    Mlp clone() const { return *this; }

    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    int num_layers() const { return static_cast<int>(weights_.size()); }
    double temperature() const { return temperature_; }
    Head head() const { return head_; }

private:
    std::vector<double> run(std::span<const double> input, std::vector<std::vector<double>>* acts,
                            bool apply_head) const;

    std::vector<int> sizes_;
    Activation hidden_;
    Head head_;
    double temperature_;
    std::vector<ParamTensor> weights_;  // shape [out, in], row-major
    std::vector<ParamTensor> biases_;   // shape [out]
    // caches from forward(): acts_[0] = input, acts_[l+1] = post-activation of layer l
    std::vector<std::vector<double>> acts_;
    bool forward_done_ = false;
};

// Standard Adam. step() applies bias-corrected updates and zeroes grads;
// a NaN/inf gradient aborts before touching any parameter.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step_count = 0;

    void init(std::span<ParamTensor* const> params);
    void step(std::span<ParamTensor* const> params);
    bool initialized() const { return !m_.empty(); }

private:
    std::vector<std::vector<double>> m_, v_;
};

// Max over parameter entries of |analytic - numeric| / max(1e-8, |numeric|),
// central differences. `loss` must be a pure evaluation; `compute_grads`
// must leave analytic gradients in the tensors' grad arrays.
double grad_check(std::span<ParamTensor* const> params, const std::function<double()>& loss,
                  const std::function<void()>& compute_grads, double h = 1e-5);

}  // namespace optlab::nn
