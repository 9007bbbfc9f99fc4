#include "optlab/nn/mlp.hpp"

#include <algorithm>
#include <cmath>

namespace optlab::nn {

std::vector<double> softmax_temp(std::span<const double> logits, double temperature) {
    if (temperature <= 0.0) throw ConfigError("softmax_temp: temperature must be positive");
    if (logits.empty()) throw ConfigError("softmax_temp: empty logits");
    double mx = logits[0] / temperature;
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] / temperature;
        mx = std::max(mx, out[i]);
    }
    double sum = 0.0;
    for (double& x : out) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : out) x /= sum;
    return out;
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation hidden, Head head, double temperature,
         uint64_t seed)
    : sizes_(std::move(layer_sizes)), hidden_(hidden), head_(head), temperature_(temperature) {
    if (sizes_.size() < 2) throw ConfigError("Mlp: need at least input and output sizes");
    for (int s : sizes_)
        if (s <= 0) throw ConfigError("Mlp: layer sizes must be positive");
    if (head_ == Head::Softmax && temperature_ <= 0.0)
        throw ConfigError("Mlp: softmax temperature must be positive");

    Rng rng(seed);
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::vector<double> w(static_cast<size_t>(in) * out);
        for (double& x : w) x = rng.uniform(-bound, bound);
        weights_.emplace_back(std::move(w), std::vector<int>{out, in});
        biases_.emplace_back(std::vector<double>(out, 0.0), std::vector<int>{out});
    }
}

std::vector<double> Mlp::run(std::span<const double> input,
                             std::vector<std::vector<double>>* acts, bool apply_head) const {
    if (static_cast<int>(input.size()) != sizes_.front())
        throw ConfigError("Mlp: input length " + std::to_string(input.size()) +
                          " does not match first layer " + std::to_string(sizes_.front()));
    std::vector<double> cur(input.begin(), input.end());
    if (acts) {
        acts->clear();
        acts->push_back(cur);
    }
    const size_t L = weights_.size();
    for (size_t l = 0; l < L; ++l) {
        const int out = sizes_[l + 1], in = sizes_[l];
        const double* W = weights_[l].values.data();
        const double* b = biases_[l].values.data();
        std::vector<double> next(out);
        for (int r = 0; r < out; ++r) {
            double s = b[r];
            const double* wr = W + static_cast<size_t>(r) * in;
            for (int c = 0; c < in; ++c) s += wr[c] * cur[c];
            next[r] = s;
        }
        if (l + 1 < L) {
            if (hidden_ == Activation::Tanh)
                for (double& x : next) x = std::tanh(x);
            else
                for (double& x : next) x = x > 0.0 ? x : 0.0;
        } else if (apply_head) {
            switch (head_) {
                case Head::Linear:
                    break;
                case Head::Softmax:
                    next = softmax_temp(next, temperature_);
                    break;
                case Head::Sigmoid:
                    for (double& x : next) x = 1.0 / (1.0 + std::exp(-x));
                    break;
            }
        }
        cur = std::move(next);
        if (acts) acts->push_back(cur);
    }
    return cur;
}

std::vector<double> Mlp::forward(std::span<const double> input) {
    auto out = run(input, &acts_, true);
    forward_done_ = true;
    return out;
}

std::vector<double> Mlp::evaluate(std::span<const double> input) const {
    return run(input, nullptr, true);
}

std::vector<double> Mlp::evaluate_logits(std::span<const double> input) const {
    return run(input, nullptr, false);
}

std::vector<double> Mlp::backward(std::span<const double> upstream) {
    if (!forward_done_) throw UsageError("Mlp::backward called without a preceding forward");
    if (static_cast<int>(upstream.size()) != sizes_.back())
        throw ConfigError("Mlp::backward: upstream length mismatch");
    forward_done_ = false;

    const size_t L = weights_.size();
    std::vector<double> delta(upstream.begin(), upstream.end());

    // Head Jacobian; acts_[L] holds the post-head output.
    const std::vector<double>& y = acts_[L];
    switch (head_) {
        case Head::Linear:
            break;
        case Head::Softmax: {
            double gy = 0.0;
            for (size_t i = 0; i < y.size(); ++i) gy += delta[i] * y[i];
            for (size_t i = 0; i < y.size(); ++i)
                delta[i] = y[i] * (delta[i] - gy) / temperature_;
            break;
        }
        case Head::Sigmoid:
            for (size_t i = 0; i < y.size(); ++i) delta[i] *= y[i] * (1.0 - y[i]);
            break;
    }

    for (size_t li = L; li-- > 0;) {
        if (li + 1 < L) {
            // delta currently holds dL/d(post-activation of layer li); apply
            // the hidden activation derivative using the cached outputs.
            const std::vector<double>& a = acts_[li + 1];
            if (hidden_ == Activation::Tanh)
                for (size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - a[i] * a[i];
            else
                for (size_t i = 0; i < delta.size(); ++i) delta[i] *= a[i] > 0.0 ? 1.0 : 0.0;
        }
        const int out = sizes_[li + 1], in = sizes_[li];
        const std::vector<double>& x = acts_[li];
        double* gW = weights_[li].grad.data();
        double* gb = biases_[li].grad.data();
        for (int r = 0; r < out; ++r) {
            const double d = delta[r];
            gb[r] += d;
            double* gwr = gW + static_cast<size_t>(r) * in;
            for (int c = 0; c < in; ++c) gwr[c] += d * x[c];
        }
        std::vector<double> prev(in, 0.0);
        const double* W = weights_[li].values.data();
        for (int r = 0; r < out; ++r) {
            const double d = delta[r];
            const double* wr = W + static_cast<size_t>(r) * in;
            for (int c = 0; c < in; ++c) prev[c] += d * wr[c];
        }
        delta = std::move(prev);
    }
    return delta;
}

void Mlp::zero_grad() {
    for (auto& t : weights_) t.zero_grad();
    for (auto& t : biases_) t.zero_grad();
}

std::vector<ParamTensor*> Mlp::params() {
    std::vector<ParamTensor*> out;
    for (size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

std::vector<const ParamTensor*> Mlp::params() const {
    std::vector<const ParamTensor*> out;
    for (size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

void Mlp::copy_params_from(const Mlp& other) {
    if (sizes_ != other.sizes_) throw ConfigError("Mlp::copy_params_from: shape mismatch");
    for (size_t l = 0; l < weights_.size(); ++l) {
        weights_[l].values = other.weights_[l].values;
        biases_[l].values = other.biases_[l].values;
    }
}

void AdamState::init(std::span<ParamTensor* const> params) {
    m_.clear();
    v_.clear();
    for (const ParamTensor* p : params) {
        m_.emplace_back(p->numel(), 0.0);
        v_.emplace_back(p->numel(), 0.0);
    }
    step_count = 0;
}

void AdamState::step(std::span<ParamTensor* const> params) {
    if (m_.empty()) init(params);
    if (m_.size() != params.size()) throw UsageError("AdamState: parameter set changed");
    for (const ParamTensor* p : params)
        if (!all_finite(p->grad)) throw NumericError("AdamState: non-finite gradient");

    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        ParamTensor& p = *params[i];
        if (m_[i].size() != p.numel()) throw UsageError("AdamState: tensor size changed");
        for (size_t j = 0; j < p.numel(); ++j) {
            const double g = p.grad[j];
            m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * g;
            v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * g * g;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p.values[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        if (!all_finite(p.values)) throw NumericError("AdamState: non-finite parameter");
        p.zero_grad();
    }
}

double grad_check(std::span<ParamTensor* const> params, const std::function<double()>& loss,
                  const std::function<void()>& compute_grads, double h) {
    compute_grads();
    std::vector<std::vector<double>> analytic;
    for (const ParamTensor* p : params) analytic.push_back(p->grad);

    double worst = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        ParamTensor& p = *params[i];
        for (size_t j = 0; j < p.numel(); ++j) {
            const double orig = p.values[j];
            p.values[j] = orig + h;
            const double lp = loss();
            p.values[j] = orig - h;
            const double lm = loss();
            p.values[j] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double rel =
                std::abs(analytic[i][j] - numeric) / std::max(1e-8, std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace optlab::nn
