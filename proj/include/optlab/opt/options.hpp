// Options machinery shared by all advisors: epsilon-greedy option selection
// with self-exclusion, sigmoid termination heads with the direct termination
// gradient step, the decaying cross-entropy transfer loss, and the per-agent
// call-and-return controller.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "optlab/nn/mlp.hpp"

namespace optlab::opt {

// Candidate options for an agent are all option ids except its own.
struct OptionMask {
    int num_options = 0;
    int self = -1;

    bool allowed(int option) const { return option != self; }
    int candidates() const { return self >= 0 && self < num_options ? num_options - 1 : num_options; }
};

// Epsilon-greedy over the masked values; ties broken by lowest option id.
int select_option(std::span<const double> values, const OptionMask& mask, double eps, Rng& rng);

// Sigmoid head over options. `input` is whatever the owning advisor scores
// termination on (observation, global state, or embedding). update() applies
// the direct gradient step
//     params -= alpha * d beta / d params * (advantage + xi)
// so a disadvantaged option (A < -xi) becomes more likely to terminate.
// `literal_additive_xi` switches to the literal reading where xi is added to
// every parameter after the advantage-only step.
class TerminationHead {
public:
    TerminationHead(int input_dim, std::vector<int> hidden, int num_options, double alpha,
                    double xi, uint64_t seed, bool literal_additive_xi = false);

    double beta(std::span<const double> input, int option) const;
    std::vector<double> beta_all(std::span<const double> input) const;
    bool sample(std::span<const double> input, int option, Rng& rng) const;
    void update(std::span<const double> input, int option, double advantage);

    nn::Mlp& net() { return net_; }
    const nn::Mlp& net() const { return net_; }
    double xi() const { return xi_; }

private:
    nn::Mlp net_;
    double alpha_;
    double xi_;
    bool literal_additive_xi_;
};

// Weighting factor f(t) = 0.5 + tanh(3 - mu*t)/2 on an integer update clock.
struct TransferSchedule {
    double mu = 1e-3;
    double temperature = 1.0;
    int64_t t = 0;

    double f() const { return f_at(t); }
    double f_at(int64_t step) const { return 0.5 + std::tanh(3.0 - mu * static_cast<double>(step)) / 2.0; }
    void tick() { ++t; }
};

// H(p||q) = -sum_a p(a) log q(a), with q clamped at `floor`.
double cross_entropy(std::span<const double> p, std::span<const double> q, double floor = 1e-8);

// f(t) * H(target || policy) for one observation.
double transfer_loss(std::span<const double> advised_probs, std::span<const double> policy_probs,
                     const TransferSchedule& schedule);

struct ActiveAdvice {
    int option = -1;
    int steps_held = 0;
};

// What the controller needs from an advisor to drive per-agent
// call-and-return execution.
class OptionValueSource {
public:
    virtual ~OptionValueSource() = default;
    virtual int num_options() const = 0;
    virtual std::vector<double> option_values(int agent, std::span<const double> input) = 0;
    virtual double termination_beta(int agent, std::span<const double> input, int option) = 0;
};

struct AdviceStepEvent {
    int option = -1;
    bool reselected = false;       // a selection happened this call
    bool termination_sample = false;  // beta draw came up true
};

// Per-agent option state. begin() selects an initial option; step() samples
// termination at the new input and reselects when it fires.
class AdviceController {
public:
    AdviceController(int num_agents, int num_options);

    AdviceStepEvent begin(int agent, OptionValueSource& source, std::span<const double> input,
                          double eps, Rng& rng);
    AdviceStepEvent step(int agent, OptionValueSource& source, std::span<const double> input,
                         double eps, Rng& rng);

    const ActiveAdvice& advice(int agent) const { return state_[static_cast<size_t>(agent)]; }
    void reset();

private:
    int select(int agent, OptionValueSource& source, std::span<const double> input, double eps,
               Rng& rng);
    int num_options_;
    std::vector<ActiveAdvice> state_;
};

}  // namespace optlab::opt
