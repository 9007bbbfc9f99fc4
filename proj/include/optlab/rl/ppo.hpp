// Per-agent PPO learner: softmax policy, scalar critic, segment returns with
// decision-time discounting, and the KL-penalty surrogate with an optional
// imitation term injected by an option advisor.
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "optlab/nn/mlp.hpp"

namespace optlab::rl {

struct SegmentStep {
    std::vector<double> obs;
    int action = 0;
    double reward = 0.0;
    double logp_old = 0.0;
    bool done = false;
    int advice_option = -1;  // advising agent index at this step, -1 if none
};

// On-policy slice of one agent's experience. `boot_obs` is the observation
// after the final step; it is bootstrapped only when that step is
// non-terminal.
struct TrajectorySegment {
    std::vector<SegmentStep> steps;
    std::vector<double> boot_obs;
    bool bootstrap = false;

    bool empty() const { return steps.empty(); }
    size_t length() const { return steps.size(); }
};

// Return targets G_t = sum_{t'>t} gamma^{t'-t} r_{t'}, treating the reward of
// the action at index m as arriving one step later. Recursion:
// G_t = gamma * (r_t + G_{t+1}), reset across terminal steps, seeded with the
// bootstrap value after the last step.
std::vector<double> segment_returns(const TrajectorySegment& seg, double gamma,
                                    double boot_value);

double critic_loss(const TrajectorySegment& seg, const nn::Mlp& value_net, double gamma);

struct ActorLossParts {
    double surrogate = 0.0;  // -sum ratio * advantage
    double kl = 0.0;         // sum_t KL[old || new]
    double transfer = 0.0;   // f * sum_t H(target || new)
    double total = 0.0;
};

// Scalar actor loss for one step given full distributions; the pure core
// shared by the loss evaluation, the gradient path, and the tests.
ActorLossParts actor_step_loss(std::span<const double> probs, std::span<const double> old_probs,
                               int action, double advantage, double kl_coeff,
                               const std::vector<double>* transfer_target, double f_weight,
                               double prob_floor = 1e-8);

// dLoss/dprobs for the same expression.
std::vector<double> actor_step_upstream(std::span<const double> probs,
                                        std::span<const double> old_probs, int action,
                                        double advantage, double kl_coeff,
                                        const std::vector<double>* transfer_target,
                                        double f_weight, double prob_floor = 1e-8);

struct PpoParams {
    std::vector<int> policy_hidden{64, 64};
    std::vector<int> value_hidden{64, 64};
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double gamma = 0.99;
    double kl_coeff = 0.2;
    int epochs = 1;
    bool normalize_advantages = false;
    double prob_floor = 1e-8;
};

struct UpdateReport {
    double critic_loss = 0.0;
    double actor_surrogate = 0.0;
    double kl = 0.0;
    double transfer = 0.0;
    double actor_total = 0.0;
};

class PpoAgent {
public:
    PpoAgent(int obs_dim, int num_actions, PpoParams params, uint64_t seed);

    std::pair<int, double> act(std::span<const double> obs, Rng& rng) const;

    // One critic step and `epochs` actor steps on the segment.
    // `transfer_targets`, when present, holds one target distribution per
    // step (empty vector = no advice at that step); the transfer path is
    // skipped entirely when absent.
    UpdateReport update(const TrajectorySegment& seg,
                        const std::vector<std::vector<double>>* transfer_targets,
                        double f_weight);

    const nn::Mlp& policy() const { return policy_; }
    nn::Mlp& policy() { return policy_; }
    const nn::Mlp& value() const { return value_; }
    nn::Mlp& value() { return value_; }
    const PpoParams& params() const { return params_; }

private:
    PpoParams params_;
    nn::Mlp policy_;
    nn::Mlp value_;
    nn::AdamState actor_opt_;
    nn::AdamState critic_opt_;
    mutable bool warned_underflow_ = false;
};

}  // namespace optlab::rl
