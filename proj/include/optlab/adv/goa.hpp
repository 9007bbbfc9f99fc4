// Global option advisor: one option-value head per joint option tuple
// (component i advises agent i and never equals i), trained on global
// transitions with the summed team reward. Advice begins and ends for all
// agents simultaneously.
#pragma once

#include "optlab/adv/advisor.hpp"

namespace optlab::adv {

// Bijection between joint option tuples and flat head indices. Agent i's
// component ranges over {0..n-1}\{i}; the flat index is the mixed-radix
// number of the per-agent candidate positions, base (n-1).
struct JointIndex {
    int n = 0;

    size_t size() const;
    size_t encode(std::span<const int> components) const;
    std::vector<int> decode(size_t flat) const;
};

struct GoaParams {
    std::vector<int> q_hidden{64, 64};
    std::vector<int> beta_hidden{64, 64};
    double q_lr = 1e-5;
    double term_lr = 1e-3;
    double xi = 0.01;
    int batch = 32;
    size_t replay_capacity = 100000;
    int target_sync = 1000;
    size_t warmup = 1000;
    double gamma = 0.99;
    bool literal_additive_xi = false;
    std::optional<double> beta_override;  // test hook: constant termination prob
};

class GlobalOptionAdvisor : public Advisor {
public:
    GlobalOptionAdvisor(int state_dim, int num_agents, GoaParams params, uint64_t seed);

    bool joint() const override { return true; }
    int num_options() const override { return num_agents_; }

    // Joint epsilon-greedy selection; returns per-agent option ids and makes
    // the tuple active.
    std::vector<int> advise(std::span<const double> state, double eps, Rng& rng);
    // Samples the joint termination at the successor state; true means the
    // caller must reselect.
    bool sample_joint_termination(std::span<const double> next_state, Rng& rng);

    size_t active_joint() const { return active_joint_; }
    bool has_active() const { return has_active_; }
    void clear_active() { has_active_ = false; }

    // Joint option-value upon arrival (target network).
    double u_value(std::span<const double> next_state, size_t joint_flat) const;
    std::vector<double> joint_values(std::span<const double> state) const;
    double joint_beta(std::span<const double> state, size_t joint_flat) const;

    void push_global(const rl::GlobalTransition& t) override { buffer_.push(t); }
    AdvisorUpdateReport update(Rng& rng) override;
    int64_t update_steps() const override { return updates_; }

    const JointIndex& joint_index() const { return index_; }

    nn::Mlp& q_net() { return q_; }
    void sync_target_now() { q_target_.copy_params_from(q_); }

    // Per-agent interface is not meaningful for the joint advisor.
    std::vector<double> option_values(int, std::span<const double>) override {
        throw UsageError("GlobalOptionAdvisor advises jointly; use advise()");
    }
    double termination_beta(int, std::span<const double>, int) override {
        throw UsageError("GlobalOptionAdvisor advises jointly; use sample_joint_termination()");
    }

private:
    int num_agents_;
    JointIndex index_;
    GoaParams params_;
    nn::Mlp q_, q_target_;
    opt::TerminationHead beta_;
    nn::AdamState q_opt_;
    rl::GlobalBuffer buffer_;
    size_t active_joint_ = 0;
    bool has_active_ = false;
    int64_t updates_ = 0;
};

}  // namespace optlab::adv
