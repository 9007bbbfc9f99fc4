// Local option advisor: option values over each agent's local observation.
// Shared mode trains one module on every agent's transitions (subject to the
// sample-inconsistency pathology); per-agent mode gives each agent its own
// module fed only by its own experience.
#pragma once

#include "optlab/adv/advisor.hpp"

namespace optlab::adv {

struct LoaParams {
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
    bool per_agent_modules = false;
    bool literal_additive_xi = false;
    std::optional<double> beta_override;
};

class LocalOptionAdvisor : public Advisor {
public:
    LocalOptionAdvisor(int obs_dim, int num_agents, LoaParams params, uint64_t seed);

    int num_options() const override { return num_agents_; }
    std::vector<double> option_values(int agent, std::span<const double> obs) override;
    double termination_beta(int agent, std::span<const double> obs, int option) override;

    void push_local(const rl::Transition& t) override { buffer_.push(t); }
    AdvisorUpdateReport update(Rng& rng) override;
    int64_t update_steps() const override { return updates_; }

    // Arrival value for a module's target net (exposed for the oracle tests).
    double u_value(int module, std::span<const double> next_obs, int option) const;

    nn::Mlp& q_net(int module = 0) { return modules_[static_cast<size_t>(module)].q; }
    void sync_target_now() {
        for (Module& m : modules_) m.q_target.copy_params_from(m.q);
    }

private:
    struct Module {
        nn::Mlp q;
        nn::Mlp q_target;
        opt::TerminationHead beta;
        nn::AdamState opt;
    };
    Module& module_for(int agent) {
        return modules_[params_.per_agent_modules ? static_cast<size_t>(agent) : 0];
    }
    const Module& module_for(int agent) const {
        return modules_[params_.per_agent_modules ? static_cast<size_t>(agent) : 0];
    }
    void update_module(Module& m, const rl::Batch& batch, double inv_b, double& loss);

    int num_agents_;
    LoaParams params_;
    std::vector<Module> modules_;
    rl::ReplayBuffer buffer_;
    int64_t updates_ = 0;
};

}  // namespace optlab::adv
