#include "optlab/adv/loa.hpp"

#include <algorithm>

namespace optlab::adv {

LocalOptionAdvisor::LocalOptionAdvisor(int obs_dim, int num_agents, LoaParams params,
                                       uint64_t seed)
    : num_agents_(num_agents),
      params_(std::move(params)),
      buffer_(params_.replay_capacity, num_agents) {
    if (num_agents_ < 2) throw ConfigError("LocalOptionAdvisor: need at least 2 agents");
    const int n_modules = params_.per_agent_modules ? num_agents_ : 1;
    std::vector<int> q_sizes{obs_dim};
    for (int h : params_.q_hidden) q_sizes.push_back(h);
    q_sizes.push_back(num_agents_);
    for (int m = 0; m < n_modules; ++m) {
        const uint64_t s = seed ^ (0x100001b3ULL * static_cast<uint64_t>(m + 1));
        nn::Mlp q(q_sizes, nn::Activation::Tanh, nn::Head::Linear, 1.0, s);
        nn::Mlp q_target = q.clone();
        modules_.push_back(Module{std::move(q), std::move(q_target),
                                  opt::TerminationHead(obs_dim, params_.beta_hidden, num_agents_,
                                                       params_.term_lr, params_.xi,
                                                       s ^ 0x9e3779b9ULL,
                                                       params_.literal_additive_xi),
                                  nn::AdamState{}});
        modules_.back().opt.lr = params_.q_lr;
    }
}

std::vector<double> LocalOptionAdvisor::option_values(int agent, std::span<const double> obs) {
    return module_for(agent).q.evaluate(obs);
}

double LocalOptionAdvisor::termination_beta(int agent, std::span<const double> obs, int option) {
    if (params_.beta_override) return *params_.beta_override;
    return module_for(agent).beta.beta(obs, option);
}

double LocalOptionAdvisor::u_value(int module, std::span<const double> next_obs,
                                   int option) const {
    const Module& m = modules_[static_cast<size_t>(module)];
    const std::vector<double> q = m.q_target.evaluate(next_obs);
    const double best = *std::max_element(q.begin(), q.end());
    const double beta = params_.beta_override ? *params_.beta_override
                                              : m.beta.beta(next_obs, option);
    return arrival_mix(beta, q[static_cast<size_t>(option)], best);
}

void LocalOptionAdvisor::update_module(Module& m, const rl::Batch& batch, double inv_b,
                                       double& loss) {
    m.q.zero_grad();
    for (const rl::Transition* t : batch.items) {
        if (t->option < 0) continue;
        const int module_idx =
            params_.per_agent_modules ? t->agent : 0;
        const double u = u_value(module_idx, t->next_obs, t->option);
        const double y = t->reward + params_.gamma * (t->done ? 0.0 : u);
        const std::vector<double> q = m.q.forward(t->obs);
        const double d = q[static_cast<size_t>(t->option)] - y;
        loss += d * d * inv_b;
        std::vector<double> upstream(q.size(), 0.0);
        upstream[static_cast<size_t>(t->option)] = 2.0 * d * inv_b;
        m.q.backward(upstream);
    }
    auto qp = m.q.params();
    m.opt.step(qp);

    if (!params_.beta_override) {
        for (const rl::Transition* t : batch.items) {
            if (t->option < 0) continue;
            const std::vector<double> q = m.q.evaluate(t->next_obs);
            const double best = *std::max_element(q.begin(), q.end());
            m.beta.update(t->next_obs, t->option, q[static_cast<size_t>(t->option)] - best);
        }
    }
}

AdvisorUpdateReport LocalOptionAdvisor::update(Rng& rng) {
    AdvisorUpdateReport report;
    if (buffer_.size() < std::max<size_t>(params_.warmup, static_cast<size_t>(params_.batch)))
        return report;

    double loss = 0.0;
    if (params_.per_agent_modules) {
        // Each module learns from its own agent's partition only.
        for (int a = 0; a < num_agents_; ++a)
            if (buffer_.agent_size(a) == 0) return report;
        for (int a = 0; a < num_agents_; ++a) {
            auto batch = buffer_.sample_agent(a, params_.batch, rng);
            if (!batch || batch->items.empty()) continue;
            update_module(modules_[static_cast<size_t>(a)], *batch,
                          1.0 / static_cast<double>(batch->items.size()), loss);
        }
        loss /= static_cast<double>(num_agents_);
    } else {
        auto batch = buffer_.sample(params_.batch, false, rng);
        if (!batch) return report;
        update_module(modules_[0], *batch, 1.0 / static_cast<double>(batch->items.size()), loss);
    }

    ++updates_;
    bool synced = false;
    if (updates_ % params_.target_sync == 0) {
        for (Module& m : modules_) m.q_target.copy_params_from(m.q);
        synced = true;
    }
    report.skipped = false;
    report.q_loss = loss;
    report.update_step = updates_;
    report.target_synced = synced;
    return report;
}

}  // namespace optlab::adv
