#include "optlab/adv/goa.hpp"

#include <algorithm>
#include <cmath>

namespace optlab::adv {

size_t JointIndex::size() const {
    size_t s = 1;
    for (int i = 0; i < n; ++i) s *= static_cast<size_t>(n - 1);
    return s;
}

size_t JointIndex::encode(std::span<const int> components) const {
    if (static_cast<int>(components.size()) != n)
        throw ConfigError("JointIndex::encode: component count mismatch");
    size_t flat = 0;
    size_t radix = 1;
    for (int i = 0; i < n; ++i) {
        const int c = components[static_cast<size_t>(i)];
        if (c < 0 || c >= n || c == i)
            throw ConfigError("JointIndex::encode: component " + std::to_string(i) +
                              " must advise a different agent");
        const int digit = c < i ? c : c - 1;
        flat += static_cast<size_t>(digit) * radix;
        radix *= static_cast<size_t>(n - 1);
    }
    return flat;
}

std::vector<int> JointIndex::decode(size_t flat) const {
    if (flat >= size()) throw ConfigError("JointIndex::decode: flat index out of range");
    std::vector<int> components(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int digit = static_cast<int>(flat % static_cast<size_t>(n - 1));
        flat /= static_cast<size_t>(n - 1);
        components[static_cast<size_t>(i)] = digit < i ? digit : digit + 1;
    }
    return components;
}

GlobalOptionAdvisor::GlobalOptionAdvisor(int state_dim, int num_agents, GoaParams params,
                                         uint64_t seed)
    : num_agents_(num_agents),
      index_{num_agents},
      params_(std::move(params)),
      q_([&] {
          std::vector<int> sizes{state_dim};
          for (int h : params_.q_hidden) sizes.push_back(h);
          sizes.push_back(static_cast<int>(index_.size()));
          return nn::Mlp(sizes, nn::Activation::Tanh, nn::Head::Linear, 1.0, seed);
      }()),
      q_target_(q_.clone()),
      beta_(state_dim, params_.beta_hidden, static_cast<int>(index_.size()), params_.term_lr,
            params_.xi, seed ^ 0x5851f42dULL, params_.literal_additive_xi),
      buffer_(params_.replay_capacity) {
    if (num_agents_ < 2) throw ConfigError("GlobalOptionAdvisor: need at least 2 agents");
    q_opt_.lr = params_.q_lr;
}

double GlobalOptionAdvisor::joint_beta(std::span<const double> state, size_t joint_flat) const {
    if (params_.beta_override) return *params_.beta_override;
    return beta_.beta(state, static_cast<int>(joint_flat));
}

std::vector<double> GlobalOptionAdvisor::joint_values(std::span<const double> state) const {
    return q_.evaluate(state);
}

std::vector<int> GlobalOptionAdvisor::advise(std::span<const double> state, double eps, Rng& rng) {
    const size_t space = index_.size();
    size_t pick;
    if (eps > 0.0 && rng.bernoulli(eps)) {
        pick = static_cast<size_t>(rng.uniform_int(static_cast<int>(space)));
    } else {
        const std::vector<double> values = q_.evaluate(state);
        pick = 0;
        for (size_t j = 1; j < space; ++j)
            if (values[j] > values[pick]) pick = j;
    }
    active_joint_ = pick;
    has_active_ = true;
    return index_.decode(pick);
}

bool GlobalOptionAdvisor::sample_joint_termination(std::span<const double> next_state, Rng& rng) {
    if (!has_active_) throw UsageError("GlobalOptionAdvisor: no active joint option");
    return rng.bernoulli(joint_beta(next_state, active_joint_));
}

double GlobalOptionAdvisor::u_value(std::span<const double> next_state, size_t joint_flat) const {
    const std::vector<double> q = q_target_.evaluate(next_state);
    const double best = *std::max_element(q.begin(), q.end());
    return arrival_mix(joint_beta(next_state, joint_flat), q[joint_flat], best);
}

AdvisorUpdateReport GlobalOptionAdvisor::update(Rng& rng) {
    AdvisorUpdateReport report;
    if (buffer_.size() < std::max<size_t>(params_.warmup, static_cast<size_t>(params_.batch)))
        return report;
    auto batch = buffer_.sample(params_.batch, rng);
    if (!batch) return report;

    const double inv_b = 1.0 / static_cast<double>(batch->size());
    q_.zero_grad();
    double loss = 0.0;
    for (const rl::GlobalTransition* t : *batch) {
        const double u = u_value(t->next_state, t->joint_option);
        const double y = t->team_reward + params_.gamma * (t->done ? 0.0 : u);
        const std::vector<double> q = q_.forward(t->state);
        const double d = q[t->joint_option] - y;
        loss += d * d * inv_b;
        std::vector<double> upstream(q.size(), 0.0);
        upstream[t->joint_option] = 2.0 * d * inv_b;
        q_.backward(upstream);
    }
    {
        auto qp = q_.params();
        q_opt_.step(qp);
    }

    if (!params_.beta_override) {
        for (const rl::GlobalTransition* t : *batch) {
            const std::vector<double> q = q_.evaluate(t->next_state);
            const double best = *std::max_element(q.begin(), q.end());
            beta_.update(t->next_state, static_cast<int>(t->joint_option),
                         q[t->joint_option] - best);
        }
    }

    ++updates_;
    if (updates_ % params_.target_sync == 0) {
        q_target_.copy_params_from(q_);
        report.target_synced = true;
    }
    report.skipped = false;
    report.q_loss = loss;
    report.update_step = updates_;
    return report;
}

}  // namespace optlab::adv
