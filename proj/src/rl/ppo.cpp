#include "optlab/rl/ppo.hpp"

#include <cmath>
#include <cstdio>

namespace optlab::rl {

std::vector<double> segment_returns(const TrajectorySegment& seg, double gamma,
                                    double boot_value) {
    std::vector<double> g(seg.steps.size(), 0.0);
    double acc = seg.bootstrap ? boot_value : 0.0;
    for (size_t i = seg.steps.size(); i-- > 0;) {
        const SegmentStep& st = seg.steps[i];
        if (st.done) acc = 0.0;
        acc = gamma * (st.reward + acc);
        g[i] = acc;
    }
    return g;
}

double critic_loss(const TrajectorySegment& seg, const nn::Mlp& value_net, double gamma) {
    if (seg.empty()) throw UsageError("critic_loss: empty segment");
    const double boot = seg.bootstrap ? value_net.evaluate(seg.boot_obs)[0] : 0.0;
    const std::vector<double> g = segment_returns(seg, gamma, boot);
    double loss = 0.0;
    for (size_t t = 0; t < seg.steps.size(); ++t) {
        const double v = value_net.evaluate(seg.steps[t].obs)[0];
        const double d = g[t] - v;
        loss += d * d;
    }
    return loss;
}

ActorLossParts actor_step_loss(std::span<const double> probs, std::span<const double> old_probs,
                               int action, double advantage, double kl_coeff,
                               const std::vector<double>* transfer_target, double f_weight,
                               double prob_floor) {
    ActorLossParts parts;
    const double old_pa = std::max(old_probs[static_cast<size_t>(action)], prob_floor);
    parts.surrogate = -(probs[static_cast<size_t>(action)] / old_pa) * advantage;
    for (size_t a = 0; a < probs.size(); ++a) {
        if (old_probs[a] > 0.0)
            parts.kl += old_probs[a] *
                        (std::log(old_probs[a]) - std::log(std::max(probs[a], prob_floor)));
    }
    if (transfer_target && !transfer_target->empty()) {
        double h = 0.0;
        for (size_t a = 0; a < probs.size(); ++a)
            if ((*transfer_target)[a] > 0.0)
                h -= (*transfer_target)[a] * std::log(std::max(probs[a], prob_floor));
        parts.transfer = f_weight * h;
    }
    parts.total = parts.surrogate + kl_coeff * parts.kl + parts.transfer;
    return parts;
}

std::vector<double> actor_step_upstream(std::span<const double> probs,
                                        std::span<const double> old_probs, int action,
                                        double advantage, double kl_coeff,
                                        const std::vector<double>* transfer_target,
                                        double f_weight, double prob_floor) {
    std::vector<double> u(probs.size(), 0.0);
    const double old_pa = std::max(old_probs[static_cast<size_t>(action)], prob_floor);
    u[static_cast<size_t>(action)] -= advantage / old_pa;
    for (size_t a = 0; a < probs.size(); ++a) {
        const double pa = std::max(probs[a], prob_floor);
        u[a] -= kl_coeff * old_probs[a] / pa;
        if (transfer_target && !transfer_target->empty())
            u[a] -= f_weight * (*transfer_target)[a] / pa;
    }
    return u;
}

PpoAgent::PpoAgent(int obs_dim, int num_actions, PpoParams params, uint64_t seed)
    : params_(std::move(params)),
      policy_([&] {
          std::vector<int> sizes{obs_dim};
          for (int h : params_.policy_hidden) sizes.push_back(h);
          sizes.push_back(num_actions);
          return nn::Mlp(sizes, nn::Activation::Tanh, nn::Head::Softmax, 1.0, seed);
      }()),
      value_([&] {
          std::vector<int> sizes{obs_dim};
          for (int h : params_.value_hidden) sizes.push_back(h);
          sizes.push_back(1);
          return nn::Mlp(sizes, nn::Activation::Tanh, nn::Head::Linear, 1.0, seed ^ 0x9e3779b9ULL);
      }()) {
    actor_opt_.lr = params_.actor_lr;
    critic_opt_.lr = params_.critic_lr;
}

std::pair<int, double> PpoAgent::act(std::span<const double> obs, Rng& rng) const {
    const std::vector<double> probs = policy_.evaluate(obs);
    const int action = rng.categorical(probs);
    const double logp = std::log(std::max(probs[static_cast<size_t>(action)], 1e-12));
    return {action, logp};
}

UpdateReport PpoAgent::update(const TrajectorySegment& seg,
                              const std::vector<std::vector<double>>* transfer_targets,
                              double f_weight) {
    if (seg.empty()) throw UsageError("PpoAgent::update: empty segment");
    if (transfer_targets && transfer_targets->size() != seg.length())
        throw ConfigError("PpoAgent::update: transfer target count mismatch");

    UpdateReport report;
    const size_t T = seg.length();

    // Values and returns before any parameter movement.
    const double boot = seg.bootstrap ? value_.evaluate(seg.boot_obs)[0] : 0.0;
    const std::vector<double> g = segment_returns(seg, params_.gamma, boot);
    std::vector<double> values(T);
    for (size_t t = 0; t < T; ++t) values[t] = value_.evaluate(seg.steps[t].obs)[0];

    std::vector<double> adv(T);
    for (size_t t = 0; t < T; ++t) adv[t] = g[t] - values[t];
    if (params_.normalize_advantages && T > 1) {
        double mean = 0.0;
        for (double a : adv) mean += a;
        mean /= static_cast<double>(T);
        double var = 0.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / static_cast<double>(T - 1));
        for (double& a : adv) a = (a - mean) / std::max(sd, 1e-8);
    }

    // Critic: one Adam step on the summed squared error.
    value_.zero_grad();
    for (size_t t = 0; t < T; ++t) {
        const double v = value_.forward(seg.steps[t].obs)[0];
        const double d = g[t] - v;
        report.critic_loss += d * d;
        value_.backward(std::vector<double>{2.0 * (v - g[t])});
    }
    {
        auto vp = value_.params();
        critic_opt_.step(vp);
    }

    // Actor: freeze the old distribution, then take `epochs` steps.
    std::vector<std::vector<double>> old_probs(T);
    for (size_t t = 0; t < T; ++t) {
        old_probs[t] = policy_.evaluate(seg.steps[t].obs);
        const double pa = old_probs[t][static_cast<size_t>(seg.steps[t].action)];
        if (pa < params_.prob_floor && !warned_underflow_) {
            std::fprintf(stderr, "optlab: warning: old policy probability underflow (%g), clamping\n", pa);
            warned_underflow_ = true;
        }
    }

    for (int epoch = 0; epoch < params_.epochs; ++epoch) {
        policy_.zero_grad();
        ActorLossParts sums;
        for (size_t t = 0; t < T; ++t) {
            const std::vector<double> probs = policy_.forward(seg.steps[t].obs);
            const std::vector<double>* target = nullptr;
            if (transfer_targets && !(*transfer_targets)[t].empty())
                target = &(*transfer_targets)[t];
            const ActorLossParts parts =
                actor_step_loss(probs, old_probs[t], seg.steps[t].action, adv[t],
                                params_.kl_coeff, target, f_weight, params_.prob_floor);
            sums.surrogate += parts.surrogate;
            sums.kl += parts.kl;
            sums.transfer += parts.transfer;
            sums.total += parts.total;
            policy_.backward(actor_step_upstream(probs, old_probs[t], seg.steps[t].action,
                                                 adv[t], params_.kl_coeff, target, f_weight,
                                                 params_.prob_floor));
        }
        if (epoch == 0) {
            report.actor_surrogate = sums.surrogate;
            report.kl = sums.kl;
            report.transfer = sums.transfer;
            report.actor_total = sums.total;
        }
        auto pp = policy_.params();
        actor_opt_.step(pp);
    }
    return report;
}

}  // namespace optlab::rl
