#include "optlab/adv/sro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optlab::adv {

namespace {
std::vector<int> with_hidden(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes{in};
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(out);
    return sizes;
}
}  // namespace

SrOptionAdvisor::SrOptionAdvisor(int obs_dim, int num_agents, const PolicyViews* policies,
                                 SroParams params, uint64_t seed)
    : num_agents_(num_agents),
      policies_(policies),
      params_(std::move(params)),
      embed_(with_hidden(obs_dim, params_.embed_hidden, params_.embed_dim),
             nn::Activation::Tanh, nn::Head::Linear, 1.0, seed),
      decoder_(with_hidden(params_.embed_dim, params_.decoder_hidden, obs_dim),
               nn::Activation::Tanh, nn::Head::Linear, 1.0, seed ^ 0x2545f491ULL),
      sr_(with_hidden(params_.embed_dim, params_.sr_hidden, num_agents * params_.embed_dim),
          nn::Activation::Tanh, nn::Head::Linear, 1.0, seed ^ 0x4f6cdd1dULL),
      sr_target_(sr_.clone()),
      beta_(params_.embed_dim, params_.beta_hidden, num_agents, params_.term_lr, params_.xi,
            seed ^ 0x94d049bbULL, params_.literal_additive_xi),
      w_shared_(std::vector<double>(static_cast<size_t>(params_.embed_dim), 0.0),
                std::vector<int>{params_.embed_dim}),
      buffer_(params_.replay_capacity, num_agents) {
    if (num_agents_ < 1) throw ConfigError("SrOptionAdvisor: need at least 1 option");
    if (!policies_) throw ConfigError("SrOptionAdvisor: policy views required");
    embed_opt_.lr = params_.embed_lr;
    decoder_opt_.lr = params_.embed_lr;
    sr_opt_.lr = params_.sr_lr;
    if (params_.per_agent_w) {
        for (int i = 0; i < num_agents_; ++i)
            w_agent_.emplace_back(std::vector<double>(static_cast<size_t>(params_.embed_dim), 0.0),
                                  std::vector<int>{params_.embed_dim});
        w_opt_.resize(static_cast<size_t>(num_agents_));
    } else {
        w_opt_.resize(1);
    }
    for (auto& o : w_opt_) o.lr = params_.reward_lr;
}

SroEmbedding SrOptionAdvisor::embed(std::span<const double> obs, int agent) const {
    SroEmbedding out;
    out.phi = embed_.evaluate(obs);
    out.reconstruction = decoder_.evaluate(out.phi);
    out.reward_estimate = dot(out.phi, w_for(agent).values);
    return out;
}

std::vector<double> SrOptionAdvisor::values_at_phi(std::span<const double> phi, int agent) const {
    const std::vector<double> sr_out = sr_.evaluate(phi);
    std::vector<double> q(static_cast<size_t>(num_agents_));
    for (int o = 0; o < num_agents_; ++o)
        q[static_cast<size_t>(o)] = dot(sr_head(sr_out, o), w_for(agent).values);
    return q;
}

std::vector<double> SrOptionAdvisor::option_values(int agent, std::span<const double> obs) {
    return values_at_phi(embed_.evaluate(obs), agent);
}

double SrOptionAdvisor::termination_beta(int /*agent*/, std::span<const double> obs, int option) {
    if (params_.beta_override) return *params_.beta_override;
    return beta_.beta(embed_.evaluate(obs), option);
}

std::vector<double> SrOptionAdvisor::u_vector(std::span<const double> phi_next, int option,
                                              int agent) const {
    const std::vector<double> sr_out = sr_target_.evaluate(phi_next);
    // Greedy reselection under this agent's reward preference.
    int best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (int o = 0; o < num_agents_; ++o) {
        const double q = dot(sr_head(sr_out, o), w_for(agent).values);
        if (q > best_q) {
            best_q = q;
            best = o;
        }
    }
    const double beta = params_.beta_override
                            ? *params_.beta_override
                            : beta_.beta(phi_next, option);
    const auto cur = sr_head(sr_out, option);
    const auto sel = sr_head(sr_out, best);
    std::vector<double> u(static_cast<size_t>(params_.embed_dim));
    for (int d = 0; d < params_.embed_dim; ++d)
        u[static_cast<size_t>(d)] = arrival_mix(beta, cur[static_cast<size_t>(d)],
                                                sel[static_cast<size_t>(d)]);
    return u;
}

AdvisorUpdateReport SrOptionAdvisor::update(Rng& rng) {
    AdvisorUpdateReport report;
    const int per = std::max(1, params_.batch / std::max(1, num_agents_));
    if (buffer_.size() < std::max<size_t>(params_.warmup, static_cast<size_t>(params_.batch)))
        return report;
    for (int a = 0; a < num_agents_; ++a)
        if (buffer_.agent_size(a) < static_cast<size_t>(per)) return report;

    auto batch = buffer_.sample(per * num_agents_, true, rng);
    if (!batch) return report;
    const double inv_b = 1.0 / static_cast<double>(batch->items.size());

    // Reconstruction and reward regression; both flow into the embedding.
    embed_.zero_grad();
    decoder_.zero_grad();
    w_shared_.zero_grad();
    for (auto& w : w_agent_) w.zero_grad();

    double recon_loss = 0.0, reward_loss = 0.0;
    for (const rl::Transition* t : batch->items) {
        const std::vector<double> phi = embed_.forward(t->obs);
        const std::vector<double> recon = decoder_.forward(phi);
        std::vector<double> up(recon.size());
        for (size_t i = 0; i < recon.size(); ++i) {
            const double d = recon[i] - t->obs[i];
            recon_loss += d * d * inv_b;
            up[i] = 2.0 * d * inv_b;
        }
        std::vector<double> dphi = decoder_.backward(up);

        nn::ParamTensor& w = params_.per_agent_w ? w_agent_[static_cast<size_t>(t->agent)]
                                                 : w_shared_;
        const double rhat = dot(phi, w.values);
        const double rerr = rhat - t->reward;
        reward_loss += rerr * rerr * inv_b;
        for (size_t d = 0; d < phi.size(); ++d) {
            w.grad[d] += 2.0 * rerr * phi[d] * inv_b;
            dphi[d] += 2.0 * rerr * w.values[d] * inv_b;
        }
        embed_.backward(dphi);
    }
    {
        auto ep = embed_.params();
        embed_opt_.step(ep);
        auto dp = decoder_.params();
        decoder_opt_.step(dp);
    }
    if (params_.per_agent_w) {
        for (int i = 0; i < num_agents_; ++i) {
            nn::ParamTensor* wp[] = {&w_agent_[static_cast<size_t>(i)]};
            w_opt_[static_cast<size_t>(i)].step(wp);
        }
    } else {
        nn::ParamTensor* wp[] = {&w_shared_};
        w_opt_[0].step(wp);
    }

    // SR regression for every option whose intra-option policy selects the
    // observed action; gradients stop at the embedding. Embeddings and the
    // target output are computed once per sample and shared across options.
    sr_.zero_grad();
    double sr_loss = 0.0;
    std::vector<std::vector<double>> phi_next_cache(batch->items.size());
    for (size_t b = 0; b < batch->items.size(); ++b) {
        const rl::Transition* t = batch->items[b];
        const std::vector<double> phi = embed_.evaluate(t->obs);
        phi_next_cache[b] = embed_.evaluate(t->next_obs);
        const std::vector<double>& phi_next = phi_next_cache[b];

        std::vector<double> target_out;
        std::vector<double> betas;
        int greedy = 0;
        if (!t->done) {
            target_out = sr_target_.evaluate(phi_next);
            double best_q = -std::numeric_limits<double>::infinity();
            for (int o = 0; o < num_agents_; ++o) {
                const double q = dot(sr_head(target_out, o), w_for(t->agent).values);
                if (q > best_q) {
                    best_q = q;
                    greedy = o;
                }
            }
            if (params_.beta_override) {
                betas.assign(static_cast<size_t>(num_agents_), *params_.beta_override);
            } else {
                betas = beta_.beta_all(phi_next);
            }
        }

        for (int o = 0; o < num_agents_; ++o) {
            const std::vector<double> pi = policies_->probs(o, t->obs);
            if (pi[static_cast<size_t>(t->action)] < match_threshold(pi.size())) continue;
            std::vector<double> y = phi;
            if (!t->done) {
                const auto cur = sr_head(target_out, o);
                const auto sel = sr_head(target_out, greedy);
                const double beta = betas[static_cast<size_t>(o)];
                for (int d = 0; d < params_.embed_dim; ++d)
                    y[static_cast<size_t>(d)] +=
                        params_.gamma * arrival_mix(beta, cur[static_cast<size_t>(d)],
                                                    sel[static_cast<size_t>(d)]);
            }
            const std::vector<double> sr_out = sr_.forward(phi);
            const auto head = sr_head(sr_out, o);
            std::vector<double> up(sr_out.size(), 0.0);
            for (int d = 0; d < params_.embed_dim; ++d) {
                const double diff = head[static_cast<size_t>(d)] - y[static_cast<size_t>(d)];
                sr_loss += diff * diff * inv_b;
                up[static_cast<size_t>(o) * params_.embed_dim + static_cast<size_t>(d)] =
                    2.0 * diff * inv_b;
            }
            sr_.backward(up);
        }
    }
    {
        auto sp = sr_.params();
        sr_opt_.step(sp);
    }

    // Termination step for each sample's active option under the sampling
    // agent's preference.
    if (!params_.beta_override) {
        for (size_t b = 0; b < batch->items.size(); ++b) {
            const rl::Transition* t = batch->items[b];
            if (t->option < 0) continue;
            const std::vector<double>& phi_next = phi_next_cache[b];
            const std::vector<double> q = values_at_phi(phi_next, t->agent);
            const double best = *std::max_element(q.begin(), q.end());
            beta_.update(phi_next, t->option, q[static_cast<size_t>(t->option)] - best);
        }
    }

    ++updates_;
    if (updates_ % params_.target_sync == 0) {
        sr_target_.copy_params_from(sr_);
        report.target_synced = true;
    }
    report.skipped = false;
    report.q_loss = sr_loss;
    report.recon_loss = recon_loss;
    report.reward_loss = reward_loss;
    report.update_step = updates_;
    return report;
}

}  // namespace optlab::adv
