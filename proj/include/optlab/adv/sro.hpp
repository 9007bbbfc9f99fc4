// Successor-representation option advisor. One shared embedding feeds three
// sub-modules: a reconstruction decoder plus linear reward weights, an SR
// head per option predicting discounted future embedding occupancy, and a
// termination head. Option values factor as Q(phi, w) = m_sr(phi, w) . w,
// decoupling shared dynamics from per-agent reward preferences.
//
// Gradient routing: the reconstruction loss trains decoder + embedding, the
// reward loss trains w + embedding, the SR loss trains the SR net only, and
// the termination step trains its own head only.
#pragma once

#include "optlab/adv/advisor.hpp"

namespace optlab::adv {

struct SroParams {
    int embed_dim = 64;
    std::vector<int> embed_hidden{64};
    std::vector<int> decoder_hidden{64};
    std::vector<int> sr_hidden{64};
    std::vector<int> beta_hidden{64};
    double embed_lr = 1e-5;
    double sr_lr = 1e-5;
    double reward_lr = 1e-5;
    double term_lr = 1e-3;
    double xi = 0.01;
    int batch = 32;
    size_t replay_capacity = 100000;
    int target_sync = 1000;
    size_t warmup = 1000;
    double gamma = 0.99;
    bool per_agent_w = false;
    // An option "selects" the observed action when its policy puts at least
    // this much mass on it; defaults to uniform mass 1/|actions|.
    std::optional<double> match_threshold;
    bool literal_additive_xi = false;
    std::optional<double> beta_override;
};

struct SroEmbedding {
    std::vector<double> phi;
    std::vector<double> reconstruction;
    double reward_estimate = 0.0;
};

class SrOptionAdvisor : public Advisor {
public:
    // `policies` supplies the live intra-option policies (agent w's policy);
    // it must outlive the advisor.
    SrOptionAdvisor(int obs_dim, int num_agents, const PolicyViews* policies, SroParams params,
                    uint64_t seed);

    int num_options() const override { return num_agents_; }
    std::vector<double> option_values(int agent, std::span<const double> obs) override;
    double termination_beta(int agent, std::span<const double> obs, int option) override;

    void push_local(const rl::Transition& t) override { buffer_.push(t); }
    AdvisorUpdateReport update(Rng& rng) override;
    int64_t update_steps() const override { return updates_; }

    // Embedding, reconstruction, and reward estimate for one observation.
    SroEmbedding embed(std::span<const double> obs, int agent = 0) const;

    // SR upon arrival at an already-computed embedding (target SR net).
    std::vector<double> u_vector(std::span<const double> phi_next, int option, int agent) const;

    // Option values at an embedding (online SR net).
    std::vector<double> values_at_phi(std::span<const double> phi, int agent) const;

    nn::Mlp& embedding_net() { return embed_; }
    nn::Mlp& decoder_net() { return decoder_; }
    nn::Mlp& sr_net() { return sr_; }
    const nn::Mlp& sr_target_net() const { return sr_target_; }
    void sync_sr_target_now() { sr_target_.copy_params_from(sr_); }
    nn::ParamTensor& reward_weights(int agent = 0) {
        return params_.per_agent_w ? w_agent_[static_cast<size_t>(agent)] : w_shared_;
    }

private:
    std::span<const double> sr_head(const std::vector<double>& sr_out, int option) const {
        return std::span<const double>(sr_out).subspan(
            static_cast<size_t>(option) * static_cast<size_t>(params_.embed_dim),
            static_cast<size_t>(params_.embed_dim));
    }
    const nn::ParamTensor& w_for(int agent) const {
        return params_.per_agent_w ? w_agent_[static_cast<size_t>(agent)] : w_shared_;
    }
    double match_threshold(size_t num_actions) const {
        return params_.match_threshold ? *params_.match_threshold
                                       : 1.0 / static_cast<double>(num_actions);
    }

    int num_agents_;
    const PolicyViews* policies_;
    SroParams params_;
    nn::Mlp embed_;
    nn::Mlp decoder_;
    nn::Mlp sr_;
    nn::Mlp sr_target_;
    opt::TerminationHead beta_;
    nn::ParamTensor w_shared_;
    std::vector<nn::ParamTensor> w_agent_;
    nn::AdamState embed_opt_, decoder_opt_, sr_opt_;
    std::vector<nn::AdamState> w_opt_;  // one per weight tensor
    rl::ReplayBuffer buffer_;
    int64_t updates_ = 0;
};

}  // namespace optlab::adv
