// Advisor base: an advisor scores options (teammate policies) for each
// agent, owns the termination machinery, and learns from replayed
// transitions. LOA/SRO advise per agent through the call-and-return
// controller; GOA advises all agents with one joint selection.
#pragma once

#include <memory>
#include <optional>

#include "optlab/opt/options.hpp"
#include "optlab/rl/replay.hpp"

namespace optlab::adv {

// Live read-only views of the agents' current policies; option i's
// intra-option policy is agent i's policy evaluated on the requesting
// agent's observation.
class PolicyViews {
public:
    virtual ~PolicyViews() = default;
    virtual int num_agents() const = 0;
    virtual std::vector<double> probs(int agent, std::span<const double> obs) const = 0;
    virtual std::vector<double> logits(int agent, std::span<const double> obs) const = 0;
};

struct AdvisorUpdateReport {
    bool skipped = true;   // warmup or insufficient samples
    double q_loss = 0.0;   // TD loss (GOA/LOA) or SR loss (SRO)
    double recon_loss = 0.0;
    double reward_loss = 0.0;
    int64_t update_step = 0;
    bool target_synced = false;
};

class Advisor : public opt::OptionValueSource {
public:
    virtual bool joint() const { return false; }
    virtual void push_local(const rl::Transition&) {}
    virtual void push_global(const rl::GlobalTransition&) {}
    virtual AdvisorUpdateReport update(Rng& rng) = 0;
    virtual int64_t update_steps() const = 0;
};

// Mixing rule shared by the arrival-value computations: continue with the
// current option's value unless the option terminates, in which case take
// the best available value.
inline double arrival_mix(double beta, double q_current, double q_best) {
    return (1.0 - beta) * q_current + beta * q_best;
}

}  // namespace optlab::adv
