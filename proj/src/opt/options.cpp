#include "optlab/opt/options.hpp"

#include <cmath>

namespace optlab::opt {

int select_option(std::span<const double> values, const OptionMask& mask, double eps, Rng& rng) {
    if (static_cast<int>(values.size()) != mask.num_options)
        throw ConfigError("select_option: value count does not match option count");
    if (mask.candidates() <= 0)
        throw ConfigError("select_option: no candidate options after masking");

    if (eps > 0.0 && rng.bernoulli(eps)) {
        int pick = rng.uniform_int(mask.candidates());
        for (int o = 0; o < mask.num_options; ++o) {
            if (!mask.allowed(o)) continue;
            if (pick-- == 0) return o;
        }
    }
    int best = -1;
    for (int o = 0; o < mask.num_options; ++o) {
        if (!mask.allowed(o)) continue;
        if (best < 0 || values[static_cast<size_t>(o)] > values[static_cast<size_t>(best)]) best = o;
    }
    return best;
}

TerminationHead::TerminationHead(int input_dim, std::vector<int> hidden, int num_options,
                                 double alpha, double xi, uint64_t seed,
                                 bool literal_additive_xi)
    : net_([&] {
          std::vector<int> sizes{input_dim};
          for (int h : hidden) sizes.push_back(h);
          sizes.push_back(num_options);
          return nn::Mlp(sizes, nn::Activation::Tanh, nn::Head::Sigmoid, 1.0, seed);
      }()),
      alpha_(alpha),
      xi_(xi),
      literal_additive_xi_(literal_additive_xi) {}

double TerminationHead::beta(std::span<const double> input, int option) const {
    return net_.evaluate(input)[static_cast<size_t>(option)];
}

std::vector<double> TerminationHead::beta_all(std::span<const double> input) const {
    return net_.evaluate(input);
}

bool TerminationHead::sample(std::span<const double> input, int option, Rng& rng) const {
    return rng.bernoulli(beta(input, option));
}

void TerminationHead::update(std::span<const double> input, int option, double advantage) {
    const double scale = literal_additive_xi_ ? advantage : advantage + xi_;
    net_.zero_grad();
    std::vector<double> upstream(static_cast<size_t>(net_.output_dim()), 0.0);
    upstream[static_cast<size_t>(option)] = 1.0;
    net_.forward(input);
    net_.backward(upstream);
    for (nn::ParamTensor* p : net_.params()) {
        for (size_t i = 0; i < p->numel(); ++i) {
            p->values[i] -= alpha_ * p->grad[i] * scale;
            if (literal_additive_xi_) p->values[i] += xi_;
        }
        p->zero_grad();
    }
}

double cross_entropy(std::span<const double> p, std::span<const double> q, double floor) {
    if (p.size() != q.size()) throw ConfigError("cross_entropy: distribution size mismatch");
    double h = 0.0;
    for (size_t a = 0; a < p.size(); ++a)
        if (p[a] > 0.0) h -= p[a] * std::log(std::max(q[a], floor));
    return h;
}

double transfer_loss(std::span<const double> advised_probs, std::span<const double> policy_probs,
                     const TransferSchedule& schedule) {
    return schedule.f() * cross_entropy(advised_probs, policy_probs);
}

AdviceController::AdviceController(int num_agents, int num_options)
    : num_options_(num_options), state_(static_cast<size_t>(num_agents)) {
    if (num_agents < 2) throw ConfigError("AdviceController: need at least 2 agents");
}

void AdviceController::reset() {
    for (auto& s : state_) s = ActiveAdvice{};
}

int AdviceController::select(int agent, OptionValueSource& source, std::span<const double> input,
                             double eps, Rng& rng) {
    const std::vector<double> values = source.option_values(agent, input);
    const OptionMask mask{source.num_options(), agent};
    return select_option(values, mask, eps, rng);
}

AdviceStepEvent AdviceController::begin(int agent, OptionValueSource& source,
                                        std::span<const double> input, double eps, Rng& rng) {
    ActiveAdvice& adv = state_[static_cast<size_t>(agent)];
    adv.option = select(agent, source, input, eps, rng);
    adv.steps_held = 0;
    return {adv.option, true, false};
}

AdviceStepEvent AdviceController::step(int agent, OptionValueSource& source,
                                       std::span<const double> input, double eps, Rng& rng) {
    ActiveAdvice& adv = state_[static_cast<size_t>(agent)];
    if (adv.option < 0) {
        AdviceStepEvent ev = begin(agent, source, input, eps, rng);
        return ev;
    }
    ++adv.steps_held;
    const double beta = source.termination_beta(agent, input, adv.option);
    if (rng.bernoulli(beta)) {
        adv.option = select(agent, source, input, eps, rng);
        adv.steps_held = 0;
        return {adv.option, true, true};
    }
    return {adv.option, false, false};
}

}  // namespace optlab::opt
