#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "optlab/opt/options.hpp"

using namespace optlab;
using namespace optlab::opt;

namespace {

// Scripted value source for controller tests: fixed option values and a
// scripted termination sequence.
class ScriptedSource : public OptionValueSource {
public:
    ScriptedSource(int n, std::vector<double> values, std::vector<double> betas)
        : n_(n), values_(std::move(values)), betas_(std::move(betas)) {}

    int num_options() const override { return n_; }
    std::vector<double> option_values(int, std::span<const double>) override { return values_; }
    double termination_beta(int, std::span<const double>, int) override {
        const double b = betas_.empty() ? 0.0 : betas_[call_ % betas_.size()];
        ++call_;
        return b;
    }
    size_t termination_calls() const { return call_; }

private:
    int n_;
    std::vector<double> values_;
    std::vector<double> betas_;
    size_t call_ = 0;
};

void zero_params(nn::Mlp& net) {
    for (nn::ParamTensor* p : net.params()) std::fill(p->values.begin(), p->values.end(), 0.0);
}

}  // namespace

TEST_CASE("select_option: the agent's own option is never a candidate") {
    // Three agents; agent 0's candidates are exactly {1, 2}.
    Rng rng(1);
    std::vector<int> counts(3, 0);
    const std::vector<double> values{100.0, 1.0, 1.0};  // self value is a trap
    for (int i = 0; i < 10000; ++i)
        ++counts[static_cast<size_t>(select_option(values, {3, 0}, 1.0, rng))];
    CHECK(counts[0] == 0);
    CHECK(std::abs(counts[1] / 10000.0 - 0.5) <= 0.02);
    CHECK(std::abs(counts[2] / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("select_option: greedy selection with ties broken by lowest id") {
    Rng rng(2);
    CHECK(select_option(std::vector<double>{0.0, 2.0, 5.0}, {3, 0}, 0.0, rng) == 2);
    CHECK(select_option(std::vector<double>{0.0, 5.0, 5.0}, {3, 0}, 0.0, rng) == 1);
    CHECK(select_option(std::vector<double>{9.0, 5.0, 5.0}, {3, 0}, 0.0, rng) == 1);
}

TEST_CASE("select_option: empty candidate set is a configuration error") {
    Rng rng(3);
    CHECK_THROWS_AS(select_option(std::vector<double>{1.0}, {1, 0}, 0.0, rng), ConfigError);
}

TEST_CASE("termination head: saturated biases terminate always or never") {
    TerminationHead head(2, {}, 2, 0.1, 0.0, 5);
    zero_params(head.net());
    head.net().params()[1]->values = {20.0, -20.0};
    Rng rng(4);
    const std::vector<double> obs{0.5, -0.5};
    int fired0 = 0, fired1 = 0;
    for (int i = 0; i < 1000; ++i) {
        fired0 += head.sample(obs, 0, rng) ? 1 : 0;
        fired1 += head.sample(obs, 1, rng) ? 1 : 0;
    }
    CHECK(fired0 == 1000);
    CHECK(fired1 == 0);
}

TEST_CASE("termination head: beta=0.5 fires half the time") {
    TerminationHead head(2, {}, 1, 0.1, 0.0, 5);
    zero_params(head.net());  // sigmoid(0) = 0.5 exactly
    Rng rng(6);
    const std::vector<double> obs{1.0, 2.0};
    CHECK(head.beta(obs, 0) == 0.5);
    int fired = 0;
    for (int i = 0; i < 10000; ++i) fired += head.sample(obs, 0, rng) ? 1 : 0;
    CHECK(std::abs(fired / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("termination update: zero advantage-plus-margin leaves parameters unchanged") {
    TerminationHead head(2, {4}, 2, 0.1, 0.01, 7);
    const auto before = head.net().params()[0]->values;
    head.update(std::vector<double>{0.3, -0.3}, 0, -0.01);  // A + xi == 0
    CHECK(head.net().params()[0]->values == before);
}

TEST_CASE("termination update: direction matches the finite-difference oracle") {
    // One step with advantage A and margin xi moves params by
    // -alpha * dbeta/dparams * (A + xi); verify against central differences
    // of beta itself.
    const double alpha = 0.05, xi = 0.0, advantage = -1.0;
    TerminationHead head(2, {3}, 2, alpha, xi, 8);
    const std::vector<double> obs{0.4, -0.7};
    const int option = 1;
    const double beta_before = head.beta(obs, option);

    // Finite-difference gradient of beta w.r.t. every parameter.
    std::vector<std::vector<double>> fd;
    for (nn::ParamTensor* p : head.net().params()) {
        fd.emplace_back();
        for (size_t j = 0; j < p->numel(); ++j) {
            const double orig = p->values[j];
            const double h = 1e-6;
            p->values[j] = orig + h;
            const double bp = head.beta(obs, option);
            p->values[j] = orig - h;
            const double bm = head.beta(obs, option);
            p->values[j] = orig;
            fd.back().push_back((bp - bm) / (2 * h));
        }
    }
    std::vector<std::vector<double>> before;
    for (nn::ParamTensor* p : head.net().params()) before.push_back(p->values);

    head.update(obs, option, advantage);

    auto ps = head.net().params();
    for (size_t i = 0; i < ps.size(); ++i)
        for (size_t j = 0; j < ps[i]->numel(); ++j) {
            const double expected = before[i][j] - alpha * fd[i][j] * (advantage + xi);
            CHECK(ps[i]->values[j] == doctest::Approx(expected).epsilon(1e-6));
        }

    // A < -xi: termination probability strictly increases.
    CHECK(head.beta(obs, option) > beta_before);
}

TEST_CASE("termination update: argmax option is pushed to hold on via xi") {
    // A = 0 for the best option, so the update is driven purely by xi and
    // beta decreases.
    TerminationHead head(2, {3}, 2, 0.05, 0.02, 9);
    const std::vector<double> obs{0.1, 0.9};
    const double before = head.beta(obs, 0);
    for (int i = 0; i < 5; ++i) head.update(obs, 0, 0.0);
    CHECK(head.beta(obs, 0) < before);
}

TEST_CASE("transfer schedule: f(0) in (0.997, 0.998), strictly decreasing, f(3/mu)=0.5") {
    TransferSchedule s;
    s.mu = 0.5;
    CHECK(s.f_at(0) > 0.997);
    CHECK(s.f_at(0) < 0.998);
    CHECK(s.f_at(0) == doctest::Approx(0.5 + std::tanh(3.0) / 2.0).epsilon(1e-15));
    double prev = s.f_at(0);
    for (int t = 1; t <= 30; ++t) {
        const double cur = s.f_at(t);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK(s.f_at(6) == 0.5);  // 3/mu = 6 exactly
    CHECK(s.f_at(1000) < 1e-9);
}

TEST_CASE("transfer loss: one-hot advice against a half-mass policy") {
    TransferSchedule s;
    s.mu = 1.0;
    s.t = 0;
    const std::vector<double> advised{1.0, 0.0};
    const std::vector<double> policy{0.5, 0.5};
    const double h = cross_entropy(advised, policy);
    CHECK(h == doctest::Approx(-std::log(0.5)).epsilon(1e-14));
    CHECK(h == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(transfer_loss(advised, policy, s) == doctest::Approx(s.f() * h).epsilon(1e-14));
}

TEST_CASE("transfer loss: matching uniform distributions give ln 4") {
    const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
    CHECK(cross_entropy(uniform, uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(cross_entropy(uniform, uniform) == doctest::Approx(1.3863).epsilon(1e-4));
}

TEST_CASE("transfer loss: zero target mass is clamped, not infinite") {
    const std::vector<double> advised{1.0, 0.0};
    const std::vector<double> policy{0.0, 1.0};
    const double h = cross_entropy(advised, policy);
    CHECK(std::isfinite(h));
    CHECK(h == doctest::Approx(-std::log(1e-8)).epsilon(1e-12));
}

TEST_CASE("advice controller: beta=0 holds one option forever") {
    ScriptedSource source(3, {0.1, 0.2, 0.3}, {0.0});
    AdviceController ctl(3, 3);
    Rng rng(10);
    const std::vector<double> obs{0.0};
    const auto first = ctl.begin(1, source, obs, 0.0, rng);
    CHECK(first.option != 1);
    for (int i = 0; i < 200; ++i) {
        const auto ev = ctl.step(1, source, obs, 0.0, rng);
        CHECK_FALSE(ev.reselected);
        CHECK(ev.option == first.option);
    }
}

TEST_CASE("advice controller: beta=1 reselects every step") {
    ScriptedSource source(3, {0.1, 0.2, 0.3}, {1.0});
    AdviceController ctl(3, 3);
    Rng rng(11);
    const std::vector<double> obs{0.0};
    ctl.begin(0, source, obs, 0.0, rng);
    for (int i = 0; i < 50; ++i) {
        const auto ev = ctl.step(0, source, obs, 0.0, rng);
        CHECK(ev.reselected);
        CHECK(ev.termination_sample);
        CHECK(ev.option != 0);
    }
}

TEST_CASE("advice controller: scripted termination sequence reselects exactly once") {
    // Termination samples [0,0,1,0]: exactly one reselection, on the third
    // post-selection step.
    ScriptedSource source(2, {0.5, 0.5}, {0.0, 0.0, 1.0, 0.0});
    AdviceController ctl(2, 2);
    Rng rng(12);
    const std::vector<double> obs{0.0};
    ctl.begin(0, source, obs, 0.0, rng);
    int reselections = 0;
    for (int i = 0; i < 4; ++i) {
        const auto ev = ctl.step(0, source, obs, 0.0, rng);
        if (ev.reselected) {
            ++reselections;
            CHECK(i == 2);
        }
    }
    CHECK(reselections == 1);
}

TEST_CASE("advice controller: call-and-return trace keeps the option constant between reselects") {
    TerminationHead head(1, {}, 4, 0.1, 0.0, 13);
    zero_params(head.net());  // beta = 0.5 everywhere

    class HeadSource : public OptionValueSource {
    public:
        explicit HeadSource(TerminationHead& h) : head_(h) {}
        int num_options() const override { return 4; }
        std::vector<double> option_values(int, std::span<const double>) override {
            return {0.4, 0.3, 0.2, 0.1};
        }
        double termination_beta(int, std::span<const double> input, int option) override {
            return head_.beta(input, option);
        }

    private:
        TerminationHead& head_;
    } source(head);

    AdviceController ctl(4, 4);
    Rng rng(14);
    const std::vector<double> obs{0.2};
    for (int agent = 0; agent < 4; ++agent) ctl.begin(agent, source, obs, 0.5, rng);
    std::vector<int> held(4);
    for (int agent = 0; agent < 4; ++agent) held[static_cast<size_t>(agent)] = ctl.advice(agent).option;
    int reselections = 0;
    for (int step = 0; step < 400; ++step) {
        for (int agent = 0; agent < 4; ++agent) {
            const auto ev = ctl.step(agent, source, obs, 0.5, rng);
            CHECK(ev.option != agent);  // masking holds over the whole run
            if (ev.reselected) {
                ++reselections;
                held[static_cast<size_t>(agent)] = ev.option;
            } else {
                CHECK(ev.option == held[static_cast<size_t>(agent)]);
            }
        }
    }
    CHECK(reselections > 100);  // beta=0.5 fires plenty
}

TEST_CASE("transfer descent: imitation alone drives KL to the advised policy below 1e-3") {
    // Fixed observation set and a frozen advised policy; plain gradient
    // descent on f*H(p||q) must monotonically shrink KL[p||q].
    nn::Mlp advised({2, 4, 3}, nn::Activation::Tanh, nn::Head::Softmax, 1.0, 15);
    nn::Mlp policy({2, 4, 3}, nn::Activation::Tanh, nn::Head::Softmax, 1.0, 16);
    const std::vector<std::vector<double>> obs_set{{0.1, 0.4}, {-0.5, 0.2}, {0.9, -0.9}};

    auto kl_to_advised = [&] {
        double kl = 0.0;
        for (const auto& obs : obs_set) {
            const auto p = advised.evaluate(obs);
            const auto q = policy.evaluate(obs);
            for (size_t a = 0; a < p.size(); ++a)
                if (p[a] > 0.0) kl += p[a] * (std::log(p[a]) - std::log(q[a]));
        }
        return kl;
    };

    double prev = kl_to_advised();
    const double lr = 0.2;
    int iters = 0;
    while (prev > 1e-3 && iters < 5000) {
        policy.zero_grad();
        for (const auto& obs : obs_set) {
            const auto p = advised.evaluate(obs);
            const auto q = policy.forward(obs);
            std::vector<double> up(q.size());
            for (size_t a = 0; a < q.size(); ++a) up[a] = -p[a] / std::max(q[a], 1e-8);
            policy.backward(up);
        }
        for (nn::ParamTensor* t : policy.params()) {
            for (size_t j = 0; j < t->numel(); ++j) t->values[j] -= lr * t->grad[j];
            t->zero_grad();
        }
        const double cur = kl_to_advised();
        CHECK(cur <= prev + 1e-10);
        prev = cur;
        ++iters;
    }
    CHECK(prev <= 1e-3);
}
