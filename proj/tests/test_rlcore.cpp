#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "optlab/harness/oracles.hpp"
#include "optlab/rl/ppo.hpp"
#include "optlab/rl/replay.hpp"
#include "optlab/rl/schedule.hpp"

using namespace optlab;
using namespace optlab::rl;

namespace {

std::vector<double> onehot(int i, int n) {
    std::vector<double> v(static_cast<size_t>(n), 0.0);
    v[static_cast<size_t>(i)] = 1.0;
    return v;
}

void zero_params(nn::Mlp& net) {
    for (nn::ParamTensor* p : net.params()) std::fill(p->values.begin(), p->values.end(), 0.0);
}

}  // namespace

TEST_CASE("epsilon schedule: exact endpoints and linear middle") {
    EpsilonSchedule s;
    CHECK(s.at(0) == 1.0);
    CHECK(s.at(50000) == 0.05);
    CHECK(s.at(100000) == 0.05);
    CHECK(s.at(25000) == doctest::Approx(0.525).epsilon(1e-12));
    CHECK(s.at(-5) == 1.0);
}

TEST_CASE("replay: FIFO eviction with capacity 3") {
    ReplayBuffer buf(3, 1);
    for (int i = 0; i < 4; ++i) {
        Transition t;
        t.agent = 0;
        t.reward = i;
        buf.push(t);
    }
    CHECK(buf.size() == 3);
    Rng rng(1);
    auto batch = buf.sample(3, false, rng);
    REQUIRE(batch.has_value());
    double min_reward = 1e18;
    for (const Transition* t : batch->items) min_reward = std::min(min_reward, t->reward);
    CHECK(min_reward == 1.0);  // reward 0 was evicted
}

TEST_CASE("replay: per-agent sampling draws B/N from each partition") {
    ReplayBuffer buf(1000, 2);
    for (int i = 0; i < 100; ++i) {
        Transition t;
        t.agent = i % 2;
        buf.push(t);
    }
    Rng rng(2);
    auto batch = buf.sample(32, true, rng);
    REQUIRE(batch.has_value());
    CHECK(batch->items.size() == 32);
    int per_agent[2] = {0, 0};
    for (const Transition* t : batch->items) ++per_agent[t->agent];
    CHECK(per_agent[0] == 16);
    CHECK(per_agent[1] == 16);
}

TEST_CASE("replay: oversized request returns everything, flagged partial") {
    ReplayBuffer buf(100, 1);
    for (int i = 0; i < 5; ++i) {
        Transition t;
        t.agent = 0;
        buf.push(t);
    }
    Rng rng(3);
    auto batch = buf.sample(32, false, rng);
    REQUIRE(batch.has_value());
    CHECK(batch->items.size() == 5);
    CHECK(batch->partial);
}

TEST_CASE("replay: empty buffer signals retry") {
    ReplayBuffer buf(10, 1);
    Rng rng(4);
    CHECK_FALSE(buf.sample(4, false, rng).has_value());
}

TEST_CASE("replay: sampling is uniform over a 100-item buffer") {
    ReplayBuffer buf(200, 1);
    for (int i = 0; i < 100; ++i) {
        Transition t;
        t.agent = 0;
        t.reward = i;
        buf.push(t);
    }
    Rng rng(5);
    std::vector<int> counts(100, 0);
    for (int draw = 0; draw < 100000; ++draw) {
        auto batch = buf.sample(1, false, rng);
        ++counts[static_cast<size_t>(batch->items[0]->reward)];
    }
    // Binomial(1e5, 0.01): mean 1000, sigma ~= 31.5; require within 5 sigma.
    for (int c : counts) CHECK(std::abs(c - 1000) <= 158);
}

TEST_CASE("segment returns: zero rewards and zero value give zero loss") {
    TrajectorySegment seg;
    for (int i = 0; i < 4; ++i) {
        SegmentStep st;
        st.obs = onehot(0, 2);
        seg.steps.push_back(st);
    }
    nn::Mlp value({2, 1}, nn::Activation::Tanh, nn::Head::Linear, 1.0, 1);
    zero_params(value);
    CHECK(critic_loss(seg, value, 0.9) == 0.0);
}

TEST_CASE("segment returns: single step with r=1 at the next tick gives loss 0.81") {
    TrajectorySegment seg;
    SegmentStep st;
    st.obs = onehot(0, 2);
    st.reward = 1.0;
    st.done = true;
    seg.steps.push_back(st);
    nn::Mlp value({2, 1}, nn::Activation::Tanh, nn::Head::Linear, 1.0, 1);
    zero_params(value);
    CHECK(critic_loss(seg, value, 0.9) == doctest::Approx(0.81).epsilon(1e-15));
}

TEST_CASE("segment returns: perfect value function on a tabular chain zeroes the loss") {
    // Continuing 3-cycle with per-state rewards; the oracle supplies exact
    // decision-time-discounted values.
    const harness::Matrix p{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
    const std::vector<double> rbar{1.0, -0.5, 2.0};
    const double gamma = 0.9;
    const std::vector<double> v = harness::value_iterate_decision_time(p, rbar, gamma, 1e-14);

    nn::Mlp value({3, 1}, nn::Activation::Tanh, nn::Head::Linear, 1.0, 1);
    auto ps = value.params();
    ps[0]->values = {v[0], v[1], v[2]};
    ps[1]->values = {0.0};

    TrajectorySegment seg;
    for (int j = 0; j < 6; ++j) {
        SegmentStep st;
        st.obs = onehot(j % 3, 3);
        st.reward = rbar[static_cast<size_t>(j % 3)];
        seg.steps.push_back(st);
    }
    seg.bootstrap = true;
    seg.boot_obs = onehot(0, 3);
    CHECK(critic_loss(seg, value, gamma) < 1e-10);
}

TEST_CASE("segment returns: episode boundaries reset the accumulation") {
    TrajectorySegment seg;
    for (int j = 0; j < 3; ++j) {
        SegmentStep st;
        st.obs = onehot(0, 2);
        st.reward = 1.0;
        st.done = j == 1;  // terminal in the middle
        seg.steps.push_back(st);
    }
    seg.bootstrap = false;
    const auto g = segment_returns(seg, 0.5, 0.0);
    CHECK(g[2] == doctest::Approx(0.5));
    CHECK(g[1] == doctest::Approx(0.5));  // terminal: nothing flows back from step 2
    CHECK(g[0] == doctest::Approx(0.5 * (1 + 0.5)));
}

TEST_CASE("actor loss: identity policy reduces to minus summed advantages") {
    const std::vector<double> probs{0.6, 0.4};
    const auto parts = actor_step_loss(probs, probs, 0, 2.5, 0.2, nullptr, 0.0);
    CHECK(parts.surrogate == doctest::Approx(-2.5).epsilon(1e-15));
    CHECK(parts.kl == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(parts.transfer == 0.0);
    CHECK(parts.total == doctest::Approx(-2.5).epsilon(1e-15));
}

TEST_CASE("actor loss: zero advantage and matching policies give zero loss") {
    const std::vector<double> probs{0.5, 0.5};
    const auto parts = actor_step_loss(probs, probs, 1, 0.0, 0.2, nullptr, 0.0);
    CHECK(parts.total == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("actor loss: hand-set two-action case matches scalar arithmetic") {
    const std::vector<double> probs{0.7, 0.3};
    const std::vector<double> old{0.6, 0.4};
    const std::vector<double> target{0.9, 0.1};
    const auto parts = actor_step_loss(probs, old, 0, 2.0, 0.2, &target, 0.5);

    const double surrogate = -(0.7 / 0.6) * 2.0;
    const double kl = 0.6 * std::log(0.6 / 0.7) + 0.4 * std::log(0.4 / 0.3);
    const double transfer = 0.5 * (-0.9 * std::log(0.7) - 0.1 * std::log(0.3));
    CHECK(parts.surrogate == doctest::Approx(surrogate).epsilon(1e-14));
    CHECK(parts.kl == doctest::Approx(kl).epsilon(1e-14));
    CHECK(parts.transfer == doctest::Approx(transfer).epsilon(1e-14));
    CHECK(parts.total == doctest::Approx(surrogate + 0.2 * kl + transfer).epsilon(1e-14));
}

TEST_CASE("actor loss: KL part is non-negative for random distributions") {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + rng.uniform_int(4);
        std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
        double sa = 0, sb = 0;
        for (int i = 0; i < n; ++i) {
            a[static_cast<size_t>(i)] = rng.uniform(0.01, 1.0);
            b[static_cast<size_t>(i)] = rng.uniform(0.01, 1.0);
            sa += a[static_cast<size_t>(i)];
            sb += b[static_cast<size_t>(i)];
        }
        for (int i = 0; i < n; ++i) {
            a[static_cast<size_t>(i)] /= sa;
            b[static_cast<size_t>(i)] /= sb;
        }
        const auto parts = actor_step_loss(b, a, 0, 0.0, 1.0, nullptr, 0.0);
        CHECK(parts.kl >= -1e-12);
    }
}

TEST_CASE("actor loss: gradient matches finite differences through the policy net") {
    Rng rng(7);
    for (uint64_t seed = 1; seed <= 25; ++seed) {
        nn::Mlp policy({3, 4, 3}, nn::Activation::Tanh, nn::Head::Softmax, 1.0, seed);
        const std::vector<double> obs{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        std::vector<double> old = policy.evaluate(obs);
        // Perturb the frozen distribution so ratio/KL gradients are non-trivial.
        old[0] = std::max(0.05, old[0] - 0.1);
        double s = 0;
        for (double v : old) s += v;
        for (double& v : old) v /= s;
        std::vector<double> target{0.2, 0.5, 0.3};
        const int action = rng.uniform_int(3);
        const double adv = rng.uniform(-2.0, 2.0);

        auto loss = [&] {
            const auto p = policy.evaluate(obs);
            return actor_step_loss(p, old, action, adv, 0.2, &target, 0.7).total;
        };
        auto grads = [&] {
            policy.zero_grad();
            const auto p = policy.forward(obs);
            policy.backward(actor_step_upstream(p, old, action, adv, 0.2, &target, 0.7));
        };
        auto ps = policy.params();
        CHECK(nn::grad_check(ps, loss, grads) < 1e-4);
    }
}

TEST_CASE("transfer term: advice equal to the current policy has ~zero gradient") {
    nn::Mlp policy({3, 4, 3}, nn::Activation::Tanh, nn::Head::Softmax, 1.0, 13);
    const std::vector<double> obs{0.2, -0.4, 0.9};
    const std::vector<double> target = policy.evaluate(obs);  // matching distribution

    policy.zero_grad();
    const auto p = policy.forward(obs);
    policy.backward(actor_step_upstream(p, p, 0, 0.0, 0.0, &target, 1.0));
    for (nn::ParamTensor* t : policy.params())
        for (double g : t->grad) CHECK(std::abs(g) < 1e-12);

    // Finite differences agree: the cross-entropy sits at its minimum.
    const double h = 1e-5;
    auto loss = [&] {
        const auto q = policy.evaluate(obs);
        return actor_step_loss(q, q, 0, 0.0, 0.0, &target, 1.0).total;
    };
    auto ps = policy.params();
    for (nn::ParamTensor* t : ps) {
        for (size_t j = 0; j < std::min<size_t>(t->numel(), 4); ++j) {
            const double orig = t->values[j];
            t->values[j] = orig + h;
            const double lp = loss();
            t->values[j] = orig - h;
            const double lm = loss();
            t->values[j] = orig;
            CHECK(std::abs((lp - lm) / (2 * h)) < 1e-6);
        }
    }
}

TEST_CASE("ppo update: zero learning rates leave parameters unchanged") {
    PpoParams params;
    params.policy_hidden = {4};
    params.value_hidden = {4};
    params.actor_lr = 0.0;
    params.critic_lr = 0.0;
    PpoAgent agent(3, 2, params, 11);
    const auto before_p = agent.policy().params()[0]->values;
    const auto before_v = agent.value().params()[0]->values;

    TrajectorySegment seg;
    Rng rng(8);
    for (int j = 0; j < 4; ++j) {
        SegmentStep st;
        st.obs = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        st.action = rng.uniform_int(2);
        st.reward = rng.uniform(-1, 1);
        seg.steps.push_back(st);
    }
    seg.boot_obs = seg.steps[0].obs;
    seg.bootstrap = true;
    agent.update(seg, nullptr, 0.0);
    CHECK(agent.policy().params()[0]->values == before_p);
    CHECK(agent.value().params()[0]->values == before_v);
}

TEST_CASE("ppo update: matches an independent straight-line reference step bitwise") {
    PpoParams params;
    params.policy_hidden = {4};
    params.value_hidden = {4};
    params.actor_lr = 3e-3;
    params.critic_lr = 1e-3;
    params.gamma = 0.9;
    params.kl_coeff = 0.2;
    PpoAgent agent(3, 2, params, 17);

    // Reference copies of the same nets and fresh optimizers.
    nn::Mlp ref_policy({3, 4, 2}, nn::Activation::Tanh, nn::Head::Softmax, 1.0, 1);
    nn::Mlp ref_value({3, 4, 1}, nn::Activation::Tanh, nn::Head::Linear, 1.0, 1);
    ref_policy.copy_params_from(agent.policy());
    ref_value.copy_params_from(agent.value());
    nn::AdamState ref_actor_opt, ref_critic_opt;
    ref_actor_opt.lr = params.actor_lr;
    ref_critic_opt.lr = params.critic_lr;

    Rng rng(9);
    for (int round = 0; round < 3; ++round) {
        TrajectorySegment seg;
        for (int j = 0; j < 5; ++j) {
            SegmentStep st;
            st.obs = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            st.action = rng.uniform_int(2);
            st.reward = rng.uniform(-1, 1);
            st.done = j == 2;
            seg.steps.push_back(st);
        }
        seg.boot_obs = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        seg.bootstrap = true;

        agent.update(seg, nullptr, 0.0);

        // Straight-line reference with hand-written upstream formulas.
        const double boot = ref_value.evaluate(seg.boot_obs)[0];
        const std::vector<double> g = segment_returns(seg, params.gamma, boot);
        std::vector<double> values(seg.steps.size());
        for (size_t t = 0; t < seg.steps.size(); ++t)
            values[t] = ref_value.evaluate(seg.steps[t].obs)[0];

        ref_value.zero_grad();
        for (size_t t = 0; t < seg.steps.size(); ++t) {
            const double v = ref_value.forward(seg.steps[t].obs)[0];
            ref_value.backward(std::vector<double>{2.0 * (v - g[t])});
        }
        auto vp = ref_value.params();
        ref_critic_opt.step(vp);

        std::vector<std::vector<double>> old(seg.steps.size());
        for (size_t t = 0; t < seg.steps.size(); ++t)
            old[t] = ref_policy.evaluate(seg.steps[t].obs);
        ref_policy.zero_grad();
        for (size_t t = 0; t < seg.steps.size(); ++t) {
            const auto p = ref_policy.forward(seg.steps[t].obs);
            const double adv = g[t] - values[t];
            std::vector<double> up(p.size(), 0.0);
            const size_t a = static_cast<size_t>(seg.steps[t].action);
            up[a] -= adv / std::max(old[t][a], 1e-8);
            for (size_t k = 0; k < p.size(); ++k) up[k] -= 0.2 * old[t][k] / std::max(p[k], 1e-8);
            ref_policy.backward(up);
        }
        auto pp = ref_policy.params();
        ref_actor_opt.step(pp);

        for (size_t i = 0; i < pp.size(); ++i)
            REQUIRE(agent.policy().params()[i]->values == pp[i]->values);
        for (size_t i = 0; i < vp.size(); ++i)
            REQUIRE(agent.value().params()[i]->values == vp[i]->values);
    }
}

TEST_CASE("act: uniform policy samples all actions at the right frequency") {
    PpoParams params;
    params.policy_hidden = {4};
    PpoAgent agent(2, 4, params, 19);
    zero_params(agent.policy());
    Rng rng(10);
    std::vector<int> counts(4, 0);
    const std::vector<double> obs{0.3, -0.3};
    for (int i = 0; i < 10000; ++i) ++counts[static_cast<size_t>(agent.act(obs, rng).first)];
    for (int c : counts) CHECK(std::abs(c / 10000.0 - 0.25) <= 0.02);
}

TEST_CASE("act: a +20 logit dominates the samples") {
    PpoParams params;
    params.policy_hidden = {4};
    PpoAgent agent(2, 3, params, 19);
    zero_params(agent.policy());
    agent.policy().params()[3]->values[1] = 20.0;  // head bias for action 1
    Rng rng(11);
    const std::vector<double> obs{0.1, 0.2};
    int hits = 0;
    for (int i = 0; i < 10000; ++i) hits += agent.act(obs, rng).first == 1 ? 1 : 0;
    CHECK(hits >= 9990);
}

TEST_CASE("act: identical seeds give identical action sequences") {
    PpoParams params;
    params.policy_hidden = {4};
    PpoAgent agent(2, 3, params, 19);
    Rng ra(12), rb(12);
    const std::vector<double> obs{0.1, 0.2};
    for (int i = 0; i < 100; ++i) {
        const auto [aa, la] = agent.act(obs, ra);
        const auto [ab, lb] = agent.act(obs, rb);
        CHECK(aa == ab);
        CHECK(la == lb);
    }
}

TEST_CASE("plain PPO learns a 5-state chain to 95% optimal-action probability") {
    // Sanity floor: median of 5 seeds reaches >=0.95 probability on the
    // optimal (right) action over the on-path states within 2000 updates.
    std::vector<double> best(5, 0.0);
    for (uint64_t seed = 0; seed < 5; ++seed) {
        PpoParams params;
        params.policy_hidden = {8};
        params.value_hidden = {8};
        params.actor_lr = 0.03;
        params.critic_lr = 0.03;
        params.gamma = 0.9;
        PpoAgent agent(5, 2, params, 100 + seed);
        Rng rng(200 + seed);

        int state = 2, steps_in_ep = 0;
        TrajectorySegment seg;
        for (int update = 0; update < 2000 && best[seed] < 0.95; ++update) {
            while (seg.steps.size() < 10) {
                SegmentStep st;
                st.obs = onehot(state, 5);
                const auto [a, logp] = agent.act(st.obs, rng);
                st.action = a;
                st.logp_old = logp;
                ++steps_in_ep;
                if (a == 1 && state == 4) {
                    st.reward = 1.0;
                    st.done = true;
                } else {
                    state = a == 1 ? std::min(4, state + 1) : std::max(0, state - 1);
                    st.reward = 0.0;
                    st.done = steps_in_ep >= 10;
                }
                if (st.done) {
                    state = 2;
                    steps_in_ep = 0;
                }
                seg.steps.push_back(st);
            }
            seg.boot_obs = onehot(state, 5);
            seg.bootstrap = !seg.steps.back().done;
            agent.update(seg, nullptr, 0.0);
            seg = TrajectorySegment{};

            double p_right = 0.0;
            for (int s : {2, 3, 4}) p_right += agent.policy().evaluate(onehot(s, 5))[1] / 3.0;
            best[seed] = std::max(best[seed], p_right);
        }
    }
    std::sort(best.begin(), best.end());
    CHECK(best[2] >= 0.95);  // median of 5 seeds
}
