#include "optlab/envs/particle.hpp"

#include <algorithm>
#include <cmath>

namespace optlab::envs {

namespace {
constexpr int kPredators = 3;
constexpr int kObstacles = 3;
constexpr int kNavAgents = 4;
constexpr int kLandmarks = 4;

double dist2(double ax, double ay, double bx, double by) {
    const double dx = ax - bx, dy = ay - by;
    return dx * dx + dy * dy;
}
}  // namespace

int particle_obs_dim(ParticleScenario scenario) {
    switch (scenario) {
        case ParticleScenario::PredatorPrey:
            // vel 2 + pos 2 + obstacles 2*3 + others 2*3 (2 teammates + prey)
            // + prey vel 2
            return 18;
        case ParticleScenario::CoopNav:
            // vel 2 + pos 2 + landmarks 2*4 + teammates 2*3 + teammate vel 2*3
            return 24;
    }
    return 0;
}

ParticleEnv::ParticleEnv(ParticleScenario scenario, ParticleParams params, uint64_t seed)
    : scenario_(scenario), params_(params), rng_(seed) {
    const int n = scenario_ == ParticleScenario::PredatorPrey ? kPredators : kNavAgents;
    spec_.num_agents = n;
    spec_.num_actions.assign(n, kNumActions);
    spec_.obs_dims.assign(n, particle_obs_dim(scenario_));
    const int fixtures = scenario_ == ParticleScenario::PredatorPrey ? kObstacles : kLandmarks;
    spec_.state_dim = 4 * n + (scenario_ == ParticleScenario::PredatorPrey ? 4 : 0) + 2 * fixtures;
    spec_.discount = params_.discount;
    spec_.episode_cap = params_.episode_cap;
}

StepResult ParticleEnv::reset() {
    const int n = spec_.num_agents;
    agents_.assign(static_cast<size_t>(n), Body{});
    for (Body& b : agents_) {
        b.px = rng_.uniform(-params_.spawn_half, params_.spawn_half);
        b.py = rng_.uniform(-params_.spawn_half, params_.spawn_half);
        b.vx = b.vy = 0.0;
    }
    const int fixtures = scenario_ == ParticleScenario::PredatorPrey ? kObstacles : kLandmarks;
    fixtures_.assign(static_cast<size_t>(fixtures), {0.0, 0.0});
    for (auto& f : fixtures_) {
        f[0] = rng_.uniform(-params_.spawn_half, params_.spawn_half);
        f[1] = rng_.uniform(-params_.spawn_half, params_.spawn_half);
    }
    if (scenario_ == ParticleScenario::PredatorPrey) {
        prey_ = Body{};
        prey_.px = rng_.uniform(-params_.spawn_half, params_.spawn_half);
        prey_.py = rng_.uniform(-params_.spawn_half, params_.spawn_half);
    }
    step_count_ = 0;
    done_ = false;
    return make_result(std::vector<double>(n, 0.0), false, {});
}

void ParticleEnv::integrate(Body& b, int action, double accel, double max_speed) {
    static constexpr double fx[kNumActions] = {0, 1, -1, 0, 0};
    static constexpr double fy[kNumActions] = {0, 0, 0, 1, -1};
    b.vx = b.vx * (1.0 - params_.damping) + fx[action] * accel * params_.dt;
    b.vy = b.vy * (1.0 - params_.damping) + fy[action] * accel * params_.dt;
    const double speed = std::sqrt(b.vx * b.vx + b.vy * b.vy);
    if (speed > max_speed) {
        b.vx *= max_speed / speed;
        b.vy *= max_speed / speed;
    }
    b.px = std::clamp(b.px + b.vx * params_.dt, -params_.arena_half, params_.arena_half);
    b.py = std::clamp(b.py + b.vy * params_.dt, -params_.arena_half, params_.arena_half);
}

int ParticleEnv::scripted_prey_action() {
    if (rng_.bernoulli(params_.opponent_epsilon)) return rng_.uniform_int(kNumActions);
    int best = 0;
    double best_score = -1.0;
    for (int a = 0; a < kNumActions; ++a) {
        Body trial = prey_;
        integrate(trial, a, params_.prey_accel, params_.prey_max_speed);
        double nearest = 1e18;
        for (const Body& p : agents_)
            nearest = std::min(nearest, dist2(trial.px, trial.py, p.px, p.py));
        if (nearest > best_score) {
            best_score = nearest;
            best = a;
        }
    }
    return best;
}

StepResult ParticleEnv::step(const std::vector<int>& joint_action) {
    if (done_) throw UsageError("particle: step after episode finished");
    if (static_cast<int>(joint_action.size()) != spec_.num_agents)
        throw ConfigError("particle: joint action size mismatch");
    for (int a : joint_action)
        if (a < 0 || a >= kNumActions) throw ConfigError("particle: invalid action id");

    int prey_action = 0;
    if (scenario_ == ParticleScenario::PredatorPrey) prey_action = scripted_prey_action();

    for (int i = 0; i < spec_.num_agents; ++i)
        integrate(agents_[static_cast<size_t>(i)], joint_action[static_cast<size_t>(i)],
                  params_.agent_accel, params_.agent_max_speed);
    if (scenario_ == ParticleScenario::PredatorPrey)
        integrate(prey_, prey_action, params_.prey_accel, params_.prey_max_speed);

    ++step_count_;
    std::vector<double> rewards(spec_.num_agents, 0.0);
    StepInfo info;
    const double touch = 2.0 * params_.agent_radius;

    if (scenario_ == ParticleScenario::PredatorPrey) {
        int hits = 0;
        for (const Body& p : agents_)
            if (dist2(p.px, p.py, prey_.px, prey_.py) < touch * touch) ++hits;
        if (hits > 0) {
            for (double& r : rewards) r += params_.hit_reward * hits;
            info.catches = hits;
        }
    } else {
        double dist_sum = 0.0;
        for (int i = 0; i < spec_.num_agents; ++i) {
            const Body& a = agents_[static_cast<size_t>(i)];
            double nearest = 1e18;
            for (const auto& lm : fixtures_)
                nearest = std::min(nearest, std::sqrt(dist2(a.px, a.py, lm[0], lm[1])));
            rewards[static_cast<size_t>(i)] -= nearest;
            dist_sum += nearest;
        }
        for (int i = 0; i < spec_.num_agents; ++i)
            for (int j = i + 1; j < spec_.num_agents; ++j) {
                const Body& a = agents_[static_cast<size_t>(i)];
                const Body& b = agents_[static_cast<size_t>(j)];
                if (dist2(a.px, a.py, b.px, b.py) < touch * touch) {
                    rewards[static_cast<size_t>(i)] += params_.collision_penalty;
                    rewards[static_cast<size_t>(j)] += params_.collision_penalty;
                    ++info.collisions;
                }
            }
        info.mean_landmark_dist = dist_sum / spec_.num_agents;
    }

    done_ = step_count_ >= params_.episode_cap;
    return make_result(rewards, done_, info);
}

std::vector<double> ParticleEnv::observe(int agent) const {
    if (agent < 0 || agent >= spec_.num_agents) throw ConfigError("particle: bad agent id");
    const Body& self = agents_[static_cast<size_t>(agent)];
    std::vector<double> obs;
    obs.reserve(static_cast<size_t>(spec_.obs_dims[static_cast<size_t>(agent)]));
    obs.push_back(self.vx);
    obs.push_back(self.vy);
    obs.push_back(self.px);
    obs.push_back(self.py);
    for (const auto& f : fixtures_) {
        obs.push_back(f[0] - self.px);
        obs.push_back(f[1] - self.py);
    }
    for (int j = 0; j < spec_.num_agents; ++j) {
        if (j == agent) continue;
        obs.push_back(agents_[static_cast<size_t>(j)].px - self.px);
        obs.push_back(agents_[static_cast<size_t>(j)].py - self.py);
    }
    if (scenario_ == ParticleScenario::PredatorPrey) {
        obs.push_back(prey_.px - self.px);
        obs.push_back(prey_.py - self.py);
        obs.push_back(prey_.vx);
        obs.push_back(prey_.vy);
    } else {
        for (int j = 0; j < spec_.num_agents; ++j) {
            if (j == agent) continue;
            obs.push_back(agents_[static_cast<size_t>(j)].vx);
            obs.push_back(agents_[static_cast<size_t>(j)].vy);
        }
    }
    return obs;
}

std::vector<double> ParticleEnv::global_state() const {
    std::vector<double> s;
    s.reserve(static_cast<size_t>(spec_.state_dim));
    for (const Body& a : agents_) {
        s.push_back(a.px);
        s.push_back(a.py);
        s.push_back(a.vx);
        s.push_back(a.vy);
    }
    if (scenario_ == ParticleScenario::PredatorPrey) {
        s.push_back(prey_.px);
        s.push_back(prey_.py);
        s.push_back(prey_.vx);
        s.push_back(prey_.vy);
    }
    for (const auto& f : fixtures_) {
        s.push_back(f[0]);
        s.push_back(f[1]);
    }
    return s;
}

StepResult ParticleEnv::make_result(const std::vector<double>& rewards, bool done,
                                    const StepInfo& info) const {
    StepResult r;
    r.observations.reserve(static_cast<size_t>(spec_.num_agents));
    for (int i = 0; i < spec_.num_agents; ++i) r.observations.push_back(observe(i));
    r.rewards = rewards;
    r.state = global_state();
    r.done = done;
    r.info = info;
    return r;
}

}  // namespace optlab::envs
