// Particle world with double-integrator bodies in [-1,1]^2. Two scenarios:
//   PredatorPrey  - 3 learning predators chase one faster scripted prey
//                   around 3 static obstacles; +10 to every predator per hit.
//   CoopNav       - 4 learning agents cover 4 landmarks; reward is minus the
//                   distance to the nearest landmark, -1 per collision.
// Episodes always run to the step cap.
#pragma once

#include <array>
#include <vector>

#include "optlab/envs/env.hpp"

namespace optlab::envs {

enum class ParticleScenario { PredatorPrey, CoopNav };

struct ParticleParams {
    double dt = 0.1;
    double damping = 0.25;
    double agent_accel = 3.0;
    double prey_accel = 4.0;
    double agent_max_speed = 1.0;
    double prey_max_speed = 1.3;
    double agent_radius = 0.1;
    double obstacle_radius = 0.2;
    double arena_half = 1.0;      // positions clamped to [-arena_half, arena_half]
    double spawn_half = 0.9;      // spawn range
    double hit_reward = 10.0;
    double collision_penalty = -1.0;
    double opponent_epsilon = 0.1;  // prey random-move probability
    int episode_cap = 100;
    double discount = 0.99;
};

struct Body {
    double px = 0, py = 0, vx = 0, vy = 0;
};

// Actions: 0 no-op, 1 +x force, 2 -x force, 3 +y force, 4 -y force.
class ParticleEnv : public Env {
public:
    ParticleEnv(ParticleScenario scenario, ParticleParams params, uint64_t seed);

    const PosgSpec& spec() const override { return spec_; }
    StepResult reset() override;
    StepResult step(const std::vector<int>& joint_action) override;
    std::vector<double> observe(int agent) const override;
    std::vector<double> global_state() const override;

    ParticleScenario scenario() const { return scenario_; }
    const std::vector<Body>& agents() const { return agents_; }
    const Body& prey() const { return prey_; }
    const std::vector<std::array<double, 2>>& fixtures() const { return fixtures_; }

    // Test hooks: place bodies and fixtures mid-episode.
    void set_agent_body(int agent, const Body& b) { agents_.at(static_cast<size_t>(agent)) = b; }
    void set_prey_body(const Body& b) { prey_ = b; }
    void set_fixture(int idx, double x, double y) { fixtures_.at(static_cast<size_t>(idx)) = {x, y}; }

    static constexpr int kNumActions = 5;

private:
    void integrate(Body& b, int action, double accel, double max_speed);
    int scripted_prey_action();
    StepResult make_result(const std::vector<double>& rewards, bool done, const StepInfo& info) const;

    ParticleScenario scenario_;
    ParticleParams params_;
    PosgSpec spec_;
    Rng rng_;
    std::vector<Body> agents_;
    Body prey_;                           // predator-prey only
    std::vector<std::array<double, 2>> fixtures_;  // obstacles or landmarks
    int step_count_ = 0;
    bool done_ = true;
};

int particle_obs_dim(ParticleScenario scenario);

}  // namespace optlab::envs
