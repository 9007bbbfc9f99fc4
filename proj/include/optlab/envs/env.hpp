// Partially observable stochastic game interface. Environments expose
// per-agent observations and rewards plus a global state vector; episodes
// are hard-capped at `episode_cap` steps.
#pragma once

#include <string>
#include <vector>

#include "optlab/common.hpp"

namespace optlab::envs {

struct PosgSpec {
    int num_agents = 0;
    std::vector<int> num_actions;  // per agent
    std::vector<int> obs_dims;     // per agent
    int state_dim = 0;
    double discount = 0.99;
    int episode_cap = 100;
};

struct StepInfo {
    int catches = 0;         // grid catch / predator hits this step
    int collisions = 0;      // agent-agent collision pairs this step
    double mean_landmark_dist = 0.0;
};

struct StepResult {
    std::vector<std::vector<double>> observations;
    std::vector<double> rewards;
    std::vector<double> state;
    bool done = false;
    StepInfo info;
};

class Env {
public:
    virtual ~Env() = default;
    virtual const PosgSpec& spec() const = 0;
    virtual StepResult reset() = 0;
    virtual StepResult step(const std::vector<int>& joint_action) = 0;
    virtual std::vector<double> observe(int agent) const = 0;
    virtual std::vector<double> global_state() const = 0;
};

}  // namespace optlab::envs
