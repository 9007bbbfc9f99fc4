// Run configuration: a flat key-value text format with typed values, an
// `include <path>` mechanism for scenario presets, environment-variable
// overrides (OPTLAB_<key>), and an exact canonical serialization.
//
//   # comment
//   include grid_base.cfg
//   scenario = grid_pursuit
//   actor_lr = 3e-4
//
// Unknown keys are rejected; every field is validated at load.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optlab/common.hpp"

namespace optlab::harness {

enum class Scenario { GridPursuit, PredatorPrey, CoopNav };
enum class AdvisorKind { None, Goa, Loa, Sro };
enum class ModeAuto { Auto, Shared, PerAgent };

struct RunConfig {
    // scenario
    std::string scenario = "grid_pursuit";
    std::string layout = "layouts/pursuit_9x9.txt";  // grid only
    std::string obs_scheme = "paper";                // paper | rich
    double opponent_eps = 0.1;
    int episode_cap = 100;

    // particle-world physics
    double particle_dt = 0.1;
    double particle_damping = 0.25;
    double particle_accel = 3.0;
    double particle_max_speed = 1.0;
    double particle_prey_accel = 4.0;
    double particle_prey_max_speed = 1.3;
    double particle_radius = 0.1;

    // run
    std::string advisor = "none";  // none | goa | loa | sro
    int64_t seed = 0;
    int64_t total_steps = 100000;
    double gamma = 0.99;

    // learner
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    int segment_len = 32;   // T
    double kl_coeff = 0.2;  // lambda
    int ppo_epochs = 1;
    bool normalize_advantages = false;
    bool share_params = false;
    std::vector<int> hidden{64, 64};

    // advisor
    bool global_state_access = true;  // GOA is only offered when declared
    double advisor_lr = 1e-5;
    int advisor_batch = 32;  // B
    int64_t replay_capacity = 100000;
    double eps_start = 1.0;
    double eps_finish = 0.05;
    int64_t eps_anneal = 50000;
    int target_sync = 1000;  // k
    int64_t warmup = 1000;
    int advisor_every = 1;
    double term_lr = 1e-3;  // alpha_varpi
    double mu = 0.0;        // 0 = auto: 6 / (total_steps / segment_len)
    double xi = 0.01;
    bool xi_literal_additive = false;
    double temperature = 1.0;
    int embed_dim = 64;  // D
    std::vector<int> advisor_hidden{64, 64};
    std::vector<int> sro_hidden{64};
    std::string w_mode = "auto";    // auto | shared | per_agent
    std::string loa_mode = "auto";  // auto | shared | per_agent
    double match_threshold = 0.0;   // 0 = auto: 1 / |actions|

    // reporting
    int metrics_window = 100;

    // not serialized: directory of the file the config was loaded from,
    // used to resolve relative layout paths.
    std::string base_dir;

    Scenario scenario_kind() const;
    AdvisorKind advisor_kind() const;
    ModeAuto w_mode_kind() const;
    ModeAuto loa_mode_kind() const;
    double effective_mu() const;

    // Resolve `layout` against base_dir when the plain path does not exist.
    std::string layout_path() const;
};

RunConfig parse_config_text(const std::string& text, const std::string& base_dir = "");
RunConfig parse_config_file(const std::string& path);

// Applies OPTLAB_<key> environment overrides; called by parse_config_file.
void apply_env_overrides(RunConfig& cfg);

void validate(const RunConfig& cfg);

// Canonical form: every key in registry order, one per line.
std::string canonical(const RunConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace optlab::harness
