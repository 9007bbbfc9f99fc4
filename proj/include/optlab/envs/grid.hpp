// Grid pursuit: ghosts chase a scripted evader on an ASCII-defined maze.
// Layout charset: '#' wall, '.' pill, 'G' ghost spawn, 'P' evader spawn,
// ' ' empty. Moves are simultaneous; moving into a wall is a no-op.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "optlab/envs/env.hpp"

namespace optlab::envs {

struct Cell {
    int x = 0, y = 0;
    bool operator==(const Cell&) const = default;
};

struct GridLayout {
    int width = 0, height = 0;
    std::vector<uint8_t> walls;        // row-major, 1 = wall
    std::vector<Cell> pills;
    std::vector<Cell> ghost_spawns;
    Cell pacman_spawn;

    bool wall(int x, int y) const { return walls[static_cast<size_t>(y) * width + x] != 0; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    int free_cells() const;
};

// Parses a rectangular ASCII block. Throws ConfigError with line/column info
// on ragged rows, unknown characters, or missing spawns; also rejects
// layouts whose free space is not connected.
GridLayout load_layout(const std::string& text);
GridLayout load_layout_file(const std::string& path);

// Observation encodings. `paper_axis` reproduces the documented input sizes
// for the classic layouts: per-axis one-hot of the ghost's own position plus
// per-axis one-hot of the evader -> 2*(W+H) entries. `rich` appends teammate
// axis one-hots and the pill bitmap over free cells:
// 2*(W+H) + (n-1)*(W+H) + F.
enum class GridObsScheme { PaperAxis, Rich };

struct GridPursuitParams {
    GridObsScheme obs_scheme = GridObsScheme::PaperAxis;
    double step_penalty = -0.01;
    double catch_reward = 5.0;
    double opponent_epsilon = 0.1;  // evader random-move probability
    int episode_cap = 100;
    double discount = 0.99;
};

// Hook for plugging a learned evader; return an action id given the env.
using OpponentPolicy = std::function<int(const class GridPursuitEnv&, Rng&)>;

// Actions: 0 stay, 1 up (y-1), 2 down (y+1), 3 left, 4 right.
class GridPursuitEnv : public Env {
public:
    GridPursuitEnv(GridLayout layout, GridPursuitParams params, uint64_t seed);

    const PosgSpec& spec() const override { return spec_; }
    StepResult reset() override;
    StepResult step(const std::vector<int>& joint_action) override;
    std::vector<double> observe(int agent) const override;
    std::vector<double> global_state() const override;

    void set_opponent(OpponentPolicy policy) { opponent_ = std::move(policy); }

    const GridLayout& layout() const { return layout_; }
    const std::vector<Cell>& ghosts() const { return ghosts_; }
    const Cell& pacman() const { return pacman_; }
    int steps_taken() const { return step_count_; }

    // Test hook: place entities mid-episode.
    void set_positions(const std::vector<Cell>& ghosts, const Cell& pacman);

    // Maze-aware distance from `from` to the nearest ghost (BFS over free
    // cells); used by the scripted evader and exposed for tests.
    int bfs_nearest_ghost(const Cell& from) const;

    static constexpr int kNumActions = 5;

private:
    Cell apply_move(const Cell& c, int action) const;
    int scripted_evader_action();
    StepResult make_result(const std::vector<double>& rewards, bool done, const StepInfo& info) const;

    GridLayout layout_;
    GridPursuitParams params_;
    PosgSpec spec_;
    Rng rng_;
    OpponentPolicy opponent_;
    std::vector<Cell> ghosts_;
    Cell pacman_;
    int step_count_ = 0;
    bool done_ = true;
};

int grid_obs_dim(const GridLayout& layout, GridObsScheme scheme, int num_agents);

}  // namespace optlab::envs
