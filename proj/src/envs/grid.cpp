#include "optlab/envs/grid.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

namespace optlab::envs {

int GridLayout::free_cells() const {
    int n = 0;
    for (uint8_t w : walls) n += w == 0 ? 1 : 0;
    return n;
}

GridLayout load_layout(const std::string& text) {
    GridLayout out;
    std::vector<std::string> rows;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        rows.push_back(line);
    }
    while (!rows.empty() && rows.back().empty()) rows.pop_back();
    if (rows.empty()) throw ConfigError("layout: empty text");

    out.height = static_cast<int>(rows.size());
    out.width = static_cast<int>(rows[0].size());
    if (out.width == 0) throw ConfigError("layout: empty first row");
    out.walls.assign(static_cast<size_t>(out.width) * out.height, 0);

    bool have_pacman = false;
    for (int y = 0; y < out.height; ++y) {
        if (static_cast<int>(rows[y].size()) != out.width)
            throw ConfigError("layout: ragged row at line " + std::to_string(y + 1) +
                              " (expected width " + std::to_string(out.width) + ", got " +
                              std::to_string(rows[y].size()) + ")");
        for (int x = 0; x < out.width; ++x) {
            const char c = rows[y][static_cast<size_t>(x)];
            switch (c) {
                case '#': out.walls[static_cast<size_t>(y) * out.width + x] = 1; break;
                case '.': out.pills.push_back({x, y}); break;
                case 'G': out.ghost_spawns.push_back({x, y}); break;
                case 'P':
                    if (have_pacman)
                        throw ConfigError("layout: duplicate 'P' at line " +
                                          std::to_string(y + 1) + ", column " +
                                          std::to_string(x + 1));
                    out.pacman_spawn = {x, y};
                    have_pacman = true;
                    break;
                case ' ': break;
                default:
                    throw ConfigError(std::string("layout: unknown character '") + c +
                                      "' at line " + std::to_string(y + 1) + ", column " +
                                      std::to_string(x + 1));
            }
        }
    }
    if (out.ghost_spawns.empty()) throw ConfigError("layout: no ghost spawn ('G') found");
    if (!have_pacman) throw ConfigError("layout: no pacman spawn ('P') found");

    // Connectivity check over free space, flood fill from the pacman spawn.
    std::vector<uint8_t> seen(out.walls.size(), 0);
    std::deque<Cell> q{out.pacman_spawn};
    seen[static_cast<size_t>(out.pacman_spawn.y) * out.width + out.pacman_spawn.x] = 1;
    int reached = 0;
    while (!q.empty()) {
        Cell c = q.front();
        q.pop_front();
        ++reached;
        const int dx[4] = {0, 0, -1, 1}, dy[4] = {-1, 1, 0, 0};
        for (int k = 0; k < 4; ++k) {
            const int nx = c.x + dx[k], ny = c.y + dy[k];
            if (!out.in_bounds(nx, ny) || out.wall(nx, ny)) continue;
            uint8_t& s = seen[static_cast<size_t>(ny) * out.width + nx];
            if (!s) {
                s = 1;
                q.push_back({nx, ny});
            }
        }
    }
    if (reached != out.free_cells())
        throw ConfigError("layout: free space is not connected");
    return out;
}

GridLayout load_layout_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("layout: cannot open file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return load_layout(ss.str());
}

int grid_obs_dim(const GridLayout& layout, GridObsScheme scheme, int num_agents) {
    const int axis = layout.width + layout.height;
    switch (scheme) {
        case GridObsScheme::PaperAxis: return 2 * axis;
        case GridObsScheme::Rich: return (num_agents + 1) * axis + layout.free_cells();
    }
    return 0;
}

GridPursuitEnv::GridPursuitEnv(GridLayout layout, GridPursuitParams params, uint64_t seed)
    : layout_(std::move(layout)), params_(params), rng_(seed) {
    const int n = static_cast<int>(layout_.ghost_spawns.size());
    if (n < 2) throw ConfigError("grid pursuit: need at least 2 ghost spawns");
    spec_.num_agents = n;
    spec_.num_actions.assign(n, kNumActions);
    spec_.obs_dims.assign(n, grid_obs_dim(layout_, params_.obs_scheme, n));
    spec_.state_dim = (n + 1) * (layout_.width + layout_.height);
    spec_.discount = params_.discount;
    spec_.episode_cap = params_.episode_cap;
}

void GridPursuitEnv::set_positions(const std::vector<Cell>& ghosts, const Cell& pacman) {
    if (static_cast<int>(ghosts.size()) != spec_.num_agents)
        throw ConfigError("set_positions: ghost count mismatch");
    for (const Cell& c : ghosts)
        if (!layout_.in_bounds(c.x, c.y) || layout_.wall(c.x, c.y))
            throw ConfigError("set_positions: ghost placed in wall or out of bounds");
    if (!layout_.in_bounds(pacman.x, pacman.y) || layout_.wall(pacman.x, pacman.y))
        throw ConfigError("set_positions: pacman placed in wall or out of bounds");
    ghosts_ = ghosts;
    pacman_ = pacman;
}

StepResult GridPursuitEnv::reset() {
    ghosts_ = layout_.ghost_spawns;
    pacman_ = layout_.pacman_spawn;
    step_count_ = 0;
    done_ = false;
    return make_result(std::vector<double>(spec_.num_agents, 0.0), false, {});
}

Cell GridPursuitEnv::apply_move(const Cell& c, int action) const {
    static constexpr int dx[kNumActions] = {0, 0, 0, -1, 1};
    static constexpr int dy[kNumActions] = {0, -1, 1, 0, 0};
    const int nx = c.x + dx[action], ny = c.y + dy[action];
    if (!layout_.in_bounds(nx, ny) || layout_.wall(nx, ny)) return c;
    return {nx, ny};
}

int GridPursuitEnv::bfs_nearest_ghost(const Cell& from) const {
    std::vector<int> dist(layout_.walls.size(), -1);
    std::deque<Cell> q;
    for (const Cell& g : ghosts_) {
        int& d = dist[static_cast<size_t>(g.y) * layout_.width + g.x];
        if (d != 0) {
            d = 0;
            q.push_back(g);
        }
    }
    while (!q.empty()) {
        Cell c = q.front();
        q.pop_front();
        const int d = dist[static_cast<size_t>(c.y) * layout_.width + c.x];
        if (c == from) return d;
        const int dx[4] = {0, 0, -1, 1}, dy[4] = {-1, 1, 0, 0};
        for (int k = 0; k < 4; ++k) {
            const int nx = c.x + dx[k], ny = c.y + dy[k];
            if (!layout_.in_bounds(nx, ny) || layout_.wall(nx, ny)) continue;
            int& nd = dist[static_cast<size_t>(ny) * layout_.width + nx];
            if (nd < 0) {
                nd = d + 1;
                q.push_back({nx, ny});
            }
        }
    }
    const int d = dist[static_cast<size_t>(from.y) * layout_.width + from.x];
    return d < 0 ? layout_.width * layout_.height : d;
}

int GridPursuitEnv::scripted_evader_action() {
    if (rng_.bernoulli(params_.opponent_epsilon)) return rng_.uniform_int(kNumActions);
    int best_action = 0;
    int best_dist = -1;
    std::vector<int> ties;
    for (int a = 0; a < kNumActions; ++a) {
        const Cell target = apply_move(pacman_, a);
        const int d = bfs_nearest_ghost(target);
        if (d > best_dist) {
            best_dist = d;
            best_action = a;
            ties.assign(1, a);
        } else if (d == best_dist) {
            ties.push_back(a);
        }
    }
    if (ties.size() > 1) best_action = ties[static_cast<size_t>(rng_.uniform_int(static_cast<int>(ties.size())))];
    return best_action;
}

StepResult GridPursuitEnv::step(const std::vector<int>& joint_action) {
    if (done_) throw UsageError("grid pursuit: step after episode finished");
    if (static_cast<int>(joint_action.size()) != spec_.num_agents)
        throw ConfigError("grid pursuit: joint action size mismatch");
    for (int a : joint_action)
        if (a < 0 || a >= kNumActions) throw ConfigError("grid pursuit: invalid action id");

    const int pac_action = opponent_ ? opponent_(*this, rng_) : scripted_evader_action();

    const std::vector<Cell> old_ghosts = ghosts_;
    const Cell old_pacman = pacman_;
    for (int i = 0; i < spec_.num_agents; ++i) ghosts_[i] = apply_move(ghosts_[i], joint_action[i]);
    pacman_ = apply_move(old_pacman, pac_action);

    // Catch: co-occupancy after the simultaneous move, or a swap during it.
    bool caught = false;
    for (int i = 0; i < spec_.num_agents; ++i) {
        if (ghosts_[i] == pacman_) caught = true;
        if (ghosts_[i] == old_pacman && pacman_ == old_ghosts[i]) caught = true;
    }

    ++step_count_;
    std::vector<double> rewards(spec_.num_agents, params_.step_penalty);
    StepInfo info;
    if (caught) {
        for (double& r : rewards) r += params_.catch_reward;
        info.catches = 1;
    }
    done_ = caught || step_count_ >= params_.episode_cap;
    return make_result(rewards, done_, info);
}

std::vector<double> GridPursuitEnv::observe(int agent) const {
    if (agent < 0 || agent >= spec_.num_agents) throw ConfigError("grid pursuit: bad agent id");
    const int W = layout_.width, H = layout_.height;
    std::vector<double> obs;
    obs.reserve(static_cast<size_t>(spec_.obs_dims[agent]));
    auto push_axis = [&](const Cell& c) {
        for (int x = 0; x < W; ++x) obs.push_back(x == c.x ? 1.0 : 0.0);
        for (int y = 0; y < H; ++y) obs.push_back(y == c.y ? 1.0 : 0.0);
    };
    push_axis(ghosts_[agent]);
    push_axis(pacman_);
    if (params_.obs_scheme == GridObsScheme::Rich) {
        for (int j = 0; j < spec_.num_agents; ++j)
            if (j != agent) push_axis(ghosts_[j]);
        std::vector<uint8_t> pill_mask(layout_.walls.size(), 0);
        for (const Cell& p : layout_.pills)
            pill_mask[static_cast<size_t>(p.y) * W + p.x] = 1;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if (!layout_.wall(x, y))
                    obs.push_back(pill_mask[static_cast<size_t>(y) * W + x] ? 1.0 : 0.0);
    }
    return obs;
}

std::vector<double> GridPursuitEnv::global_state() const {
    const int W = layout_.width, H = layout_.height;
    std::vector<double> s;
    s.reserve(static_cast<size_t>(spec_.state_dim));
    auto push_axis = [&](const Cell& c) {
        for (int x = 0; x < W; ++x) s.push_back(x == c.x ? 1.0 : 0.0);
        for (int y = 0; y < H; ++y) s.push_back(y == c.y ? 1.0 : 0.0);
    };
    for (const Cell& g : ghosts_) push_axis(g);
    push_axis(pacman_);
    return s;
}

StepResult GridPursuitEnv::make_result(const std::vector<double>& rewards, bool done,
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
