#include "optlab/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace optlab::harness {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string fmt_intlist(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

struct Field {
    std::string name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        // Accept scientific notation for large counts (1e5 and friends).
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        const auto i = static_cast<int64_t>(d);
        if (static_cast<double>(i) != d)
            throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
        return i;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a real, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> parse_intlist(const std::string& key, const std::string& v) {
    std::vector<int> out;
    if (v.empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(static_cast<int>(parse_int(key, item)));
    return out;
}

const std::vector<Field>& registry() {
    auto str_field = [](const char* name, std::string RunConfig::* member) {
        return Field{name, [member](const RunConfig& c) { return c.*member; },
                     [member](RunConfig& c, const std::string& v) { c.*member = v; }};
    };
    auto int_field = [](const char* name, auto RunConfig::* member) {
        return Field{name,
                     [member](const RunConfig& c) { return std::to_string(c.*member); },
                     [member, name](RunConfig& c, const std::string& v) {
                         c.*member = static_cast<std::remove_reference_t<decltype(c.*member)>>(
                             parse_int(name, v));
                     }};
    };
    auto real_field = [](const char* name, double RunConfig::* member) {
        return Field{name, [member](const RunConfig& c) { return fmt_double(c.*member); },
                     [member, name](RunConfig& c, const std::string& v) {
                         c.*member = parse_real(name, v);
                     }};
    };
    auto bool_field = [](const char* name, bool RunConfig::* member) {
        return Field{name,
                     [member](const RunConfig& c) { return c.*member ? "true" : "false"; },
                     [member, name](RunConfig& c, const std::string& v) {
                         c.*member = parse_bool(name, v);
                     }};
    };
    auto intlist_field = [](const char* name, std::vector<int> RunConfig::* member) {
        return Field{name, [member](const RunConfig& c) { return fmt_intlist(c.*member); },
                     [member, name](RunConfig& c, const std::string& v) {
                         c.*member = parse_intlist(name, v);
                     }};
    };

    static const std::vector<Field> fields = {
        str_field("scenario", &RunConfig::scenario),
        str_field("layout", &RunConfig::layout),
        str_field("obs_scheme", &RunConfig::obs_scheme),
        real_field("opponent_eps", &RunConfig::opponent_eps),
        int_field("episode_cap", &RunConfig::episode_cap),
        real_field("particle_dt", &RunConfig::particle_dt),
        real_field("particle_damping", &RunConfig::particle_damping),
        real_field("particle_accel", &RunConfig::particle_accel),
        real_field("particle_max_speed", &RunConfig::particle_max_speed),
        real_field("particle_prey_accel", &RunConfig::particle_prey_accel),
        real_field("particle_prey_max_speed", &RunConfig::particle_prey_max_speed),
        real_field("particle_radius", &RunConfig::particle_radius),
        str_field("advisor", &RunConfig::advisor),
        bool_field("global_state_access", &RunConfig::global_state_access),
        int_field("seed", &RunConfig::seed),
        int_field("total_steps", &RunConfig::total_steps),
        real_field("gamma", &RunConfig::gamma),
        real_field("actor_lr", &RunConfig::actor_lr),
        real_field("critic_lr", &RunConfig::critic_lr),
        int_field("segment_len", &RunConfig::segment_len),
        real_field("kl_coeff", &RunConfig::kl_coeff),
        int_field("ppo_epochs", &RunConfig::ppo_epochs),
        bool_field("normalize_advantages", &RunConfig::normalize_advantages),
        bool_field("share_params", &RunConfig::share_params),
        intlist_field("hidden", &RunConfig::hidden),
        real_field("advisor_lr", &RunConfig::advisor_lr),
        int_field("advisor_batch", &RunConfig::advisor_batch),
        int_field("replay_capacity", &RunConfig::replay_capacity),
        real_field("eps_start", &RunConfig::eps_start),
        real_field("eps_finish", &RunConfig::eps_finish),
        int_field("eps_anneal", &RunConfig::eps_anneal),
        int_field("target_sync", &RunConfig::target_sync),
        int_field("warmup", &RunConfig::warmup),
        int_field("advisor_every", &RunConfig::advisor_every),
        real_field("term_lr", &RunConfig::term_lr),
        real_field("mu", &RunConfig::mu),
        real_field("xi", &RunConfig::xi),
        bool_field("xi_literal_additive", &RunConfig::xi_literal_additive),
        real_field("temperature", &RunConfig::temperature),
        int_field("embed_dim", &RunConfig::embed_dim),
        intlist_field("advisor_hidden", &RunConfig::advisor_hidden),
        intlist_field("sro_hidden", &RunConfig::sro_hidden),
        str_field("w_mode", &RunConfig::w_mode),
        str_field("loa_mode", &RunConfig::loa_mode),
        real_field("match_threshold", &RunConfig::match_threshold),
        int_field("metrics_window", &RunConfig::metrics_window),
    };
    return fields;
}

const Field* find_field(const std::string& key) {
    for (const Field& f : registry())
        if (f.name == key) return &f;
    return nullptr;
}

void parse_into(RunConfig& cfg, const std::string& text, const std::string& base_dir, int depth) {
    if (depth > 16) throw ConfigError("config: include depth exceeded (cycle?)");
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto notspace = [](unsigned char c) { return !std::isspace(c); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
        line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
        if (line.empty()) continue;

        if (line.rfind("include ", 0) == 0) {
            std::string inc = line.substr(8);
            inc.erase(inc.begin(), std::find_if(inc.begin(), inc.end(), notspace));
            fs::path p(inc);
            if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
            std::ifstream f(p);
            if (!f) throw ConfigError("config: cannot open include '" + p.string() + "'");
            std::ostringstream ss;
            ss << f.rdbuf();
            parse_into(cfg, ss.str(), p.parent_path().string(), depth + 1);
            continue;
        }

        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
        value.erase(value.begin(), std::find_if(value.begin(), value.end(), notspace));
        const Field* f = find_field(key);
        if (!f) throw ConfigError("config: unknown key '" + key + "'");
        f->set(cfg, value);
    }
}

}  // namespace

Scenario RunConfig::scenario_kind() const {
    if (scenario == "grid_pursuit") return Scenario::GridPursuit;
    if (scenario == "predator_prey") return Scenario::PredatorPrey;
    if (scenario == "coop_nav") return Scenario::CoopNav;
    throw ConfigError("config: unknown scenario '" + scenario + "'");
}

AdvisorKind RunConfig::advisor_kind() const {
    if (advisor == "none") return AdvisorKind::None;
    if (advisor == "goa") return AdvisorKind::Goa;
    if (advisor == "loa") return AdvisorKind::Loa;
    if (advisor == "sro") return AdvisorKind::Sro;
    throw ConfigError("config: unknown advisor '" + advisor + "'");
}

namespace {
ModeAuto parse_mode(const std::string& key, const std::string& v) {
    if (v == "auto") return ModeAuto::Auto;
    if (v == "shared") return ModeAuto::Shared;
    if (v == "per_agent") return ModeAuto::PerAgent;
    throw ConfigError("config: key '" + key + "' expects auto/shared/per_agent, got '" + v + "'");
}
}  // namespace

ModeAuto RunConfig::w_mode_kind() const { return parse_mode("w_mode", w_mode); }
ModeAuto RunConfig::loa_mode_kind() const { return parse_mode("loa_mode", loa_mode); }

double RunConfig::effective_mu() const {
    if (mu > 0.0) return mu;
    const double updates = static_cast<double>(total_steps) / static_cast<double>(segment_len);
    return updates > 0.0 ? 6.0 / updates : 1.0;
}

std::string RunConfig::layout_path() const {
    if (fs::exists(layout)) return layout;
    if (!base_dir.empty()) {
        const fs::path p = fs::path(base_dir) / layout;
        if (fs::exists(p)) return p.string();
    }
    return layout;
}

RunConfig parse_config_text(const std::string& text, const std::string& base_dir) {
    RunConfig cfg;
    cfg.base_dir = base_dir;
    parse_into(cfg, text, base_dir, 0);
    validate(cfg);
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    RunConfig cfg;
    cfg.base_dir = fs::path(path).parent_path().string();
    parse_into(cfg, ss.str(), cfg.base_dir, 0);
    apply_env_overrides(cfg);
    validate(cfg);
    return cfg;
}

void apply_env_overrides(RunConfig& cfg) {
    for (const Field& f : registry()) {
        const std::string var = "OPTLAB_" + f.name;
        if (const char* v = std::getenv(var.c_str())) f.set(cfg, v);
    }
}

void validate(const RunConfig& cfg) {
    cfg.scenario_kind();
    cfg.advisor_kind();
    cfg.w_mode_kind();
    cfg.loa_mode_kind();
    if (cfg.obs_scheme != "paper" && cfg.obs_scheme != "rich")
        throw ConfigError("config: obs_scheme must be paper or rich");
    if (cfg.total_steps <= 0) throw ConfigError("config: total_steps must be positive");
    if (cfg.segment_len <= 0) throw ConfigError("config: segment_len must be positive");
    if (cfg.gamma <= 0.0 || cfg.gamma > 1.0) throw ConfigError("config: gamma must be in (0,1]");
    if (cfg.actor_lr < 0 || cfg.critic_lr < 0 || cfg.advisor_lr < 0 || cfg.term_lr < 0)
        throw ConfigError("config: learning rates must be non-negative");
    if (cfg.advisor_batch <= 0) throw ConfigError("config: advisor_batch must be positive");
    if (cfg.replay_capacity <= 0) throw ConfigError("config: replay_capacity must be positive");
    if (cfg.eps_anneal <= 0) throw ConfigError("config: eps_anneal must be positive");
    if (cfg.eps_start < cfg.eps_finish) throw ConfigError("config: eps_start < eps_finish");
    if (cfg.target_sync <= 0) throw ConfigError("config: target_sync must be positive");
    if (cfg.advisor_every <= 0) throw ConfigError("config: advisor_every must be positive");
    if (cfg.temperature <= 0.0) throw ConfigError("config: temperature must be positive");
    if (cfg.embed_dim <= 0) throw ConfigError("config: embed_dim must be positive");
    if (cfg.episode_cap <= 0) throw ConfigError("config: episode_cap must be positive");
    if (cfg.metrics_window <= 0) throw ConfigError("config: metrics_window must be positive");
    if (cfg.mu < 0.0) throw ConfigError("config: mu must be non-negative");
    if (cfg.xi < 0.0) throw ConfigError("config: xi must be non-negative");
    if (cfg.match_threshold < 0.0 || cfg.match_threshold > 1.0)
        throw ConfigError("config: match_threshold must be in [0,1]");
    if (cfg.opponent_eps < 0.0 || cfg.opponent_eps > 1.0)
        throw ConfigError("config: opponent_eps must be in [0,1]");
    if (cfg.particle_dt <= 0.0) throw ConfigError("config: particle_dt must be positive");
    if (cfg.particle_damping < 0.0 || cfg.particle_damping > 1.0)
        throw ConfigError("config: particle_damping must be in [0,1]");
    if (cfg.particle_radius <= 0.0) throw ConfigError("config: particle_radius must be positive");
    if (cfg.particle_accel <= 0.0 || cfg.particle_prey_accel <= 0.0 ||
        cfg.particle_max_speed <= 0.0 || cfg.particle_prey_max_speed <= 0.0)
        throw ConfigError("config: particle speeds and accelerations must be positive");
    if (cfg.ppo_epochs <= 0) throw ConfigError("config: ppo_epochs must be positive");
    if (cfg.hidden.empty()) throw ConfigError("config: hidden must not be empty");
    if (cfg.advisor_kind() == AdvisorKind::Goa && !cfg.global_state_access)
        throw ConfigError("config: advisor=goa requires global_state_access=true");
    for (int h : cfg.hidden)
        if (h <= 0) throw ConfigError("config: hidden sizes must be positive");
}

std::string canonical(const RunConfig& cfg) {
    std::string out;
    for (const Field& f : registry()) {
        out += f.name;
        out += " = ";
        out += f.get(cfg);
        out += "\n";
    }
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const Field& f : registry()) out.push_back(f.name);
    return out;
}

}  // namespace optlab::harness
