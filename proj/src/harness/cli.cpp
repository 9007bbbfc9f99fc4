#include "optlab/harness/cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "optlab/harness/analysis.hpp"
#include "optlab/harness/oracles.hpp"
#include "optlab/harness/trainer.hpp"

namespace optlab::harness {

namespace fs = std::filesystem;

namespace {

void write_error_record(const std::string& out_dir, const std::string& message) {
    if (out_dir.empty()) return;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream f(fs::path(out_dir) / "error.json", std::ios::binary);
    nlohmann::ordered_json j;
    j["error"] = true;
    j["message"] = message;
    f << j.dump(2) << "\n";
}

std::pair<int64_t, int64_t> parse_seed_range(const std::string& text) {
    const size_t dots = text.find("..");
    if (dots == std::string::npos) {
        const int64_t s = std::stoll(text);
        return {s, s};
    }
    const int64_t a = std::stoll(text.substr(0, dots));
    const int64_t b = std::stoll(text.substr(dots + 2));
    if (b < a) throw ConfigError("sweep: empty seed range '" + text + "'");
    return {a, b};
}

int run_one(const std::string& config_path, std::optional<int64_t> seed,
            const std::string& out_dir) {
    RunConfig cfg = parse_config_file(config_path);
    if (seed) cfg.seed = *seed;
    validate(cfg);
    try {
        Trainer trainer(cfg, out_dir);
        trainer.run();
        std::cout << "run complete: " << trainer.episodes().size() << " episodes, "
                  << trainer.updates().size() << " updates -> " << out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        write_error_record(out_dir, e.what());
        throw;
    }
}

std::string self_exe() {
    char buf[4096];
    const ssize_t n = readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (n <= 0) throw ConfigError("sweep: cannot resolve own executable path");
    buf[n] = '\0';
    return std::string(buf);
}

int run_sweep(const std::string& config_path, const std::string& seeds,
              const std::string& out_base, int jobs) {
    const auto [first, last] = parse_seed_range(seeds);
    if (jobs <= 1) {
        for (int64_t s = first; s <= last; ++s) {
            const std::string out = (fs::path(out_base) / ("seed_" + std::to_string(s))).string();
            const int rc = run_one(config_path, s, out);
            if (rc != 0) return rc;
        }
        return 0;
    }

    // Parallel runs in child processes with disjoint output directories.
    const std::string exe = self_exe();
    std::vector<pid_t> active;
    int failures = 0;
    auto reap_one = [&]() {
        int status = 0;
        const pid_t done = waitpid(-1, &status, 0);
        if (done > 0) {
            active.erase(std::remove(active.begin(), active.end(), done), active.end());
            if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failures;
        }
    };
    for (int64_t s = first; s <= last; ++s) {
        while (static_cast<int>(active.size()) >= jobs) reap_one();
        const std::string out = (fs::path(out_base) / ("seed_" + std::to_string(s))).string();
        const std::string seed_str = std::to_string(s);
        const pid_t pid = fork();
        if (pid < 0) throw ConfigError("sweep: fork failed");
        if (pid == 0) {
            execl(exe.c_str(), exe.c_str(), "run", "--config", config_path.c_str(), "--seed",
                  seed_str.c_str(), "--out", out.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        active.push_back(pid);
    }
    while (!active.empty()) reap_one();
    return failures == 0 ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"optlab: option-based policy transfer laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds, metric = "team_return", out_file, spec_file;
    int64_t seed = -1;
    int window = 100, jobs = 1;
    int64_t grid = 1000;
    std::vector<std::string> dirs;

    CLI::App* run = app.add_subcommand("run", "execute one training run");
    run->add_option("--config", config_path, "config file")->required();
    CLI::Option* seed_opt = run->add_option("--seed", seed, "seed override");
    run->add_option("--out", out_dir, "output directory")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "run a seed range");
    sweep->add_option("--config", config_path, "config file")->required();
    sweep->add_option("--seeds", seeds, "seed range a..b")->required();
    sweep->add_option("--out", out_dir, "output base directory")->required();
    sweep->add_option("--jobs", jobs, "parallel runs");

    CLI::App* compare = app.add_subcommand("compare", "summarize runs per method");
    compare->add_option("--metric", metric, "episode metric");
    compare->add_option("--window", window, "trailing episode window");
    compare->add_option("dirs", dirs, "run directories")->required();

    CLI::App* plot = app.add_subcommand("plotdata", "emit columnar series");
    plot->add_option("--metric", metric, "episode metric");
    plot->add_option("--window", window, "trailing episode window");
    plot->add_option("--grid", grid, "step grid stride");
    plot->add_option("--out", out_file, "output file (default stdout)");
    plot->add_option("dirs", dirs, "run directories")->required();

    CLI::App* oracle = app.add_subcommand("oracle", "option-value table for a tabular model");
    oracle->add_option("spec", spec_file, "tabular model JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed())
            return run_one(config_path,
                           seed_opt->count() > 0 ? std::optional<int64_t>(seed) : std::nullopt,
                           out_dir);
        if (sweep->parsed()) return run_sweep(config_path, seeds, out_dir, jobs);
        if (compare->parsed()) {
            std::cout << compare_table(compare_runs(dirs, metric, window), metric);
            return 0;
        }
        if (plot->parsed()) {
            const std::string table = plotdata_table(dirs, metric, window, grid);
            if (out_file.empty()) {
                std::cout << table;
            } else {
                std::ofstream f(out_file, std::ios::binary);
                f << table;
            }
            return 0;
        }
        if (oracle->parsed()) {
            const TabularOptionModel model = load_option_model(spec_file);
            std::cout << option_values_to_json(option_value_iterate(model)) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        nlohmann::ordered_json j;
        j["error"] = true;
        j["message"] = e.what();
        std::cerr << j.dump() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace optlab::harness
