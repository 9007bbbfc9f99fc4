#include "optlab/harness/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "optlab/harness/config.hpp"

namespace optlab::harness {

namespace fs = std::filesystem;

double episode_metric(const EpisodeRecord& r, const std::string& name) {
    if (name == "team_return") return r.team_return;
    if (name == "return_mean")
        return r.returns.empty() ? 0.0 : r.team_return / static_cast<double>(r.returns.size());
    if (name == "length") return static_cast<double>(r.length);
    if (name == "catches") return static_cast<double>(r.catches);
    if (name == "collisions") return static_cast<double>(r.collisions);
    if (name == "mean_landmark_dist") return r.mean_landmark_dist;
    if (name == "option_switches") return static_cast<double>(r.option_switches);
    throw ConfigError("unknown metric '" + name + "'");
}

Series episode_series(const RunLog& log, const std::string& metric) {
    Series s;
    for (const EpisodeRecord& r : log.episodes) {
        s.steps.push_back(r.end_step);
        s.values.push_back(episode_metric(r, metric));
    }
    return s;
}

Series load_series(const std::string& run_dir, const std::string& metric) {
    return episode_series(read_metrics((fs::path(run_dir) / "metrics.ndjson").string()), metric);
}

Series trailing_average(const Series& s, int window) {
    if (window <= 0) throw ConfigError("trailing_average: window must be positive");
    Series out;
    out.steps = s.steps;
    out.values.resize(s.values.size());
    double acc = 0.0;
    for (size_t i = 0; i < s.values.size(); ++i) {
        acc += s.values[i];
        if (i >= static_cast<size_t>(window)) acc -= s.values[i - static_cast<size_t>(window)];
        const size_t n = std::min(i + 1, static_cast<size_t>(window));
        out.values[i] = acc / static_cast<double>(n);
    }
    return out;
}

std::vector<double> sample_on_grid(const Series& s, const std::vector<int64_t>& grid) {
    std::vector<double> out(grid.size(), std::numeric_limits<double>::quiet_NaN());
    size_t j = 0;
    double last = std::numeric_limits<double>::quiet_NaN();
    for (size_t g = 0; g < grid.size(); ++g) {
        while (j < s.steps.size() && s.steps[j] <= grid[g]) {
            last = s.values[j];
            ++j;
        }
        out[g] = last;
    }
    return out;
}

double median(std::vector<double> values) { return percentile(std::move(values), 50.0); }

double percentile(std::vector<double> values, double p) {
    values.erase(std::remove_if(values.begin(), values.end(),
                                [](double v) { return std::isnan(v); }),
                 values.end());
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(rank));
    const size_t hi = static_cast<size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<CompareRow> compare_runs(const std::vector<std::string>& dirs,
                                     const std::string& metric, int window) {
    if (dirs.size() < 2) throw ConfigError("compare: need at least 2 run directories");
    std::map<std::string, std::vector<double>> by_advisor;
    std::string scenario;
    for (const std::string& dir : dirs) {
        const RunConfig cfg = parse_config_file((fs::path(dir) / "config.cfg").string());
        if (scenario.empty()) {
            scenario = cfg.scenario;
        } else if (scenario != cfg.scenario) {
            throw ConfigError("compare: mismatched scenarios ('" + scenario + "' vs '" +
                              cfg.scenario + "' in " + dir + "); compare runs of one scenario");
        }
        const Series s = load_series(dir, metric);
        if (s.values.empty()) throw ConfigError("compare: no episodes in " + dir);
        const size_t w = std::min(s.values.size(), static_cast<size_t>(window));
        double acc = 0.0;
        for (size_t i = s.values.size() - w; i < s.values.size(); ++i) acc += s.values[i];
        by_advisor[cfg.advisor].push_back(acc / static_cast<double>(w));
    }
    std::vector<CompareRow> rows;
    for (auto& [advisor, vals] : by_advisor) {
        CompareRow row;
        row.scenario = scenario;
        row.advisor = advisor;
        row.runs = static_cast<int>(vals.size());
        row.median_value = median(vals);
        row.iqr = percentile(vals, 75.0) - percentile(vals, 25.0);
        rows.push_back(row);
    }
    return rows;
}

std::string compare_table(const std::vector<CompareRow>& rows, const std::string& metric) {
    std::ostringstream out;
    out << "scenario\tadvisor\truns\tmedian_" << metric << "\tiqr\n";
    for (const CompareRow& r : rows)
        out << r.scenario << "\t" << r.advisor << "\t" << r.runs << "\t" << r.median_value << "\t"
            << r.iqr << "\n";
    return out.str();
}

std::string plotdata_table(const std::vector<std::string>& dirs, const std::string& metric,
                           int window, int64_t grid_stride) {
    if (dirs.empty()) throw ConfigError("plotdata: need at least 1 run directory");
    if (grid_stride <= 0) throw ConfigError("plotdata: grid stride must be positive");

    std::vector<Series> smoothed;
    int64_t max_step = 0;
    for (const std::string& dir : dirs) {
        Series s = trailing_average(load_series(dir, metric), window);
        if (!s.steps.empty()) max_step = std::max(max_step, s.steps.back());
        smoothed.push_back(std::move(s));
    }
    std::vector<int64_t> grid;
    for (int64_t g = grid_stride; g <= max_step; g += grid_stride) grid.push_back(g);

    std::vector<std::vector<double>> cols;
    for (const Series& s : smoothed) cols.push_back(sample_on_grid(s, grid));

    std::ostringstream out;
    out << "step";
    for (const std::string& dir : dirs) out << "\t" << fs::path(dir).filename().string();
    out << "\tmedian\n";
    for (size_t g = 0; g < grid.size(); ++g) {
        out << grid[g];
        std::vector<double> row;
        for (const auto& col : cols) {
            out << "\t" << col[g];
            row.push_back(col[g]);
        }
        out << "\t" << median(row) << "\n";
    }
    return out.str();
}

}  // namespace optlab::harness
