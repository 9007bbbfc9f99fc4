// Post-run analysis: windowed episode series, cross-seed medians, the
// `compare` summary table, and `plotdata` columnar series emission.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optlab/harness/metrics.hpp"

namespace optlab::harness {

double episode_metric(const EpisodeRecord& r, const std::string& name);

struct Series {
    std::vector<int64_t> steps;  // episode end steps, ascending
    std::vector<double> values;
};

Series episode_series(const RunLog& log, const std::string& metric);
Series load_series(const std::string& run_dir, const std::string& metric);

// Trailing moving average over the last `window` episodes (window=1 is the
// raw series).
Series trailing_average(const Series& s, int window);

// Value at each grid step = series value at the last episode ending at or
// before that step; NaN before the first episode completes.
std::vector<double> sample_on_grid(const Series& s, const std::vector<int64_t>& grid);

double median(std::vector<double> values);
double percentile(std::vector<double> values, double p);  // linear interpolation

struct CompareRow {
    std::string scenario;
    std::string advisor;
    int runs = 0;
    double median_value = 0.0;
    double iqr = 0.0;
};

// Windowed-average metric per run, grouped by advisor; refuses dirs whose
// configs disagree on the scenario.
std::vector<CompareRow> compare_runs(const std::vector<std::string>& dirs,
                                     const std::string& metric, int window);
std::string compare_table(const std::vector<CompareRow>& rows, const std::string& metric);

// TSV with one smoothed column per run plus a cross-run median column.
std::string plotdata_table(const std::vector<std::string>& dirs, const std::string& metric,
                           int window, int64_t grid_stride);

}  // namespace optlab::harness
