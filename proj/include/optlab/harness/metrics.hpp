// Run metrics: newline-delimited JSON records with fixed key ordering so a
// (config, seed) pair reproduces the file byte for byte.
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "optlab/common.hpp"

namespace optlab::harness {

struct AdviceCount {
    int agent = 0;
    int option = 0;
    int64_t count = 0;
};

struct EpisodeRecord {
    int64_t episode = 0;
    int64_t end_step = 0;
    int length = 0;
    std::vector<double> returns;  // per agent
    double team_return = 0.0;
    int catches = 0;
    int collisions = 0;
    double mean_landmark_dist = 0.0;
    int option_switches = 0;
    std::vector<AdviceCount> advice;  // sorted by (agent, option)
    double f = 0.0;
};

struct UpdateRecord {
    int64_t update = 0;
    int64_t step = 0;
    double f = 0.0;
    double eps = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double kl = 0.0;
    double transfer = 0.0;
    double advisor_loss = 0.0;
    double advisor_recon = 0.0;
    double advisor_reward = 0.0;
    int64_t advisor_updates = 0;
};

std::string to_line(const EpisodeRecord& r);
std::string to_line(const UpdateRecord& r);

class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path);
    void write(const EpisodeRecord& r);
    void write(const UpdateRecord& r);
    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

// Reading side, used by compare/plotdata and the acceptance checks.
struct RunLog {
    std::vector<EpisodeRecord> episodes;
    std::vector<UpdateRecord> updates;
};

RunLog read_metrics(const std::string& path);

}  // namespace optlab::harness
