#include "optlab/harness/metrics.hpp"

#include <json.hpp>

namespace optlab::harness {

using ordered_json = nlohmann::ordered_json;

std::string to_line(const EpisodeRecord& r) {
    ordered_json j;
    j["kind"] = "episode";
    j["episode"] = r.episode;
    j["end_step"] = r.end_step;
    j["length"] = r.length;
    j["returns"] = r.returns;
    j["team_return"] = r.team_return;
    j["catches"] = r.catches;
    j["collisions"] = r.collisions;
    j["mean_landmark_dist"] = r.mean_landmark_dist;
    j["option_switches"] = r.option_switches;
    ordered_json advice = ordered_json::array();
    for (const AdviceCount& a : r.advice)
        advice.push_back(ordered_json::array({a.agent, a.option, a.count}));
    j["advice"] = advice;
    j["f"] = r.f;
    return j.dump();
}

std::string to_line(const UpdateRecord& r) {
    ordered_json j;
    j["kind"] = "update";
    j["update"] = r.update;
    j["step"] = r.step;
    j["f"] = r.f;
    j["eps"] = r.eps;
    j["critic_loss"] = r.critic_loss;
    j["actor_loss"] = r.actor_loss;
    j["kl"] = r.kl;
    j["transfer"] = r.transfer;
    j["advisor_loss"] = r.advisor_loss;
    j["advisor_recon"] = r.advisor_recon;
    j["advisor_reward"] = r.advisor_reward;
    j["advisor_updates"] = r.advisor_updates;
    return j.dump();
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("metrics: cannot open '" + path + "' for writing");
}

void MetricsWriter::write(const EpisodeRecord& r) { out_ << to_line(r) << "\n"; }
void MetricsWriter::write(const UpdateRecord& r) { out_ << to_line(r) << "\n"; }

RunLog read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("metrics: cannot open '" + path + "'");
    RunLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const ordered_json j = ordered_json::parse(line);
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "episode") {
            EpisodeRecord r;
            r.episode = j.at("episode").get<int64_t>();
            r.end_step = j.at("end_step").get<int64_t>();
            r.length = j.at("length").get<int>();
            r.returns = j.at("returns").get<std::vector<double>>();
            r.team_return = j.at("team_return").get<double>();
            r.catches = j.at("catches").get<int>();
            r.collisions = j.at("collisions").get<int>();
            r.mean_landmark_dist = j.at("mean_landmark_dist").get<double>();
            r.option_switches = j.at("option_switches").get<int>();
            for (const auto& a : j.at("advice"))
                r.advice.push_back({a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int64_t>()});
            r.f = j.at("f").get<double>();
            log.episodes.push_back(std::move(r));
        } else if (kind == "update") {
            UpdateRecord r;
            r.update = j.at("update").get<int64_t>();
            r.step = j.at("step").get<int64_t>();
            r.f = j.at("f").get<double>();
            r.eps = j.at("eps").get<double>();
            r.critic_loss = j.at("critic_loss").get<double>();
            r.actor_loss = j.at("actor_loss").get<double>();
            r.kl = j.at("kl").get<double>();
            r.transfer = j.at("transfer").get<double>();
            r.advisor_loss = j.at("advisor_loss").get<double>();
            r.advisor_recon = j.at("advisor_recon").get<double>();
            r.advisor_reward = j.at("advisor_reward").get<double>();
            r.advisor_updates = j.at("advisor_updates").get<int64_t>();
            log.updates.push_back(std::move(r));
        } else {
            throw ConfigError("metrics: unknown record kind '" + kind + "'");
        }
    }
    return log;
}

}  // namespace optlab::harness
