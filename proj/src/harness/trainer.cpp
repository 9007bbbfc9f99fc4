#include "optlab/harness/trainer.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "optlab/adv/goa.hpp"
#include "optlab/adv/loa.hpp"
#include "optlab/adv/sro.hpp"
#include "optlab/envs/grid.hpp"
#include "optlab/envs/particle.hpp"

namespace optlab::harness {

namespace fs = std::filesystem;

std::unique_ptr<envs::Env> make_env(const RunConfig& cfg, uint64_t env_seed) {
    switch (cfg.scenario_kind()) {
        case Scenario::GridPursuit: {
            envs::GridPursuitParams p;
            p.obs_scheme = cfg.obs_scheme == "rich" ? envs::GridObsScheme::Rich
                                                    : envs::GridObsScheme::PaperAxis;
            p.opponent_epsilon = cfg.opponent_eps;
            p.episode_cap = cfg.episode_cap;
            p.discount = cfg.gamma;
            return std::make_unique<envs::GridPursuitEnv>(
                envs::load_layout_file(cfg.layout_path()), p, env_seed);
        }
        case Scenario::PredatorPrey:
        case Scenario::CoopNav: {
            envs::ParticleParams p;
            p.dt = cfg.particle_dt;
            p.damping = cfg.particle_damping;
            p.agent_accel = cfg.particle_accel;
            p.agent_max_speed = cfg.particle_max_speed;
            p.prey_accel = cfg.particle_prey_accel;
            p.prey_max_speed = cfg.particle_prey_max_speed;
            p.agent_radius = cfg.particle_radius;
            p.opponent_epsilon = cfg.opponent_eps;
            p.episode_cap = cfg.episode_cap;
            p.discount = cfg.gamma;
            const auto scenario = cfg.scenario_kind() == Scenario::PredatorPrey
                                      ? envs::ParticleScenario::PredatorPrey
                                      : envs::ParticleScenario::CoopNav;
            return std::make_unique<envs::ParticleEnv>(scenario, p, env_seed);
        }
    }
    throw ConfigError("make_env: unhandled scenario");
}

// Live policy views over the trainer's agents.
class Trainer::Views : public adv::PolicyViews {
public:
    explicit Views(Trainer* t) : t_(t) {}
    int num_agents() const override { return t_->n_; }
    std::vector<double> probs(int agent, std::span<const double> obs) const override {
        return t_->agent_for(agent).policy().evaluate(obs);
    }
    std::vector<double> logits(int agent, std::span<const double> obs) const override {
        return t_->agent_for(agent).policy().evaluate_logits(obs);
    }

private:
    Trainer* t_;
};

Trainer::Trainer(RunConfig cfg, std::string out_dir)
    : cfg_(std::move(cfg)),
      out_dir_(std::move(out_dir)),
      seeds_(static_cast<uint64_t>(cfg_.seed)),
      rng_selection_(seeds_.stream(streams::kSelection)),
      rng_advisor_(seeds_.stream(streams::kAdvisorUpdates)) {
    validate(cfg_);
    env_ = make_env(cfg_, seeds_.net_seed(streams::kEnv));
    n_ = env_->spec().num_agents;

    rl::PpoParams pp;
    pp.policy_hidden = cfg_.hidden;
    pp.value_hidden = cfg_.hidden;
    pp.actor_lr = cfg_.actor_lr;
    pp.critic_lr = cfg_.critic_lr;
    pp.gamma = cfg_.gamma;
    pp.kl_coeff = cfg_.kl_coeff;
    pp.epochs = cfg_.ppo_epochs;
    pp.normalize_advantages = cfg_.normalize_advantages;
    const int num_learners = cfg_.share_params ? 1 : n_;
    for (int i = 0; i < num_learners; ++i)
        agents_.push_back(std::make_unique<rl::PpoAgent>(
            env_->spec().obs_dims[0], env_->spec().num_actions[0], pp,
            seeds_.net_seed(streams::kAgentNetBase + static_cast<uint64_t>(i))));
    for (int i = 0; i < n_; ++i)
        rng_act_.push_back(seeds_.stream(streams::kActBase + static_cast<uint64_t>(i)));

    views_ = std::make_unique<Views>(this);
    const uint64_t adv_seed = seeds_.net_seed(streams::kAdvisorNet);
    const bool mixed_rewards = cfg_.scenario_kind() == Scenario::CoopNav;
    switch (cfg_.advisor_kind()) {
        case AdvisorKind::None:
            break;
        case AdvisorKind::Goa: {
            adv::GoaParams gp;
            gp.q_hidden = cfg_.advisor_hidden;
            gp.beta_hidden = cfg_.advisor_hidden;
            gp.q_lr = cfg_.advisor_lr;
            gp.term_lr = cfg_.term_lr;
            gp.xi = cfg_.xi;
            gp.batch = cfg_.advisor_batch;
            gp.replay_capacity = static_cast<size_t>(cfg_.replay_capacity);
            gp.target_sync = cfg_.target_sync;
            gp.warmup = static_cast<size_t>(cfg_.warmup);
            gp.gamma = cfg_.gamma;
            gp.literal_additive_xi = cfg_.xi_literal_additive;
            advisor_ = std::make_unique<adv::GlobalOptionAdvisor>(env_->spec().state_dim, n_, gp,
                                                                  adv_seed);
            break;
        }
        case AdvisorKind::Loa: {
            adv::LoaParams lp;
            lp.q_hidden = cfg_.advisor_hidden;
            lp.beta_hidden = cfg_.advisor_hidden;
            lp.q_lr = cfg_.advisor_lr;
            lp.term_lr = cfg_.term_lr;
            lp.xi = cfg_.xi;
            lp.batch = cfg_.advisor_batch;
            lp.replay_capacity = static_cast<size_t>(cfg_.replay_capacity);
            lp.target_sync = cfg_.target_sync;
            lp.warmup = static_cast<size_t>(cfg_.warmup);
            lp.gamma = cfg_.gamma;
            lp.literal_additive_xi = cfg_.xi_literal_additive;
            const ModeAuto mode = cfg_.loa_mode_kind();
            lp.per_agent_modules =
                mode == ModeAuto::PerAgent || (mode == ModeAuto::Auto && mixed_rewards);
            advisor_ = std::make_unique<adv::LocalOptionAdvisor>(env_->spec().obs_dims[0], n_, lp,
                                                                 adv_seed);
            break;
        }
        case AdvisorKind::Sro: {
            adv::SroParams sp;
            sp.embed_dim = cfg_.embed_dim;
            sp.embed_hidden = cfg_.sro_hidden;
            sp.decoder_hidden = cfg_.sro_hidden;
            sp.sr_hidden = cfg_.sro_hidden;
            sp.beta_hidden = cfg_.sro_hidden;
            sp.embed_lr = cfg_.advisor_lr;
            sp.sr_lr = cfg_.advisor_lr;
            sp.reward_lr = cfg_.advisor_lr;
            sp.term_lr = cfg_.term_lr;
            sp.xi = cfg_.xi;
            sp.batch = cfg_.advisor_batch;
            sp.replay_capacity = static_cast<size_t>(cfg_.replay_capacity);
            sp.target_sync = cfg_.target_sync;
            sp.warmup = static_cast<size_t>(cfg_.warmup);
            sp.gamma = cfg_.gamma;
            sp.literal_additive_xi = cfg_.xi_literal_additive;
            const ModeAuto mode = cfg_.w_mode_kind();
            sp.per_agent_w = mode == ModeAuto::PerAgent || (mode == ModeAuto::Auto && mixed_rewards);
            if (cfg_.match_threshold > 0.0) sp.match_threshold = cfg_.match_threshold;
            advisor_ = std::make_unique<adv::SrOptionAdvisor>(env_->spec().obs_dims[0], n_,
                                                              views_.get(), sp, adv_seed);
            break;
        }
    }
    if (advisor_ && !advisor_->joint())
        controller_ = std::make_unique<opt::AdviceController>(n_, n_);

    opt::TransferSchedule ts;
    ts.mu = cfg_.effective_mu();
    ts.temperature = cfg_.temperature;
    schedules_.assign(static_cast<size_t>(n_), ts);

    eps_.start = cfg_.eps_start;
    eps_.finish = cfg_.eps_finish;
    eps_.anneal_steps = cfg_.eps_anneal;

    advice_.assign(static_cast<size_t>(n_), -1);
    segments_.assign(static_cast<size_t>(n_), {});
    ep_returns_.assign(static_cast<size_t>(n_), 0.0);

    if (!out_dir_.empty()) {
        fs::create_directories(out_dir_);
        std::ofstream cfg_out(fs::path(out_dir_) / "config.cfg", std::ios::binary);
        cfg_out << canonical(cfg_);
        writer_ = std::make_unique<MetricsWriter>((fs::path(out_dir_) / "metrics.ndjson").string());
    }
}

Trainer::~Trainer() = default;

void Trainer::trace_event(TraceEvent ev) {
    if (trace_) trace_->events.push_back(ev);
}

void Trainer::reset_episode() {
    cur_ = env_->reset();
    ep_returns_.assign(static_cast<size_t>(n_), 0.0);
    ep_length_ = 0;
    ep_catches_ = 0;
    ep_collisions_ = 0;
    ep_dist_sum_ = 0.0;
    ep_switches_ = 0;
    ep_advice_counts_.clear();

    if (!advisor_) return;
    const double eps = eps_.at(step_);
    if (advisor_->joint()) {
        auto* goa = static_cast<adv::GlobalOptionAdvisor*>(advisor_.get());
        const std::vector<int> components = goa->advise(cur_.state, eps, rng_selection_);
        for (int i = 0; i < n_; ++i) {
            advice_[static_cast<size_t>(i)] = components[static_cast<size_t>(i)];
            trace_event({TraceEvent::Kind::Reselect, step_, i, components[static_cast<size_t>(i)]});
        }
    } else {
        controller_->reset();
        for (int i = 0; i < n_; ++i) {
            const auto ev = controller_->begin(i, *advisor_, cur_.observations[static_cast<size_t>(i)],
                                               eps, rng_selection_);
            advice_[static_cast<size_t>(i)] = ev.option;
            trace_event({TraceEvent::Kind::Reselect, step_, i, ev.option});
        }
    }
}

void Trainer::handle_termination(const envs::StepResult& next) {
    if (!advisor_ || next.done) return;
    const double eps = eps_.at(step_);
    if (advisor_->joint()) {
        auto* goa = static_cast<adv::GlobalOptionAdvisor*>(advisor_.get());
        const bool term = goa->sample_joint_termination(next.state, rng_selection_);
        trace_event({TraceEvent::Kind::TerminationSample, step_, -1,
                     static_cast<int>(goa->active_joint()), term});
        if (term) {
            const std::vector<int> components = goa->advise(next.state, eps, rng_selection_);
            ++ep_switches_;
            for (int i = 0; i < n_; ++i) {
                advice_[static_cast<size_t>(i)] = components[static_cast<size_t>(i)];
                trace_event(
                    {TraceEvent::Kind::Reselect, step_, i, components[static_cast<size_t>(i)]});
            }
        }
    } else {
        for (int i = 0; i < n_; ++i) {
            const auto ev = controller_->step(i, *advisor_, next.observations[static_cast<size_t>(i)],
                                              eps, rng_selection_);
            trace_event({TraceEvent::Kind::TerminationSample, step_, i,
                         advice_[static_cast<size_t>(i)], ev.termination_sample});
            if (ev.reselected) {
                ++ep_switches_;
                advice_[static_cast<size_t>(i)] = ev.option;
                trace_event({TraceEvent::Kind::Reselect, step_, i, ev.option});
            }
        }
    }
}

std::vector<std::vector<double>> Trainer::transfer_targets(const rl::TrajectorySegment& seg) {
    std::vector<std::vector<double>> targets(seg.length());
    for (size_t j = 0; j < seg.length(); ++j) {
        const int omega = seg.steps[j].advice_option;
        if (omega < 0) continue;
        const std::vector<double> logits =
            agent_for(omega).policy().evaluate_logits(seg.steps[j].obs);
        targets[j] = nn::softmax_temp(logits, cfg_.temperature);
    }
    return targets;
}

void Trainer::do_updates(const envs::StepResult& next) {
    UpdateRecord rec;
    rec.update = ++update_idx_;
    rec.step = step_;
    rec.eps = eps_.at(step_);
    rec.f = schedules_[0].f();

    for (int i = 0; i < n_; ++i) {
        rl::TrajectorySegment& seg = segments_[static_cast<size_t>(i)];
        if (seg.empty()) continue;
        seg.boot_obs = next.observations[static_cast<size_t>(i)];
        seg.bootstrap = !seg.steps.back().done;

        rl::UpdateReport rep;
        if (advisor_) {
            const auto targets = transfer_targets(seg);
            rep = agent_for(i).update(seg, &targets, schedules_[static_cast<size_t>(i)].f());
        } else {
            rep = agent_for(i).update(seg, nullptr, 0.0);
        }
        schedules_[static_cast<size_t>(i)].tick();
        trace_event({TraceEvent::Kind::ActorUpdate, step_, i});

        rec.critic_loss += rep.critic_loss / n_;
        rec.actor_loss += rep.actor_total / n_;
        rec.kl += rep.kl / n_;
        rec.transfer += rep.transfer / n_;
        seg = rl::TrajectorySegment{};
    }

    rec.advisor_loss = last_advisor_report_.q_loss;
    rec.advisor_recon = last_advisor_report_.recon_loss;
    rec.advisor_reward = last_advisor_report_.reward_loss;
    rec.advisor_updates = advisor_ ? advisor_->update_steps() : 0;
    update_log_.push_back(rec);
    if (writer_) writer_->write(rec);
}

void Trainer::write_episode_record(int64_t end_step) {
    EpisodeRecord rec;
    rec.episode = episode_idx_;
    rec.end_step = end_step;
    rec.length = ep_length_;
    rec.returns = ep_returns_;
    for (double r : ep_returns_) rec.team_return += r;
    rec.catches = ep_catches_;
    rec.collisions = ep_collisions_;
    rec.mean_landmark_dist = ep_length_ > 0 ? ep_dist_sum_ / ep_length_ : 0.0;
    rec.option_switches = ep_switches_;
    for (const auto& [key, count] : ep_advice_counts_)
        rec.advice.push_back({key.first, key.second, count});
    rec.f = schedules_[0].f();
    episode_log_.push_back(rec);
    if (writer_) writer_->write(rec);
}

void Trainer::run() {
    bool need_reset = true;
    while (step_ < cfg_.total_steps) {
        if (need_reset) {
            reset_episode();
            need_reset = false;
        }

        std::vector<int> actions(static_cast<size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            auto [a, logp] = agent_for(i).act(cur_.observations[static_cast<size_t>(i)],
                                              rng_act_[static_cast<size_t>(i)]);
            actions[static_cast<size_t>(i)] = a;
            rl::SegmentStep st;
            st.obs = cur_.observations[static_cast<size_t>(i)];
            st.action = a;
            st.logp_old = logp;
            st.advice_option = advice_[static_cast<size_t>(i)];
            segments_[static_cast<size_t>(i)].steps.push_back(std::move(st));
        }

        const envs::StepResult next = env_->step(actions);
        ++step_;
        ++ep_length_;

        for (int i = 0; i < n_; ++i) {
            rl::SegmentStep& st = segments_[static_cast<size_t>(i)].steps.back();
            st.reward = next.rewards[static_cast<size_t>(i)];
            st.done = next.done;
            ep_returns_[static_cast<size_t>(i)] += next.rewards[static_cast<size_t>(i)];
            if (advice_[static_cast<size_t>(i)] >= 0)
                ++ep_advice_counts_[{i, advice_[static_cast<size_t>(i)]}];
        }
        ep_catches_ += next.info.catches;
        ep_collisions_ += next.info.collisions;
        ep_dist_sum_ += next.info.mean_landmark_dist;
        if (trace_) trace_->step_rewards.push_back(next.rewards);

        if (advisor_) {
            if (advisor_->joint()) {
                auto* goa = static_cast<adv::GlobalOptionAdvisor*>(advisor_.get());
                rl::GlobalTransition gt;
                gt.state = cur_.state;
                gt.next_state = next.state;
                gt.actions = actions;
                for (double r : next.rewards) gt.team_reward += r;
                gt.joint_option = goa->active_joint();
                gt.done = next.done;
                advisor_->push_global(gt);
            } else {
                for (int i = 0; i < n_; ++i) {
                    rl::Transition tr;
                    tr.obs = cur_.observations[static_cast<size_t>(i)];
                    tr.next_obs = next.observations[static_cast<size_t>(i)];
                    tr.action = actions[static_cast<size_t>(i)];
                    tr.reward = next.rewards[static_cast<size_t>(i)];
                    tr.agent = i;
                    tr.done = next.done;
                    tr.option = advice_[static_cast<size_t>(i)];
                    advisor_->push_local(tr);
                }
            }
        }

        handle_termination(next);

        if (advisor_ && step_ % cfg_.advisor_every == 0) {
            const adv::AdvisorUpdateReport rep = advisor_->update(rng_advisor_);
            if (!rep.skipped) {
                last_advisor_report_ = rep;
                if (rep.target_synced)
                    trace_event({TraceEvent::Kind::TargetSync, step_, -1,
                                 static_cast<int>(rep.update_step)});
            }
        }

        if (step_ % cfg_.segment_len == 0) do_updates(next);

        if (next.done) {
            write_episode_record(step_);
            ++episode_idx_;
            need_reset = true;
        } else {
            cur_ = next;
        }
    }

    if (writer_) writer_->flush();

    if (!out_dir_.empty()) {
        nlohmann::ordered_json j;
        auto net_json = [](const nn::Mlp& net) {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const nn::ParamTensor* p : net.params()) arr.push_back(p->values);
            return arr;
        };
        nlohmann::ordered_json agents = nlohmann::ordered_json::array();
        for (int i = 0; i < (cfg_.share_params ? 1 : n_); ++i) {
            nlohmann::ordered_json a;
            a["policy"] = net_json(agents_[static_cast<size_t>(i)]->policy());
            a["value"] = net_json(agents_[static_cast<size_t>(i)]->value());
            agents.push_back(a);
        }
        j["agents"] = agents;
        std::ofstream out(fs::path(out_dir_) / "params.json", std::ios::binary);
        out << j.dump(2) << "\n";
    }
}

}  // namespace optlab::harness
