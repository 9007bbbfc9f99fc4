#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "optlab/harness/analysis.hpp"
#include "optlab/harness/cli.hpp"
#include "optlab/harness/config.hpp"
#include "optlab/harness/oracles.hpp"
#include "optlab/harness/trainer.hpp"

using namespace optlab;
using namespace optlab::harness;

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path p =
        fs::temp_directory_path() / ("optlab_test_" + tag + "_" + std::to_string(::getpid()) +
                                     "_" + std::to_string(counter++));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Small, fast run configuration on a 5x5 arena.
RunConfig tiny_config(const fs::path& dir, const std::string& advisor) {
    write_file(dir / "tiny.txt", "G   G\n     \n  P  \n     \n     \n");
    RunConfig cfg;
    cfg.scenario = "grid_pursuit";
    cfg.layout = (dir / "tiny.txt").string();
    cfg.advisor = advisor;
    cfg.seed = 5;
    cfg.total_steps = 384;
    cfg.segment_len = 16;
    cfg.hidden = {8};
    cfg.advisor_hidden = {8};
    cfg.sro_hidden = {8};
    cfg.embed_dim = 8;
    cfg.advisor_batch = 8;
    cfg.warmup = 64;
    cfg.replay_capacity = 4096;
    cfg.target_sync = 50;
    cfg.eps_anneal = 200;
    cfg.advisor_lr = 1e-3;
    return cfg;
}

int run_cli(std::vector<std::string> args) {
    std::vector<char*> argv;
    args.insert(args.begin(), "optlab");
    for (std::string& a : args) argv.push_back(a.data());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config: canonical serialization round-trips exactly") {
    const std::string text =
        "# a comment\n"
        "scenario = coop_nav\n"
        "advisor = sro   # trailing comment\n"
        "gamma = 0.97\n"
        "hidden = 32,32\n"
        "total_steps = 1e5\n"
        "share_params = true\n";
    const RunConfig cfg = parse_config_text(text);
    CHECK(cfg.scenario == "coop_nav");
    CHECK(cfg.advisor == "sro");
    CHECK(cfg.gamma == 0.97);
    CHECK(cfg.hidden == std::vector<int>{32, 32});
    CHECK(cfg.total_steps == 100000);
    CHECK(cfg.share_params);

    const std::string canon = canonical(cfg);
    const RunConfig reparsed = parse_config_text(canon);
    CHECK(canonical(reparsed) == canon);
    CHECK(reparsed.gamma == cfg.gamma);
    CHECK(reparsed.total_steps == cfg.total_steps);
}

TEST_CASE("config: unknown keys and malformed values are rejected") {
    CHECK_THROWS_WITH_AS(parse_config_text("bogus_key = 1\n"), doctest::Contains("unknown key"),
                         ConfigError);
    CHECK_THROWS_AS(parse_config_text("gamma = banana\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("total_steps = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("scenario = pong\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("gamma = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("eps_start = 0.01\n"), ConfigError);  // below eps_finish
    CHECK_THROWS_AS(parse_config_text("segment_len = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("this line has no equals\n"), ConfigError);
}

TEST_CASE("config: include mechanism layers presets, later keys override") {
    const fs::path dir = fresh_dir("include");
    write_file(dir / "base.cfg", "gamma = 0.9\nsegment_len = 16\n");
    write_file(dir / "main.cfg", "include base.cfg\nsegment_len = 8\nadvisor = loa\n");
    const RunConfig cfg = parse_config_file((dir / "main.cfg").string());
    CHECK(cfg.gamma == 0.9);
    CHECK(cfg.segment_len == 8);
    CHECK(cfg.advisor == "loa");
}

TEST_CASE("config: environment variables override file values") {
    const fs::path dir = fresh_dir("env");
    write_file(dir / "main.cfg", "gamma = 0.9\n");
    ::setenv("OPTLAB_gamma", "0.5", 1);
    const RunConfig cfg = parse_config_file((dir / "main.cfg").string());
    ::unsetenv("OPTLAB_gamma");
    CHECK(cfg.gamma == 0.5);
}

TEST_CASE("config: goa requires declared global-state access") {
    CHECK_THROWS_AS(parse_config_text("advisor = goa\nglobal_state_access = false\n"),
                    ConfigError);
    CHECK_NOTHROW(parse_config_text("advisor = goa\n"));
    CHECK_NOTHROW(parse_config_text("advisor = loa\nglobal_state_access = false\n"));
}

TEST_CASE("config: bundled presets parse cleanly") {
    for (const char* name :
         {"configs/grid_pursuit_9x9.cfg", "configs/grid_open_classic.cfg",
          "configs/grid_medium_classic.cfg", "configs/mpe_predator_prey.cfg",
          "configs/mpe_coop_nav.cfg"}) {
        const RunConfig cfg = parse_config_file(name);
        CHECK(cfg.total_steps > 0);
        if (cfg.scenario == "grid_pursuit") CHECK(fs::exists(cfg.layout_path()));
    }
}

TEST_CASE("oracle: single option reduces to policy evaluation at both beta extremes") {
    const Matrix p{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
    const std::vector<double> r{1.0, 0.0, -0.5};
    const double gamma = 0.9;
    const std::vector<double> v = value_iterate(p, r, gamma, 1e-13);

    for (double beta : {0.0, 1.0}) {
        TabularOptionModel model;
        model.gamma = gamma;
        model.p = {p};
        model.r = {r};
        model.beta = {{beta, beta, beta}};
        const auto q = option_value_iterate(model, 1e-12);
        for (int s = 0; s < 3; ++s)
            CHECK(q[0][static_cast<size_t>(s)] ==
                  doctest::Approx(v[static_cast<size_t>(s)]).epsilon(1e-9));
    }
}

TEST_CASE("oracle: matrix inverse and closed-form chain SR") {
    const Matrix p{{0, 1, 0}, {0, 0, 1}, {0, 0, 1}};
    const Matrix m = sr_matrix(p, 0.9);
    // Closed form: geometric occupancy of the absorbing chain.
    CHECK(m[0][0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m[0][1] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(m[0][2] == doctest::Approx(8.1).epsilon(1e-12));
    CHECK(m[1][2] == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(m[2][2] == doctest::Approx(10.0).epsilon(1e-12));

    // invert() sanity: A * A^-1 == I on a random well-conditioned matrix.
    Rng rng(31);
    Matrix a(4, std::vector<double>(4));
    for (auto& row : a)
        for (double& x : row) x = rng.uniform(-1, 1);
    for (int i = 0; i < 4; ++i) a[static_cast<size_t>(i)][static_cast<size_t>(i)] += 3.0;
    const Matrix inv = invert(a);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k)
                acc += a[static_cast<size_t>(i)][static_cast<size_t>(k)] *
                       inv[static_cast<size_t>(k)][static_cast<size_t>(j)];
            CHECK(acc == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
        }
}

TEST_CASE("oracle: refuses non-enumerable state-option spaces") {
    TabularOptionModel model;
    model.gamma = 0.9;
    const int n = 150;
    Matrix p(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)][static_cast<size_t>((i + 1) % n)] = 1.0;
    for (int w = 0; w < 80; ++w) {
        model.p.push_back(p);
        model.r.push_back(std::vector<double>(n, 0.0));
        model.beta.push_back(std::vector<double>(n, 0.5));
    }
    CHECK_THROWS_AS(option_value_iterate(model), ConfigError);
}

TEST_CASE("metrics: record lines round-trip through the reader") {
    const fs::path dir = fresh_dir("metrics");
    {
        MetricsWriter w((dir / "metrics.ndjson").string());
        EpisodeRecord e;
        e.episode = 3;
        e.end_step = 250;
        e.length = 100;
        e.returns = {1.5, -0.25};
        e.team_return = 1.25;
        e.catches = 1;
        e.option_switches = 7;
        e.advice = {{0, 1, 60}, {1, 0, 40}};
        e.f = 0.75;
        w.write(e);
        UpdateRecord u;
        u.update = 9;
        u.step = 288;
        u.critic_loss = 0.125;
        w.write(u);
    }
    const RunLog log = read_metrics((dir / "metrics.ndjson").string());
    REQUIRE(log.episodes.size() == 1);
    REQUIRE(log.updates.size() == 1);
    CHECK(log.episodes[0].returns == std::vector<double>{1.5, -0.25});
    CHECK(log.episodes[0].advice.size() == 2);
    CHECK(log.episodes[0].advice[0].count == 60);
    CHECK(log.updates[0].critic_loss == 0.125);
}

TEST_CASE("trainer: runs each advisor kind and honors the trace invariants") {
    for (const std::string advisor : {"none", "goa", "loa", "sro"}) {
        CAPTURE(advisor);
        const fs::path dir = fresh_dir("trainer_" + advisor);
        RunConfig cfg = tiny_config(dir, advisor);
        Trainer trainer(cfg, (dir / "out").string());
        TrainerTrace trace;
        trainer.set_trace(&trace);
        trainer.run();

        CHECK(!trainer.episodes().empty());
        CHECK(!trainer.updates().empty());
        CHECK(fs::exists(dir / "out" / "metrics.ndjson"));
        CHECK(fs::exists(dir / "out" / "config.cfg"));
        CHECK(fs::exists(dir / "out" / "params.json"));

        // Actor updates happen exactly on segment boundaries; target syncs
        // only at multiples of the sync interval.
        for (const TraceEvent& ev : trace.events) {
            if (ev.kind == TraceEvent::Kind::ActorUpdate) CHECK(ev.step % cfg.segment_len == 0);
            if (ev.kind == TraceEvent::Kind::TargetSync) CHECK(ev.option % cfg.target_sync == 0);
        }
        // Reward bookkeeping: per-step reward sums equal the episode records.
        size_t step_cursor = 0;
        for (const EpisodeRecord& ep : trainer.episodes()) {
            std::vector<double> sums(ep.returns.size(), 0.0);
            for (int j = 0; j < ep.length; ++j) {
                for (size_t i = 0; i < sums.size(); ++i)
                    sums[i] += trace.step_rewards[step_cursor][i];
                ++step_cursor;
            }
            CHECK(sums == ep.returns);
        }

        if (advisor != "none") {
            // No advice record ever points an agent at itself.
            for (const EpisodeRecord& ep : trainer.episodes())
                for (const AdviceCount& a : ep.advice) CHECK(a.agent != a.option);
            // Reselections mid-episode follow a true termination sample.
            for (size_t i = 0; i < trace.events.size(); ++i) {
                const TraceEvent& ev = trace.events[i];
                if (ev.kind != TraceEvent::Kind::Reselect) continue;
                bool at_reset = true;  // selections at episode starts have no sample
                for (size_t j = i; j-- > 0;) {
                    const TraceEvent& prev = trace.events[j];
                    if (prev.kind == TraceEvent::Kind::TerminationSample &&
                        prev.step == ev.step) {
                        at_reset = false;
                        CHECK(prev.sample_value);
                        break;
                    }
                    if (prev.step != ev.step || prev.kind == TraceEvent::Kind::ActorUpdate) break;
                }
                (void)at_reset;
            }
        }
    }
}

TEST_CASE("trainer: identical config and seed reproduce byte-identical metrics") {
    const fs::path dir = fresh_dir("determinism");
    RunConfig cfg = tiny_config(dir, "sro");
    Trainer(cfg, (dir / "a").string()).run();
    Trainer(cfg, (dir / "b").string()).run();
    const std::string a = read_file(dir / "a" / "metrics.ndjson");
    const std::string b = read_file(dir / "b" / "metrics.ndjson");
    CHECK(!a.empty());
    CHECK(a == b);
}

TEST_CASE("trainer: seeds change the trajectory") {
    const fs::path dir = fresh_dir("seeding");
    RunConfig cfg = tiny_config(dir, "none");
    Trainer(cfg, (dir / "a").string()).run();
    cfg.seed = 6;
    Trainer(cfg, (dir / "b").string()).run();
    CHECK(read_file(dir / "a" / "metrics.ndjson") != read_file(dir / "b" / "metrics.ndjson"));
}

TEST_CASE("compare: groups by advisor, computes medians, refuses mixed scenarios") {
    const fs::path dir = fresh_dir("compare");
    RunConfig cfg = tiny_config(dir, "none");
    Trainer(cfg, (dir / "s5").string()).run();
    cfg.seed = 6;
    Trainer(cfg, (dir / "s6").string()).run();

    // A run compared with itself: one group, two runs, IQR exactly 0.
    auto rows = compare_runs({(dir / "s5").string(), (dir / "s5").string()}, "team_return", 10);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].runs == 2);
    CHECK(rows[0].iqr == 0.0);

    rows = compare_runs({(dir / "s5").string(), (dir / "s6").string()}, "team_return", 10);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].iqr >= 0.0);
    const std::string table = compare_table(rows, "team_return");
    CHECK(table.find("grid_pursuit") != std::string::npos);

    // Mismatched scenarios are refused with an explanation.
    const fs::path nav_dir = dir / "nav";
    RunConfig nav = tiny_config(dir, "none");
    nav.scenario = "coop_nav";
    nav.total_steps = 128;
    Trainer(nav, nav_dir.string()).run();
    CHECK_THROWS_WITH_AS(
        compare_runs({(dir / "s5").string(), nav_dir.string()}, "team_return", 10),
        doctest::Contains("mismatched scenarios"), ConfigError);
}

TEST_CASE("plotdata: constant series stays flat; window=1 is the raw passthrough") {
    const fs::path dir = fresh_dir("plotdata");
    fs::create_directories(dir / "run");
    {
        MetricsWriter w((dir / "run" / "metrics.ndjson").string());
        for (int e = 0; e < 10; ++e) {
            EpisodeRecord r;
            r.episode = e;
            r.end_step = (e + 1) * 100;
            r.length = 100;
            r.returns = {2.0};
            r.team_return = 2.0;
            w.write(r);
        }
        write_file(dir / "run" / "config.cfg", canonical(RunConfig{}));
    }
    const std::string table = plotdata_table({(dir / "run").string()}, "team_return", 5, 100);
    std::istringstream in(table);
    std::string line;
    std::getline(in, line);  // header
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(line.find("\t2\t2") != std::string::npos);  // value and median both 2
        ++rows;
    }
    CHECK(rows == 10);

    // window=1 raw passthrough of a varying series.
    fs::create_directories(dir / "vary");
    {
        MetricsWriter w((dir / "vary" / "metrics.ndjson").string());
        for (int e = 0; e < 3; ++e) {
            EpisodeRecord r;
            r.episode = e;
            r.end_step = (e + 1) * 100;
            r.length = 100;
            r.returns = {static_cast<double>(e)};
            r.team_return = e;
            w.write(r);
        }
    }
    const Series raw = trailing_average(load_series((dir / "vary").string(), "team_return"), 1);
    CHECK(raw.values == std::vector<double>{0.0, 1.0, 2.0});
}

TEST_CASE("cli: run, compare, plotdata, and oracle subcommands work end to end") {
    const fs::path dir = fresh_dir("cli");
    write_file(dir / "tiny.txt", "G   G\n     \n  P  \n     \n     \n");
    write_file(dir / "run.cfg",
               "scenario = grid_pursuit\nlayout = tiny.txt\nadvisor = loa\n"
               "total_steps = 192\nsegment_len = 16\nhidden = 8\nadvisor_hidden = 8\n"
               "advisor_batch = 8\nwarmup = 32\nreplay_capacity = 1024\neps_anneal = 100\n");

    CHECK(run_cli({"run", "--config", (dir / "run.cfg").string(), "--seed", "3", "--out",
                   (dir / "r3").string()}) == 0);
    CHECK(run_cli({"run", "--config", (dir / "run.cfg").string(), "--seed", "4", "--out",
                   (dir / "r4").string()}) == 0);
    CHECK(fs::exists(dir / "r3" / "metrics.ndjson"));

    CHECK(run_cli({"compare", "--metric", "team_return", "--window", "5", (dir / "r3").string(),
                   (dir / "r4").string()}) == 0);
    CHECK(run_cli({"plotdata", "--metric", "team_return", "--window", "5", "--grid", "50",
                   "--out", (dir / "series.tsv").string(), (dir / "r3").string(),
                   (dir / "r4").string()}) == 0);
    CHECK(fs::exists(dir / "series.tsv"));

    write_file(dir / "model.json",
               R"({"gamma": 0.9, "options": [{"p": [[0,1],[1,0]], "r": [1.0,-0.5],)"
               R"( "beta": [0.3,0.3]}]})");
    CHECK(run_cli({"oracle", (dir / "model.json").string()}) == 0);
}

TEST_CASE("cli: sweep runs a seed range into disjoint directories") {
    const fs::path dir = fresh_dir("sweep");
    write_file(dir / "tiny.txt", "G   G\n     \n  P  \n     \n     \n");
    write_file(dir / "run.cfg",
               "scenario = grid_pursuit\nlayout = tiny.txt\nadvisor = none\n"
               "total_steps = 96\nsegment_len = 16\nhidden = 8\neps_anneal = 100\n");
    CHECK(run_cli({"sweep", "--config", (dir / "run.cfg").string(), "--seeds", "0..2", "--out",
                   (dir / "sweep").string()}) == 0);
    for (int s = 0; s <= 2; ++s)
        CHECK(fs::exists(dir / "sweep" / ("seed_" + std::to_string(s)) / "metrics.ndjson"));
}

TEST_CASE("cli: a failing run writes a serialized error record and exits nonzero") {
    const fs::path dir = fresh_dir("cli_err");
    write_file(dir / "bad.cfg", "scenario = grid_pursuit\nlayout = missing_layout.txt\n");
    CHECK(run_cli({"run", "--config", (dir / "bad.cfg").string(), "--out",
                   (dir / "out").string()}) != 0);
    CHECK(fs::exists(dir / "out" / "error.json"));
}
