#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "shadowmap/csv.hpp"
#include "shadowmap/discover.hpp"

using namespace shadowmap;
namespace fs = std::filesystem;

namespace {

discover::RunConfig tiny_config(const std::string& preset) {
    discover::RunConfig cfg;
    cfg.preset = preset;
    cfg.length = 220;
    cfg.burn_in = 100;
    cfg.n_runs = 4;
    cfg.seed = 321;
    cfg.train.iterations = 40;
    cfg.train.generations_per_run = 2;
    cfg.train.p = 5;
    cfg.train.k = 4;
    cfg.train.embed_dim = 3;
    cfg.train.encoder_hidden = {8, 6};
    cfg.train.decoder_hidden = {6, 8};
    return cfg;
}

nlohmann::ordered_json strip_timing(nlohmann::ordered_json j) {
    j.erase("timing");
    return j;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SHADOWMAP_CLI_PATH) + " " + args;
    return std::system(cmd.c_str());
}

} // namespace

TEST_CASE("discover: runs end to end and fills the report") {
    discover::RunConfig cfg = tiny_config("table1-indep");
    discover::DiscoveryReport report = discover::discover(cfg);
    CHECK(report.var_names == std::vector<std::string>{"X", "Y"});
    REQUIRE(report.edges.size() == 2);
    for (const auto& e : report.edges) {
        CHECK(e.beta_real.size() == 4);
        CHECK(e.beta_surrogate.size() == 4);
        CHECK(e.p_value >= 0.0);
        CHECK(e.p_value <= 1.0);
    }
    CHECK(report.adjacency.size() == 2);
    CHECK(report.wall_seconds > 0.0);
}

TEST_CASE("discover: identical reports at worker counts 1 and 8") {
    discover::RunConfig a = tiny_config("table1-bidir");
    a.workers = 1;
    discover::RunConfig b = a;
    b.workers = 8;
    nlohmann::ordered_json ja = strip_timing(discover::discover(a).to_json());
    nlohmann::ordered_json jb = strip_timing(discover::discover(b).to_json());
    // worker count is part of the echoed config; align it before comparing
    ja["config"].erase("workers");
    jb["config"].erase("workers");
    CHECK(ja == jb);
}

TEST_CASE("discover: video mode matches variable count and produces decisions") {
    discover::RunConfig cfg = tiny_config("table1-indep");
    cfg.mode = discover::PipelineMode::video;
    discover::DiscoveryReport report = discover::discover(cfg);
    CHECK(report.edges.size() == 2);
}

TEST_CASE("discover: threshold rule follows mean betas") {
    discover::RunConfig cfg = tiny_config("table1-indep");
    cfg.rule = discover::DecisionRule::threshold;
    cfg.threshold = 0.25;
    discover::DiscoveryReport report = discover::discover(cfg);
    for (const auto& e : report.edges)
        CHECK(e.present == (e.mean_real > 0.25));
}

TEST_CASE("discover: independent null mode works on simulated systems only") {
    discover::RunConfig cfg = tiny_config("table1-indep");
    cfg.null_mode = discover::NullMode::independent;
    discover::DiscoveryReport report = discover::discover(cfg);
    CHECK(report.edges.size() == 2);

    discover::RunConfig bad = cfg;
    bad.preset.clear();
    bad.input_csv = "whatever.csv";
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("discover: CSV input path with a time column") {
    Rng rng(5);
    dynsys::Trajectory traj =
        dynsys::simulate(dynsys::preset("table1-indep"), 220, 100, rng);
    const std::string path = "test_discover_input.csv";
    dynsys::write_trajectory_csv(path, traj.values);

    discover::RunConfig cfg = tiny_config("");
    cfg.preset.clear();
    cfg.input_csv = path;
    discover::DiscoveryReport report = discover::discover(cfg);
    CHECK(report.edges.size() == 2);
    fs::remove(path);
}

TEST_CASE("config validation: exactly one data source, sane alpha") {
    discover::RunConfig cfg = tiny_config("fig1");
    cfg.input_csv = "extra.csv";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config("fig1");
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config("");
    cfg.preset.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("config JSON round-trip preserves every field") {
    discover::RunConfig cfg = tiny_config("table1-xy");
    cfg.alpha = 0.02;
    cfg.threshold = 0.3;
    cfg.rule = discover::DecisionRule::threshold;
    cfg.null_mode = discover::NullMode::independent;
    cfg.ks_exact = true;
    cfg.workers = 3;
    cfg.mode = discover::PipelineMode::video;
    discover::RunConfig back = discover::RunConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("report JSON echoes the full resolved config including defaults") {
    discover::RunConfig cfg = tiny_config("table1-indep");
    discover::DiscoveryReport report = discover::discover(cfg);
    nlohmann::ordered_json j = report.to_json();
    CHECK(j["config"]["train"]["lr"] == 3e-4);
    CHECK(j["config"]["train"]["theiler"] == 5);  // defaulted to p
    CHECK(j["config"]["alpha"] == 0.01);
    CHECK(j["config"]["rule"] == "ks");
    CHECK(j["seed"] == 321);
    CHECK(j.contains("timing"));
    CHECK(j["runs"]["total"] == 8);
}

TEST_CASE("write_report produces report.json and betas.csv") {
    discover::RunConfig cfg = tiny_config("table1-indep");
    cfg.out_dir = "test_discover_out";
    discover::DiscoveryReport report = discover::discover(cfg);
    CHECK(fs::exists("test_discover_out/report.json"));
    CHECK(fs::exists("test_discover_out/betas.csv"));
    std::ifstream in("test_discover_out/report.json");
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(in);
    CHECK(j["adjacency"] == nlohmann::ordered_json(report.adjacency));
    fs::remove_all("test_discover_out");
}

TEST_CASE("cli: simulate writes the documented schema") {
    REQUIRE(run_cli("simulate --preset fig1 --length 120 --seed 7 "
                    "--out test_cli_traj.csv") == 0);
    csv::Table t = csv::read("test_cli_traj.csv");
    CHECK(t.header == std::vector<std::string>{"t", "x0", "x1"});
    CHECK(t.values.rows() == 120);
    fs::remove("test_cli_traj.csv");
}

TEST_CASE("cli: unknown flags exit nonzero") {
    CHECK(run_cli("simulate --no-such-flag 2>/dev/null") != 0);
    CHECK(run_cli("definitely-not-a-subcommand 2>/dev/null") != 0);
}

TEST_CASE("cli: mirage emits t_start,r rows") {
    REQUIRE(run_cli("mirage --preset fig1 --length 300 --window 50 --seed 3 "
                    "--out test_cli_mirage.csv") == 0);
    csv::Table t = csv::read("test_cli_mirage.csv");
    CHECK(t.header == std::vector<std::string>{"t_start", "r"});
    CHECK(t.values.rows() == 251);
    fs::remove("test_cli_mirage.csv");
}

TEST_CASE("cli: render/track round-trip stays within the quantization bound") {
    REQUIRE(run_cli("simulate --preset table1-indep --length 40 --seed 11 "
                    "--out test_cli_rt.csv") == 0);
    REQUIRE(run_cli("render --in test_cli_rt.csv --out-dir test_cli_frames") == 0);
    REQUIRE(run_cli("track test_cli_frames --out test_cli_pos.csv") == 0);
    csv::Table traj = csv::read("test_cli_rt.csv");
    csv::Table pos = csv::read("test_cli_pos.csv");
    REQUIRE(pos.values.rows() == traj.values.rows());
    const double bound = 0.5 / 56.0 + 1e-12;  // default 64px layout, size-8 squares
    CHECK((pos.values.rightCols(2) - traj.values.rightCols(2)).cwiseAbs().maxCoeff() <=
          bound);
    fs::remove("test_cli_rt.csv");
    fs::remove("test_cli_pos.csv");
    fs::remove_all("test_cli_frames");
}

TEST_CASE("cli: discover smoke run writes a report and echoes adjacency") {
    std::ofstream cfg("test_cli_cfg.json");
    cfg << R"({"preset":"table1-indep","length":220,"n_runs":3,"seed":5,
               "train":{"iterations":30,"generations_per_run":2,"p":5,"k":4,
                        "embed_dim":3,"encoder_hidden":[8,6],"decoder_hidden":[6,8]}})";
    cfg.close();
    REQUIRE(run_cli("discover --config test_cli_cfg.json --out-dir test_cli_out") == 0);
    CHECK(fs::exists("test_cli_out/report.json"));
    fs::remove("test_cli_cfg.json");
    fs::remove_all("test_cli_out");
}

TEST_CASE("cli: SHADOWMAP_SEED environment variable overrides the seed") {
    std::ofstream cfg("test_cli_seed_cfg.json");
    cfg << R"({"preset":"table1-indep","length":220,"n_runs":2,"seed":5,
               "train":{"iterations":20,"generations_per_run":2,"p":5,"k":4,
                        "embed_dim":3,"encoder_hidden":[8,6],"decoder_hidden":[6,8]}})";
    cfg.close();
    REQUIRE(run_cli("discover --config test_cli_seed_cfg.json "
                    "--out-dir test_cli_seed_a") == 0);
    setenv("SHADOWMAP_SEED", "999", 1);
    REQUIRE(run_cli("discover --config test_cli_seed_cfg.json "
                    "--out-dir test_cli_seed_b") == 0);
    unsetenv("SHADOWMAP_SEED");
    std::ifstream ina("test_cli_seed_a/report.json"), inb("test_cli_seed_b/report.json");
    nlohmann::ordered_json ja = nlohmann::ordered_json::parse(ina);
    nlohmann::ordered_json jb = nlohmann::ordered_json::parse(inb);
    CHECK(ja["seed"] == 5);
    CHECK(jb["seed"] == 999);
    CHECK(ja["edges"] != jb["edges"]);
    fs::remove("test_cli_seed_cfg.json");
    fs::remove_all("test_cli_seed_a");
    fs::remove_all("test_cli_seed_b");
}
