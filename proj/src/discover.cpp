#include "shadowmap/discover.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "shadowmap/csv.hpp"
#include "shadowmap/stats.hpp"
#include "shadowmap/vision.hpp"

namespace shadowmap::discover {

namespace {

const char* rule_name(DecisionRule r) {
    return r == DecisionRule::ks ? "ks" : "threshold";
}
const char* mode_name(PipelineMode m) {
    return m == PipelineMode::timeseries ? "timeseries" : "video";
}
const char* null_name(NullMode m) {
    return m == NullMode::iaaft ? "iaaft" : "independent";
}

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

} // namespace

void RunConfig::validate() const {
    int sources = 0;
    if (!preset.empty()) ++sources;
    if (system.has_value()) ++sources;
    if (!input_csv.empty()) ++sources;
    if (sources != 1)
        throw std::invalid_argument("RunConfig: exactly one data source required "
                                    "(preset, system, or input_csv)");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("RunConfig: alpha must be in (0,1)");
    if (n_runs < 1)
        throw std::invalid_argument("RunConfig: n_runs must be >= 1");
    if (length < 1 || burn_in < 0)
        throw std::invalid_argument("RunConfig: bad length/burn_in");
    if (!input_csv.empty() && null_mode == NullMode::independent)
        throw std::invalid_argument(
            "RunConfig: independent null mode needs a simulated system");
    train.validate();
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    if (!preset.empty()) j["preset"] = preset;
    if (system.has_value()) {
        nlohmann::ordered_json s;
        s["r"] = std::vector<double>(system->r.data(),
                                     system->r.data() + system->r.size());
        std::vector<std::vector<double>> b;
        for (int i = 0; i < system->n_vars(); ++i) {
            b.emplace_back();
            for (int k = 0; k < system->n_vars(); ++k)
                b.back().push_back(system->coupling(i, k));
        }
        s["coupling"] = b;
        j["system"] = s;
    }
    if (!input_csv.empty()) j["input_csv"] = input_csv;
    j["mode"] = mode_name(mode);
    j["length"] = length;
    j["burn_in"] = burn_in;
    j["train"] = {{"batch_size", train.batch_size},
                  {"iterations", train.iterations},
                  {"lr", train.lr},
                  {"embed_dim", train.embed_dim},
                  {"p", train.p},
                  {"tau", train.tau},
                  {"k", train.k},
                  {"theiler", train.effective_theiler()},
                  {"generations_per_run", train.generations_per_run},
                  {"encoders_per_pair", train.encoders_per_pair},
                  {"encoder_hidden", train.encoder_hidden},
                  {"decoder_hidden", train.decoder_hidden}};
    j["surrogate"] = {{"max_iterations", surrogate_cfg.max_iterations},
                      {"spectrum_tolerance", surrogate_cfg.spectrum_tolerance}};
    j["alpha"] = alpha;
    j["threshold"] = threshold;
    j["rule"] = rule_name(rule);
    j["null_mode"] = null_name(null_mode);
    j["ks_exact"] = ks_exact;
    j["n_runs"] = n_runs;
    j["seed"] = seed;
    j["workers"] = workers;
    if (!out_dir.empty()) j["out_dir"] = out_dir;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::ordered_json& j) {
    RunConfig cfg;
    cfg.preset = j.value("preset", std::string());
    if (j.contains("system")) {
        dynsys::SystemSpec spec;
        const auto& s = j.at("system");
        std::vector<double> r = s.at("r").get<std::vector<double>>();
        spec.r = Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
        auto rows = s.at("coupling").get<std::vector<std::vector<double>>>();
        spec.coupling.resize(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.size())
                throw std::invalid_argument("RunConfig: coupling must be square");
            for (std::size_t k = 0; k < rows[i].size(); ++k)
                spec.coupling(static_cast<Eigen::Index>(i),
                              static_cast<Eigen::Index>(k)) = rows[i][k];
        }
        cfg.system = spec;
    }
    cfg.input_csv = j.value("input_csv", std::string());
    const std::string mode = j.value("mode", "timeseries");
    if (mode == "timeseries") cfg.mode = PipelineMode::timeseries;
    else if (mode == "video") cfg.mode = PipelineMode::video;
    else throw std::invalid_argument("RunConfig: unknown mode " + mode);
    cfg.length = j.value("length", cfg.length);
    cfg.burn_in = j.value("burn_in", cfg.burn_in);
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.iterations = t.value("iterations", cfg.train.iterations);
        cfg.train.lr = t.value("lr", cfg.train.lr);
        cfg.train.embed_dim = t.value("embed_dim", cfg.train.embed_dim);
        cfg.train.p = t.value("p", cfg.train.p);
        cfg.train.tau = t.value("tau", cfg.train.tau);
        cfg.train.k = t.value("k", cfg.train.k);
        cfg.train.theiler = t.value("theiler", cfg.train.theiler);
        cfg.train.generations_per_run =
            t.value("generations_per_run", cfg.train.generations_per_run);
        cfg.train.encoders_per_pair =
            t.value("encoders_per_pair", cfg.train.encoders_per_pair);
        cfg.train.encoder_hidden =
            t.value("encoder_hidden", cfg.train.encoder_hidden);
        cfg.train.decoder_hidden =
            t.value("decoder_hidden", cfg.train.decoder_hidden);
    }
    if (j.contains("surrogate")) {
        const auto& s = j.at("surrogate");
        cfg.surrogate_cfg.max_iterations =
            s.value("max_iterations", cfg.surrogate_cfg.max_iterations);
        cfg.surrogate_cfg.spectrum_tolerance =
            s.value("spectrum_tolerance", cfg.surrogate_cfg.spectrum_tolerance);
    }
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.threshold = j.value("threshold", cfg.threshold);
    const std::string rule = j.value("rule", "ks");
    if (rule == "ks") cfg.rule = DecisionRule::ks;
    else if (rule == "threshold") cfg.rule = DecisionRule::threshold;
    else throw std::invalid_argument("RunConfig: unknown rule " + rule);
    const std::string null_mode = j.value("null_mode", "iaaft");
    if (null_mode == "iaaft") cfg.null_mode = NullMode::iaaft;
    else if (null_mode == "independent") cfg.null_mode = NullMode::independent;
    else throw std::invalid_argument("RunConfig: unknown null_mode " + null_mode);
    cfg.ks_exact = j.value("ks_exact", cfg.ks_exact);
    cfg.n_runs = j.value("n_runs", cfg.n_runs);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    return cfg;
}

std::vector<std::string> default_var_names(int n) {
    if (n <= 3) {
        const std::vector<std::string> xyz{"X", "Y", "Z"};
        return {xyz.begin(), xyz.begin() + n};
    }
    std::vector<std::string> names;
    for (int i = 1; i <= n; ++i)
        names.push_back("X" + std::to_string(i));
    return names;
}

namespace {

struct TaskSetup {
    const RunConfig* cfg = nullptr;
    std::optional<dynsys::SystemSpec> spec;       // empty for CSV input
    std::optional<dynsys::SystemSpec> indep_spec; // zero-coupling variant
    Eigen::MatrixXd csv_data;
    std::optional<vision::SceneLayout> layout;    // video mode
    int n_vars = 0;
};

Eigen::MatrixXd observed_series(const TaskSetup& setup, Rng& rng) {
    if (!setup.spec.has_value())
        return setup.csv_data;
    dynsys::Trajectory traj = dynsys::simulate(*setup.spec, setup.cfg->length,
                                               setup.cfg->burn_in, rng);
    if (setup.cfg->mode == PipelineMode::video)
        return vision::extract_positions(vision::render(traj.values, *setup.layout),
                                         *setup.layout);
    return traj.values;
}

nsm::DataSource make_source(const TaskSetup& setup, bool surrogate_run) {
    const RunConfig& cfg = *setup.cfg;
    if (!surrogate_run)
        return [&setup](int, Rng& rng) { return observed_series(setup, rng); };

    if (cfg.null_mode == NullMode::independent) {
        return [&setup](int, Rng& rng) {
            dynsys::Trajectory traj = dynsys::simulate(
                *setup.indep_spec, setup.cfg->length, setup.cfg->burn_in, rng);
            if (setup.cfg->mode == PipelineMode::video)
                return vision::extract_positions(
                    vision::render(traj.values, *setup.layout), *setup.layout);
            return traj.values;
        };
    }
    return [&setup](int, Rng& rng) {
        Eigen::MatrixXd series = observed_series(setup, rng);
        for (Eigen::Index v = 0; v < series.cols(); ++v)
            series.col(v) = surrogate::iaaft(series.col(v),
                                             setup.cfg->surrogate_cfg, rng);
        return series;
    };
}

} // namespace

DiscoveryReport discover(const RunConfig& cfg) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    TaskSetup setup;
    setup.cfg = &cfg;
    if (!cfg.preset.empty())
        setup.spec = dynsys::preset(cfg.preset);
    else if (cfg.system.has_value())
        setup.spec = *cfg.system;
    if (setup.spec.has_value()) {
        setup.spec->validate();
        setup.n_vars = setup.spec->n_vars();
        dynsys::SystemSpec indep = *setup.spec;
        indep.coupling.setZero();
        setup.indep_spec = indep;
    } else {
        csv::Table table = csv::read(cfg.input_csv);
        // drop a leading time column if present
        Eigen::Index first_col = table.header.empty() || table.header[0] != "t" ? 0 : 1;
        setup.csv_data = table.values.rightCols(table.values.cols() - first_col);
        setup.n_vars = static_cast<int>(setup.csv_data.cols());
    }
    if (cfg.mode == PipelineMode::video)
        setup.layout = vision::SceneLayout::defaults(setup.n_vars);
    if (setup.n_vars < 2)
        throw std::invalid_argument("discover: need at least two variables");

    DiscoveryReport report;
    report.config = cfg;
    report.var_names = default_var_names(setup.n_vars);
    report.version = SHADOWMAP_VERSION;
    report.started_utc = utc_now();

    const int total_tasks = 2 * cfg.n_runs;
    std::vector<std::optional<Eigen::MatrixXd>> betas(
        static_cast<std::size_t>(total_tasks));
    std::vector<std::string> errors(static_cast<std::size_t>(total_tasks));

    auto run_task = [&](int t) {
        const bool surr = t >= cfg.n_runs;
        const int run_index = surr ? t - cfg.n_runs : t;
        const std::uint64_t run_seed = derive_seed(
            cfg.seed, (surr ? 0x53000000ULL : 0x42000000ULL) +
                          static_cast<std::uint64_t>(run_index));
        nsm::DataSource source = make_source(setup, surr);
        betas[static_cast<std::size_t>(t)] =
            nsm::train_run(cfg.train, setup.n_vars, source, run_seed).beta;
    };

    int workers = cfg.workers > 0
                      ? cfg.workers
                      : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min(workers, total_tasks);

    std::atomic<int> next{0};
    auto drain = [&] {
        for (int t = next.fetch_add(1); t < total_tasks; t = next.fetch_add(1)) {
            try {
                run_task(t);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(t)] = e.what();
            }
        }
    };
    if (workers == 1) {
        drain();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(drain);
        for (auto& th : pool)
            th.join();
    }

    int aborts = 0;
    for (int t = 0; t < total_tasks; ++t) {
        if (betas[static_cast<std::size_t>(t)].has_value())
            continue;
        ++aborts;
        const bool surr = t >= cfg.n_runs;
        const int run_index = surr ? t - cfg.n_runs : t;
        (surr ? report.aborted_surrogate : report.aborted_real).push_back(run_index);
        report.abort_messages.push_back(errors[static_cast<std::size_t>(t)]);
    }
    if (aborts * 10 > total_tasks)
        throw std::runtime_error("discover: " + std::to_string(aborts) + " of " +
                                 std::to_string(total_tasks) +
                                 " runs aborted (over 10%); first error: " +
                                 report.abort_messages.front());

    const int n = setup.n_vars;
    report.adjacency.assign(static_cast<std::size_t>(n), std::vector<int>(n, 0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            EdgeReport edge;
            edge.source = i;
            edge.target = j;
            for (int t = 0; t < total_tasks; ++t) {
                if (!betas[static_cast<std::size_t>(t)].has_value())
                    continue;
                const double b = (*betas[static_cast<std::size_t>(t)])(i, j);
                (t < cfg.n_runs ? edge.beta_real : edge.beta_surrogate).push_back(b);
            }
            stats::KsResult ks = stats::ks_one_sided(edge.beta_real, edge.beta_surrogate);
            edge.ks_d = ks.statistic;
            edge.p_value = cfg.ks_exact
                               ? stats::ks_exact_p(ks.n1, ks.n2, ks.statistic)
                               : ks.p_value;
            for (double b : edge.beta_real) edge.mean_real += b;
            edge.mean_real /= static_cast<double>(edge.beta_real.size());
            for (double b : edge.beta_surrogate) edge.mean_surrogate += b;
            edge.mean_surrogate /= static_cast<double>(edge.beta_surrogate.size());
            edge.present = cfg.rule == DecisionRule::ks
                               ? edge.p_value < cfg.alpha
                               : edge.mean_real > cfg.threshold;
            report.adjacency[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                edge.present ? 1 : 0;
            report.edges.push_back(std::move(edge));
        }
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    if (!cfg.out_dir.empty())
        write_report(report, cfg.out_dir);
    return report;
}

nlohmann::ordered_json DiscoveryReport::to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["seed"] = config.seed;
    j["config"] = config.to_json();
    j["var_names"] = var_names;
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : edges) {
        nlohmann::ordered_json je;
        je["source"] = var_names[static_cast<std::size_t>(e.source)];
        je["target"] = var_names[static_cast<std::size_t>(e.target)];
        je["beta_real"] = e.beta_real;
        je["beta_surrogate"] = e.beta_surrogate;
        je["ks_d"] = e.ks_d;
        je["p_value"] = e.p_value;
        je["mean_real"] = e.mean_real;
        je["mean_surrogate"] = e.mean_surrogate;
        je["present"] = e.present;
        j["edges"].push_back(je);
    }
    j["adjacency"] = adjacency;
    j["runs"] = {{"total", 2 * config.n_runs},
                 {"aborted_real", aborted_real},
                 {"aborted_surrogate", aborted_surrogate},
                 {"abort_messages", abort_messages}};
    j["timing"] = {{"started_utc", started_utc}, {"wall_seconds", wall_seconds}};
    return j;
}

void write_report(const DiscoveryReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);
    {
        std::ofstream out(dir / "report.json");
        if (!out)
            throw std::runtime_error("write_report: cannot open report.json");
        out << report.to_json().dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "betas.csv");
        if (!out)
            throw std::runtime_error("write_report: cannot open betas.csv");
        out << "source,target,kind,run,beta\n";
        char buf[64];
        for (const auto& e : report.edges) {
            for (std::size_t r = 0; r < e.beta_real.size(); ++r) {
                std::snprintf(buf, sizeof(buf), "%.17g", e.beta_real[r]);
                out << report.var_names[static_cast<std::size_t>(e.source)] << ','
                    << report.var_names[static_cast<std::size_t>(e.target)]
                    << ",real," << r << ',' << buf << '\n';
            }
            for (std::size_t r = 0; r < e.beta_surrogate.size(); ++r) {
                std::snprintf(buf, sizeof(buf), "%.17g", e.beta_surrogate[r]);
                out << report.var_names[static_cast<std::size_t>(e.source)] << ','
                    << report.var_names[static_cast<std::size_t>(e.target)]
                    << ",surrogate," << r << ',' << buf << '\n';
            }
        }
    }
}

} // namespace shadowmap::discover
