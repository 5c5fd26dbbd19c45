#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shadowmap/ccm.hpp"
#include "shadowmap/csv.hpp"
#include "shadowmap/discover.hpp"
#include "shadowmap/dynsys.hpp"
#include "shadowmap/shadow.hpp"
#include "shadowmap/stats.hpp"
#include "shadowmap/surrogate.hpp"
#include "shadowmap/vision.hpp"

namespace {

using namespace shadowmap;

std::uint64_t env_seed_override(std::uint64_t seed) {
    const char* env = std::getenv("SHADOWMAP_SEED");
    if (!env || !*env)
        return seed;
    return std::strtoull(env, nullptr, 10);
}

dynsys::SystemSpec spec_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open spec file " + path);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(in);
    nlohmann::ordered_json wrapper;
    wrapper["system"] = j;
    discover::RunConfig cfg = discover::RunConfig::from_json(wrapper);
    if (!cfg.system.has_value())
        throw std::runtime_error("spec file missing r/coupling: " + path);
    return *cfg.system;
}

vision::SceneLayout layout_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open layout file " + path);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(in);
    vision::SceneLayout layout;
    layout.width = j.value("width", layout.width);
    layout.height = j.value("height", layout.height);
    layout.square_size = j.value("square_size", layout.square_size);
    for (const auto& obj : j.at("objects")) {
        vision::ObjectLayout o;
        o.row_center = obj.at("row_center").get<int>();
        o.range_min = obj.at("range_min").get<double>();
        o.range_max = obj.at("range_max").get<double>();
        layout.objects.push_back(o);
    }
    layout.validate();
    return layout;
}

void write_layout_json(const std::string& path, const vision::SceneLayout& layout) {
    nlohmann::ordered_json j;
    j["width"] = layout.width;
    j["height"] = layout.height;
    j["square_size"] = layout.square_size;
    j["objects"] = nlohmann::ordered_json::array();
    for (const auto& o : layout.objects)
        j["objects"].push_back({{"row_center", o.row_center},
                                {"range_min", o.range_min},
                                {"range_max", o.range_max}});
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write layout file " + path);
    out << j.dump(2) << '\n';
}

Eigen::MatrixXd load_series_csv(const std::string& path) {
    csv::Table table = csv::read(path);
    const Eigen::Index skip = !table.header.empty() && table.header[0] == "t" ? 1 : 0;
    return table.values.rightCols(table.values.cols() - skip);
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(std::stoi(item));
    return out;
}

int cmd_simulate(const std::string& preset, const std::string& spec_file,
                 int length, int burn_in, std::uint64_t seed, double dt,
                 const std::string& out) {
    Rng rng(env_seed_override(seed));
    Eigen::MatrixXd values;
    if (preset == "lorenz") {
        dynsys::LorenzParams params;
        params.dt = dt;
        params.length = length;
        values = dynsys::lorenz(params, {1.0, 1.0, 1.0}).values;
    } else {
        dynsys::SystemSpec spec =
            !spec_file.empty() ? spec_from_json_file(spec_file) : dynsys::preset(preset);
        values = dynsys::simulate(spec, length, burn_in, rng).values;
    }
    dynsys::write_trajectory_csv(out, values);
    std::cout << "wrote " << values.rows() << "x" << values.cols() << " trajectory to "
              << out << "\n";
    return 0;
}

int cmd_render(const std::string& in, const std::string& out_dir,
               const std::string& layout_file) {
    Eigen::MatrixXd traj = load_series_csv(in);
    vision::SceneLayout layout =
        !layout_file.empty() ? layout_from_json_file(layout_file)
                             : vision::SceneLayout::defaults(static_cast<int>(traj.cols()));
    std::vector<vision::Frame> frames = vision::render(traj, layout);
    vision::write_frames(out_dir, frames);
    write_layout_json((std::filesystem::path(out_dir) / "layout.json").string(), layout);
    std::cout << "wrote " << frames.size() << " frames to " << out_dir << "\n";
    return 0;
}

int cmd_track(const std::string& frames_dir, const std::string& layout_file,
              const std::string& out) {
    const std::string resolved_layout =
        !layout_file.empty()
            ? layout_file
            : (std::filesystem::path(frames_dir) / "layout.json").string();
    vision::SceneLayout layout = layout_from_json_file(resolved_layout);
    std::vector<vision::Frame> frames = vision::read_frames(frames_dir);
    Eigen::MatrixXd positions = vision::extract_positions(frames, layout);
    dynsys::write_trajectory_csv(out, positions);
    std::cout << "tracked " << positions.rows() << " frames, " << positions.cols()
              << " objects to " << out << "\n";
    return 0;
}

int cmd_embed(const std::string& in, int col, int p, int tau, const std::string& out) {
    Eigen::MatrixXd series = load_series_csv(in);
    if (col < 0 || col >= series.cols())
        throw std::runtime_error("embed: column out of range");
    shadow::ShadowManifold m = shadow::build_shadow(series.col(col), p, tau, col);
    shadow::write_manifold_csv(out, m);
    std::cout << "wrote " << m.points.rows() << "x" << m.p << " manifold to " << out
              << "\n";
    return 0;
}

int cmd_ccm(const std::string& in, int col_a, int col_b, int p, int tau,
            const std::string& lib_sizes, int draws, std::uint64_t seed,
            const std::string& out) {
    Eigen::MatrixXd series = load_series_csv(in);
    if (col_a == col_b || col_a < 0 || col_b < 0 || col_a >= series.cols() ||
        col_b >= series.cols())
        throw std::runtime_error("ccm: bad column selection");
    Rng rng(env_seed_override(seed));
    ccm::CrossMapResult result =
        ccm::ccm_pair(series.col(col_a), series.col(col_b), p, tau,
                      parse_int_list(lib_sizes), draws, rng);
    std::ofstream os(out);
    if (!os)
        throw std::runtime_error("ccm: cannot open " + out);
    const std::string name_a = "x" + std::to_string(col_a);
    const std::string name_b = "x" + std::to_string(col_b);
    os << "L,direction,rho\n";
    char buf[64];
    for (std::size_t i = 0; i < result.library_sizes.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", result.skill_ab[i]);
        os << result.library_sizes[i] << ',' << name_a << "->" << name_b << ',' << buf
           << '\n';
        std::snprintf(buf, sizeof(buf), "%.17g", result.skill_ba[i]);
        os << result.library_sizes[i] << ',' << name_b << "->" << name_a << ',' << buf
           << '\n';
    }
    std::cout << "converged " << name_a << "->" << name_b << ": "
              << (result.converged_ab ? "yes" : "no") << ", " << name_b << "->"
              << name_a << ": " << (result.converged_ba ? "yes" : "no") << "\n";
    return 0;
}

int cmd_surrogate(const std::string& in, std::uint64_t seed, int max_iterations,
                  double tolerance, const std::string& out) {
    Eigen::MatrixXd series = load_series_csv(in);
    surrogate::SurrogateConfig cfg;
    cfg.max_iterations = max_iterations;
    cfg.spectrum_tolerance = tolerance;
    Rng rng(env_seed_override(seed));
    for (Eigen::Index v = 0; v < series.cols(); ++v)
        series.col(v) = surrogate::iaaft(series.col(v), cfg, rng);
    dynsys::write_trajectory_csv(out, series);
    std::cout << "wrote surrogates to " << out << "\n";
    return 0;
}

int cmd_mirage(const std::string& preset, int length, int window, int stride,
               std::uint64_t seed, const std::string& out) {
    Rng rng(env_seed_override(seed));
    dynsys::Trajectory traj = dynsys::simulate(dynsys::preset(preset), length, 100, rng);
    std::vector<double> r =
        stats::windowed_correlation(traj.values.col(0), traj.values.col(1), window,
                                    stride);
    std::ofstream os(out);
    if (!os)
        throw std::runtime_error("mirage: cannot open " + out);
    os << "t_start,r\n";
    char buf[64];
    for (std::size_t i = 0; i < r.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", r[i]);
        os << i * static_cast<std::size_t>(stride) << ',' << buf << '\n';
    }
    std::cout << "wrote " << r.size() << " windows to " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"shadowmap: causal discovery for coupled dynamical systems via "
                 "neural shadow-mapping"};
    app.require_subcommand(1);

    // simulate
    std::string sim_preset = "fig1", sim_spec, sim_out;
    int sim_length = 1000, sim_burn_in = 100;
    std::uint64_t sim_seed = 0;
    double sim_dt = 0.01;
    auto* sim = app.add_subcommand("simulate", "generate a trajectory CSV");
    sim->add_option("--preset", sim_preset,
                    "named system (see --list-presets), or 'lorenz'");
    sim->add_option("--spec", sim_spec, "JSON file with r and coupling");
    sim->add_option("--length", sim_length);
    sim->add_option("--burn-in", sim_burn_in);
    sim->add_option("--seed", sim_seed);
    sim->add_option("--dt", sim_dt, "integration step for the lorenz preset");
    sim->add_option("--out", sim_out)->required();

    bool list_presets = false;
    sim->add_flag("--list-presets", list_presets);

    // render
    std::string ren_in, ren_out_dir, ren_layout;
    auto* ren = app.add_subcommand("render", "render a trajectory as PGM frames");
    ren->add_option("--in", ren_in)->required();
    ren->add_option("--out-dir", ren_out_dir)->required();
    ren->add_option("--layout", ren_layout, "layout JSON (default layout if omitted)");

    // track
    std::string trk_frames, trk_layout, trk_out;
    auto* trk = app.add_subcommand("track", "recover positions from PGM frames");
    trk->add_option("frames", trk_frames, "frame directory")->required();
    trk->add_option("--layout", trk_layout, "layout JSON (defaults to frames/layout.json)");
    trk->add_option("--out", trk_out)->required();

    // embed
    std::string emb_in, emb_out;
    int emb_col = 0, emb_p = 10, emb_tau = 1;
    auto* emb = app.add_subcommand("embed", "delay-embed one column into a manifold CSV");
    emb->add_option("--in", emb_in)->required();
    emb->add_option("--col", emb_col);
    emb->add_option("--p", emb_p);
    emb->add_option("--tau", emb_tau);
    emb->add_option("--out", emb_out)->required();

    // ccm
    std::string ccm_in, ccm_out, ccm_libs = "50,100,200,350,500";
    int ccm_a = 0, ccm_b = 1, ccm_p = 10, ccm_tau = 1, ccm_draws = 20;
    std::uint64_t ccm_seed = 0;
    auto* ccmc = app.add_subcommand("ccm", "convergent cross-mapping between two columns");
    ccmc->add_option("--in", ccm_in)->required();
    ccmc->add_option("--col-a", ccm_a);
    ccmc->add_option("--col-b", ccm_b);
    ccmc->add_option("--p", ccm_p);
    ccmc->add_option("--tau", ccm_tau);
    ccmc->add_option("--lib-sizes", ccm_libs, "comma-separated library sizes");
    ccmc->add_option("--draws", ccm_draws);
    ccmc->add_option("--seed", ccm_seed);
    ccmc->add_option("--out", ccm_out)->required();

    // surrogate
    std::string sur_in, sur_out;
    std::uint64_t sur_seed = 0;
    int sur_iters = 1000;
    double sur_tol = 1e-8;
    auto* sur = app.add_subcommand("surrogate", "IAAFT-surrogatize every column");
    sur->add_option("--in", sur_in)->required();
    sur->add_option("--seed", sur_seed);
    sur->add_option("--max-iterations", sur_iters);
    sur->add_option("--tolerance", sur_tol);
    sur->add_option("--out", sur_out)->required();

    // mirage
    std::string mir_preset = "fig1", mir_out;
    int mir_length = 1000, mir_window = 50, mir_stride = 1;
    std::uint64_t mir_seed = 0;
    auto* mir = app.add_subcommand("mirage", "windowed correlation demo CSV");
    mir->add_option("--preset", mir_preset);
    mir->add_option("--length", mir_length);
    mir->add_option("--window", mir_window);
    mir->add_option("--stride", mir_stride);
    mir->add_option("--seed", mir_seed);
    mir->add_option("--out", mir_out)->required();

    // discover
    std::string dis_config, dis_preset, dis_input_csv, dis_out_dir, dis_mode, dis_rule;
    std::uint64_t dis_seed = 0;
    bool dis_paper_scale = false;
    int dis_runs = -1, dis_workers = -1;
    long dis_iterations = -1;
    auto* dis = app.add_subcommand("discover", "run the full discovery protocol");
    dis->add_option("--config", dis_config, "RunConfig JSON file");
    dis->add_option("--preset", dis_preset, "named system (overrides config)");
    dis->add_option("--input-csv", dis_input_csv, "observed series CSV (overrides config)");
    dis->add_option("--out-dir", dis_out_dir);
    auto* seed_opt = dis->add_option("--seed", dis_seed);
    dis->add_option("--n-runs", dis_runs);
    dis->add_option("--iterations", dis_iterations);
    dis->add_option("--workers", dis_workers);
    dis->add_option("--mode", dis_mode, "timeseries | video");
    dis->add_option("--rule", dis_rule, "ks | threshold");
    dis->add_flag("--paper-scale", dis_paper_scale,
                  "N_r=100, iterations=3e5 (default is the desk profile: 30 / 2e4)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            if (list_presets) {
                for (const auto& name : dynsys::preset_names())
                    std::cout << name << "\n";
                std::cout << "lorenz\n";
                return 0;
            }
            return cmd_simulate(sim_preset, sim_spec, sim_length, sim_burn_in, sim_seed,
                                sim_dt, sim_out);
        }
        if (ren->parsed())
            return cmd_render(ren_in, ren_out_dir, ren_layout);
        if (trk->parsed())
            return cmd_track(trk_frames, trk_layout, trk_out);
        if (emb->parsed())
            return cmd_embed(emb_in, emb_col, emb_p, emb_tau, emb_out);
        if (ccmc->parsed())
            return cmd_ccm(ccm_in, ccm_a, ccm_b, ccm_p, ccm_tau, ccm_libs, ccm_draws,
                           ccm_seed, ccm_out);
        if (sur->parsed())
            return cmd_surrogate(sur_in, sur_seed, sur_iters, sur_tol, sur_out);
        if (mir->parsed())
            return cmd_mirage(mir_preset, mir_length, mir_window, mir_stride, mir_seed,
                              mir_out);
        if (dis->parsed()) {
            discover::RunConfig cfg;
            // desk profile by default; --paper-scale restores the paper protocol
            cfg.n_runs = dis_paper_scale ? 100 : 30;
            cfg.train.iterations = dis_paper_scale ? 300000 : 20000;
            if (!dis_config.empty()) {
                std::ifstream in(dis_config);
                if (!in)
                    throw std::runtime_error("cannot open config " + dis_config);
                nlohmann::ordered_json j = nlohmann::ordered_json::parse(in);
                // keep profile values unless the config sets them explicitly
                if (!j.contains("n_runs")) j["n_runs"] = cfg.n_runs;
                if (!j.contains("train")) j["train"] = nlohmann::ordered_json::object();
                if (!j["train"].contains("iterations"))
                    j["train"]["iterations"] = cfg.train.iterations;
                cfg = discover::RunConfig::from_json(j);
            }
            if (!dis_preset.empty()) {
                cfg.preset = dis_preset;
                cfg.system.reset();
                cfg.input_csv.clear();
            }
            if (!dis_input_csv.empty()) {
                cfg.input_csv = dis_input_csv;
                cfg.preset.clear();
                cfg.system.reset();
            }
            if (!dis_out_dir.empty()) cfg.out_dir = dis_out_dir;
            if (seed_opt->count() > 0) cfg.seed = dis_seed;
            if (dis_runs > 0) cfg.n_runs = dis_runs;
            if (dis_iterations >= 0) cfg.train.iterations = dis_iterations;
            if (dis_workers >= 0) cfg.workers = dis_workers;
            if (!dis_mode.empty())
                cfg.mode = dis_mode == "video" ? discover::PipelineMode::video
                                               : discover::PipelineMode::timeseries;
            if (!dis_rule.empty())
                cfg.rule = dis_rule == "threshold" ? discover::DecisionRule::threshold
                                                   : discover::DecisionRule::ks;
            cfg.seed = env_seed_override(cfg.seed);
            if (cfg.out_dir.empty()) cfg.out_dir = "out";

            discover::DiscoveryReport report = discover::discover(cfg);
            std::cout << "adjacency (rows=source):\n";
            for (const auto& row : report.adjacency) {
                for (std::size_t c = 0; c < row.size(); ++c)
                    std::cout << (c ? " " : "") << row[c];
                std::cout << "\n";
            }
            std::cout << "report: "
                      << (std::filesystem::path(cfg.out_dir) / "report.json").string()
                      << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
