#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shadowmap/dynsys.hpp"
#include "shadowmap/nsm.hpp"
#include "shadowmap/surrogate.hpp"

namespace shadowmap::discover {

enum class DecisionRule { ks, threshold };
enum class PipelineMode { timeseries, video };
enum class NullMode { iaaft, independent };

struct RunConfig {
    // exactly one data source
    std::string preset;
    std::optional<dynsys::SystemSpec> system;
    std::string input_csv;

    PipelineMode mode = PipelineMode::timeseries;
    int length = 1000;
    int burn_in = 100;
    nsm::TrainConfig train;
    surrogate::SurrogateConfig surrogate_cfg;
    double alpha = 0.01;
    double threshold = 0.25;
    DecisionRule rule = DecisionRule::ks;
    NullMode null_mode = NullMode::iaaft;
    bool ks_exact = false;
    int n_runs = 100;
    std::uint64_t seed = 0;
    int workers = 0;  // 0: hardware concurrency
    std::string out_dir;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::ordered_json& j);
};

struct EdgeReport {
    int source = 0;
    int target = 0;
    std::vector<double> beta_real;
    std::vector<double> beta_surrogate;
    double ks_d = 0.0;
    double p_value = 1.0;
    double mean_real = 0.0;
    double mean_surrogate = 0.0;
    bool present = false;
};

struct DiscoveryReport {
    RunConfig config;
    std::vector<std::string> var_names;
    std::vector<EdgeReport> edges;
    std::vector<std::vector<int>> adjacency;  // adjacency[source][target]
    std::vector<int> aborted_real;
    std::vector<int> aborted_surrogate;
    std::vector<std::string> abort_messages;
    std::string version;
    std::string started_utc;
    double wall_seconds = 0.0;

    nlohmann::ordered_json to_json() const;
};

// Runs n_runs NSM training runs on real data and n_runs on the surrogate
// null (IAAFT per variable, or independent re-simulation), applies the
// decision rule per directed edge, and assembles the report. Results are
// identical for any worker count; per-run seeds derive from (seed, index).
// Individual run failures are recorded; throws if more than 10% abort.
DiscoveryReport discover(const RunConfig& cfg);

// report.json plus betas.csv under out_dir.
void write_report(const DiscoveryReport& report, const std::string& out_dir);

std::vector<std::string> default_var_names(int n);

} // namespace shadowmap::discover
