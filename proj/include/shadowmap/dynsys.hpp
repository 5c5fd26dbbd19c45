#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "shadowmap/rng.hpp"

namespace shadowmap::dynsys {

// Coupled logistic map family:
//   x_i[n+1] = x_i[n] * (r_i - r_i*x_i[n] - sum_{j!=i} B(i,j)*x_j[n])
// B(i,j) multiplies variable j inside variable i's update, i.e. a nonzero
// B(i,j) is a causal edge j -> i.
struct SystemSpec {
    Eigen::VectorXd r;            // growth rates, one per variable
    Eigen::MatrixXd coupling;     // B, zero diagonal

    int n_vars() const { return static_cast<int>(r.size()); }
    void validate() const;        // throws std::invalid_argument
};

struct Trajectory {
    Eigen::MatrixXd values;       // length x n_vars, all entries in [0,1]
    std::uint64_t seed = 0;
    SystemSpec spec;
    int burn_in = 0;
};

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    double dt = 0.01;
    int length = 5000;
};

Eigen::VectorXd step_coupled_logistic(const Eigen::VectorXd& state,
                                      const SystemSpec& spec);

// Iterates the map from an explicit initial state with no rejection; returns
// the final `length` rows, or an empty matrix (rows()==0) if any coordinate
// leaves [0,1] along the way.
Eigen::MatrixXd iterate(const SystemSpec& spec, const Eigen::VectorXd& init,
                        int length, int burn_in);

// U[0,1]^n initial conditions with rejection of trajectories that escape
// [0,1]; throws std::runtime_error after 1000 rejected initial conditions.
Trajectory simulate(const SystemSpec& spec, int length, int burn_in, Rng& rng);

// Classic Lorenz flow, fixed-step RK4. Throws if the state goes non-finite.
Trajectory lorenz(const LorenzParams& params, const Eigen::Vector3d& ic);

void write_trajectory_csv(const std::string& path, const Eigen::MatrixXd& values);

// Named parameter sets used throughout the experiments. Unidirectional
// coupling strength 0.32 and the bidirectional pair (0.25, 0.32) are this
// project's choices and are echoed into every report.
SystemSpec preset(const std::string& name);
std::vector<std::string> preset_names();

} // namespace shadowmap::dynsys
