#pragma once

#include <Eigen/Core>
#include <vector>

#include "shadowmap/rng.hpp"
#include "shadowmap/shadow.hpp"

namespace shadowmap::ccm {

// Simplex-projection cross-map: predicts target values from a random
// contiguous library of `library_size` points on m_source, using p+1
// exponentially weighted nearest neighbors per prediction time; returns the
// Pearson correlation between predictions and the actual target series.
// High skill predicting variable v from manifold M_w is evidence of an edge
// v -> w (the driven variable's manifold encodes the driver's history).
double cross_map(const shadow::ShadowManifold& m_source,
                 const Eigen::VectorXd& target_series, int library_size,
                 Rng& rng);

// Average over `draws` random library placements.
double cross_map_skill(const shadow::ShadowManifold& m_source,
                       const Eigen::VectorXd& target_series, int library_size,
                       int draws, Rng& rng);

struct ConvergenceParams {
    double min_gain = 0.1;   // skill(max L) - skill(min L)
    double min_final = 0.3;  // skill(max L)
};

// skills must follow strictly increasing library sizes, at least 4 of them.
bool convergence_test(const std::vector<double>& skills,
                      const ConvergenceParams& params = {});

struct CrossMapResult {
    std::vector<int> library_sizes;
    std::vector<double> skill_ab;  // edge a -> b: predicting a from M_b
    std::vector<double> skill_ba;  // edge b -> a: predicting b from M_a
    bool converged_ab = false;
    bool converged_ba = false;
};

CrossMapResult ccm_pair(const Eigen::VectorXd& series_a,
                        const Eigen::VectorXd& series_b, int p, int tau,
                        const std::vector<int>& library_sizes, int draws,
                        Rng& rng, const ConvergenceParams& params = {});

} // namespace shadowmap::ccm
