#include "shadowmap/ccm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "shadowmap/stats.hpp"

namespace shadowmap::ccm {

double cross_map(const shadow::ShadowManifold& m_source,
                 const Eigen::VectorXd& target_series, int library_size,
                 Rng& rng) {
    const int N = static_cast<int>(m_source.points.rows());
    const int n_neighbors = m_source.p + 1;
    if (library_size > N)
        throw std::invalid_argument("cross_map: library larger than manifold");
    if (library_size <= m_source.p + 2)
        throw std::invalid_argument("cross_map: library must exceed p+2");
    if (target_series.size() < N)
        throw std::invalid_argument("cross_map: target series shorter than manifold");

    const int lib_start = static_cast<int>(rng.uniform_index(
        static_cast<std::size_t>(N - library_size) + 1));

    Eigen::VectorXd predicted(N);
    Eigen::VectorXd actual(N);
    std::vector<std::pair<double, int>> dist;
    dist.reserve(static_cast<std::size_t>(library_size));
    std::vector<double> weights(static_cast<std::size_t>(n_neighbors));
    for (int t = 0; t < N; ++t) {
        dist.clear();
        for (int l = lib_start; l < lib_start + library_size; ++l) {
            if (l == t) continue;  // never predict a point from itself
            const double d2 =
                (m_source.points.row(l) - m_source.points.row(t)).squaredNorm();
            dist.emplace_back(d2, l);
        }
        std::partial_sort(dist.begin(), dist.begin() + n_neighbors, dist.end());

        const double d1 = std::sqrt(dist[0].first);
        double wsum = 0.0;
        for (int i = 0; i < n_neighbors; ++i) {
            const double di = std::sqrt(dist[static_cast<std::size_t>(i)].first);
            // d1 == 0: all weight on the exact matches
            weights[static_cast<std::size_t>(i)] =
                d1 > 0.0 ? std::exp(-di / d1) : (di == 0.0 ? 1.0 : 0.0);
            wsum += weights[static_cast<std::size_t>(i)];
        }
        double pred = 0.0;
        for (int i = 0; i < n_neighbors; ++i)
            pred += (weights[static_cast<std::size_t>(i)] / wsum) *
                    target_series[dist[static_cast<std::size_t>(i)].second];
        predicted[t] = pred;
        actual[t] = target_series[t];
    }
    return stats::pearson(predicted, actual);
}

double cross_map_skill(const shadow::ShadowManifold& m_source,
                       const Eigen::VectorXd& target_series, int library_size,
                       int draws, Rng& rng) {
    if (draws < 1)
        throw std::invalid_argument("cross_map_skill: draws must be >= 1");
    double sum = 0.0;
    for (int d = 0; d < draws; ++d)
        sum += cross_map(m_source, target_series, library_size, rng);
    return sum / draws;
}

bool convergence_test(const std::vector<double>& skills,
                      const ConvergenceParams& params) {
    if (skills.size() < 4)
        throw std::invalid_argument("convergence_test: need at least 4 library sizes");
    const double gain = skills.back() - skills.front();
    return gain >= params.min_gain && skills.back() >= params.min_final;
}

CrossMapResult ccm_pair(const Eigen::VectorXd& series_a,
                        const Eigen::VectorXd& series_b, int p, int tau,
                        const std::vector<int>& library_sizes, int draws,
                        Rng& rng, const ConvergenceParams& params) {
    for (std::size_t i = 1; i < library_sizes.size(); ++i)
        if (library_sizes[i] <= library_sizes[i - 1])
            throw std::invalid_argument("ccm_pair: library sizes must be strictly increasing");

    shadow::ShadowManifold ma = shadow::build_shadow(series_a, p, tau, 0);
    shadow::ShadowManifold mb = shadow::build_shadow(series_b, p, tau, 1);

    CrossMapResult result;
    result.library_sizes = library_sizes;
    for (int L : library_sizes) {
        result.skill_ab.push_back(cross_map_skill(mb, series_a, L, draws, rng));
        result.skill_ba.push_back(cross_map_skill(ma, series_b, L, draws, rng));
    }
    result.converged_ab = convergence_test(result.skill_ab, params);
    result.converged_ba = convergence_test(result.skill_ba, params);
    return result;
}

} // namespace shadowmap::ccm
