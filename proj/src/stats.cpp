#include "shadowmap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace shadowmap::stats {

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("pearson: length mismatch");
    if (a.size() < 2)
        throw std::invalid_argument("pearson: need at least 2 samples");
    const double ma = a.mean();
    const double mb = b.mean();
    Eigen::ArrayXd da = a.array() - ma;
    Eigen::ArrayXd db = b.array() - mb;
    const double va = (da * da).sum();
    const double vb = (db * db).sum();
    if (va == 0.0 || vb == 0.0)
        throw std::invalid_argument("pearson: zero variance");
    return (da * db).sum() / std::sqrt(va * vb);
}

std::vector<double> windowed_correlation(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y, int window,
                                         int stride) {
    if (x.size() != y.size())
        throw std::invalid_argument("windowed_correlation: length mismatch");
    if (window < 2 || window > x.size())
        throw std::invalid_argument("windowed_correlation: bad window");
    if (stride < 1)
        throw std::invalid_argument("windowed_correlation: stride must be >= 1");
    std::vector<double> out;
    for (int t = 0; t + window <= x.size(); t += stride) {
        Eigen::VectorXd xs = x.segment(t, window);
        Eigen::VectorXd ys = y.segment(t, window);
        try {
            out.push_back(pearson(xs, ys));
        } catch (const std::invalid_argument&) {
            out.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return out;
}

KsResult ks_one_sided(const std::vector<double>& real_sample,
                      const std::vector<double>& null_sample) {
    if (real_sample.empty() || null_sample.empty())
        throw std::invalid_argument("ks_one_sided: empty sample");
    std::vector<double> rs = real_sample;
    std::vector<double> ns = null_sample;
    std::sort(rs.begin(), rs.end());
    std::sort(ns.begin(), ns.end());
    const auto n1 = static_cast<int>(rs.size());
    const auto n2 = static_cast<int>(ns.size());

    auto ecdf = [](const std::vector<double>& sorted, double z) {
        return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), z) -
                                   sorted.begin()) /
               static_cast<double>(sorted.size());
    };

    double d = 0.0;
    for (double z : rs)
        d = std::max(d, ecdf(ns, z) - ecdf(rs, z));
    for (double z : ns)
        d = std::max(d, ecdf(ns, z) - ecdf(rs, z));

    const double m =
        static_cast<double>(n1) * n2 / (static_cast<double>(n1) + n2);
    double p = std::exp(-2.0 * m * d * d);
    p = std::min(1.0, std::max(0.0, p));
    return {d, p, n1, n2};
}

double ks_exact_p(int n1, int n2, double d) {
    if (n1 < 1 || n2 < 1)
        throw std::invalid_argument("ks_exact_p: empty sample");
    if (d <= 0.0)
        return 1.0;
    if (d > 1.0)
        return 0.0;
    // Count interleavings whose running ECDF difference F_null - F_real never
    // reaches d: lattice paths (i real steps, j null steps) avoiding
    // j/n2 - i/n1 >= d, i.e. j*n1 - i*n2 >= d*n1*n2.
    const double threshold = d * n1 * n2 - 1e-9;
    std::vector<double> col(static_cast<std::size_t>(n2) + 1, 0.0);
    auto hits = [&](int i, int j) {
        return static_cast<double>(j) * n1 - static_cast<double>(i) * n2 >= threshold;
    };
    col[0] = 1.0;
    for (int j = 1; j <= n2; ++j)
        col[static_cast<std::size_t>(j)] =
            hits(0, j) ? 0.0 : col[static_cast<std::size_t>(j) - 1];
    for (int i = 1; i <= n1; ++i) {
        col[0] = hits(i, 0) ? 0.0 : col[0];
        for (int j = 1; j <= n2; ++j)
            col[static_cast<std::size_t>(j)] =
                hits(i, j) ? 0.0
                           : col[static_cast<std::size_t>(j)] +
                                 col[static_cast<std::size_t>(j) - 1];
    }
    // total paths C(n1+n2, n1) via exp(lgamma) would lose precision; build it
    // by the same recurrence instead.
    std::vector<double> tot(static_cast<std::size_t>(n2) + 1, 1.0);
    for (int i = 1; i <= n1; ++i)
        for (int j = 1; j <= n2; ++j)
            tot[static_cast<std::size_t>(j)] += tot[static_cast<std::size_t>(j) - 1];
    const double p = 1.0 - col[static_cast<std::size_t>(n2)] / tot[static_cast<std::size_t>(n2)];
    return std::min(1.0, std::max(0.0, p));
}

bool decide_edge(const std::vector<double>& beta_real,
                 const std::vector<double>& beta_null, double alpha,
                 bool exact_p) {
    KsResult ks = ks_one_sided(beta_real, beta_null);
    const double p =
        exact_p ? ks_exact_p(ks.n1, ks.n2, ks.statistic) : ks.p_value;
    return p < alpha;
}

bool decide_edge_threshold(const std::vector<double>& beta_real, double threshold) {
    if (beta_real.empty())
        throw std::invalid_argument("decide_edge_threshold: empty distribution");
    double mean = 0.0;
    for (double b : beta_real)
        mean += b;
    mean /= static_cast<double>(beta_real.size());
    return mean > threshold;
}

} // namespace shadowmap::stats
