#pragma once

#include <Eigen/Core>
#include <vector>

namespace shadowmap::stats {

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Pearson r over [t, t+window) slices, t stepping by stride. Windows with
// zero variance in either series yield NaN (a chaotic series can pin inside
// a window), not an error.
std::vector<double> windowed_correlation(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y, int window,
                                         int stride);

struct KsResult {
    double statistic = 0.0;  // D = sup_z (F_null(z) - F_real(z))
    double p_value = 1.0;
    int n1 = 0;              // real sample size
    int n2 = 0;              // null sample size
};

// One-sided two-sample KS: large D when the real sample sits stochastically
// above the null. p = exp(-2*m*D^2), m = n1*n2/(n1+n2), clamped to [0,1].
KsResult ks_one_sided(const std::vector<double>& real_sample,
                      const std::vector<double>& null_sample);

// Exact permutation p-value P(D >= observed) for the one-sided statistic,
// computed by lattice-path counting over all orderings (assumes continuous
// data; ties are not handled specially). Practical for n1, n2 <= ~500.
double ks_exact_p(int n1, int n2, double d);

bool decide_edge(const std::vector<double>& beta_real,
                 const std::vector<double>& beta_null, double alpha,
                 bool exact_p = false);

bool decide_edge_threshold(const std::vector<double>& beta_real, double threshold);

} // namespace shadowmap::stats
