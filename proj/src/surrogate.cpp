#include "shadowmap/surrogate.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace shadowmap::surrogate {

namespace {

// FFTW plan creation/destruction is not thread-safe; execution of distinct
// plans is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

// Reusable forward/inverse real transforms of one length.
class RealFft {
public:
    explicit RealFft(int n) : n_(n) {
        real_ = fftw_alloc_real(n);
        spec_ = fftw_alloc_complex(static_cast<std::size_t>(n) / 2 + 1);
        std::lock_guard<std::mutex> lock(plan_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
        fftw_free(real_);
        fftw_free(spec_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int bins() const { return n_ / 2 + 1; }

    // series -> complex spectrum (unnormalized)
    std::vector<std::complex<double>> forward(const Eigen::VectorXd& x) {
        std::copy(x.data(), x.data() + n_, real_);
        fftw_execute(fwd_);
        std::vector<std::complex<double>> out(bins());
        for (int k = 0; k < bins(); ++k)
            out[k] = {spec_[k][0], spec_[k][1]};
        return out;
    }

    // complex spectrum -> series (normalized by 1/n)
    Eigen::VectorXd inverse(const std::vector<std::complex<double>>& spec) {
        for (int k = 0; k < bins(); ++k) {
            spec_[k][0] = spec[k].real();
            spec_[k][1] = spec[k].imag();
        }
        fftw_execute(inv_);
        Eigen::VectorXd out(n_);
        const double scale = 1.0 / n_;
        for (int t = 0; t < n_; ++t)
            out[t] = real_[t] * scale;
        return out;
    }

private:
    int n_;
    double* real_;
    fftw_complex* spec_;
    fftw_plan fwd_;
    fftw_plan inv_;
};

std::vector<int> stable_order(const Eigen::VectorXd& x) {
    std::vector<int> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return x[a] < x[b]; });
    return order;
}

double rel_rms(const std::vector<double>& got, const std::vector<double>& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < got.size(); ++k) {
        num += (got[k] - want[k]) * (got[k] - want[k]);
        den += want[k] * want[k];
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

} // namespace

Eigen::VectorXd iaaft(const Eigen::VectorXd& series, const SurrogateConfig& config,
                      Rng& rng) {
    const int T = static_cast<int>(series.size());
    if (T < 8)
        throw std::invalid_argument("iaaft: series must have at least 8 samples");
    if (config.max_iterations < 1 || !(config.spectrum_tolerance > 0.0))
        throw std::invalid_argument("iaaft: config values must be positive");

    Eigen::VectorXd sorted_vals = series;
    std::sort(sorted_vals.data(), sorted_vals.data() + T);

    RealFft fft(T);
    auto target_spec = fft.forward(series);
    std::vector<double> target_mag(target_spec.size());
    for (std::size_t k = 0; k < target_spec.size(); ++k)
        target_mag[k] = std::abs(target_spec[k]);

    // start from a random permutation (Fisher-Yates)
    Eigen::VectorXd s = series;
    for (int i = T - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(i) + 1));
        std::swap(s[i], s[j]);
    }

    std::vector<int> prev_order;
    std::vector<double> mag(target_mag.size());
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        // spectrum step: keep phases, impose the original magnitudes
        auto spec = fft.forward(s);
        for (std::size_t k = 0; k < spec.size(); ++k) {
            const double a = std::abs(spec[k]);
            spec[k] = a > 0.0 ? spec[k] * (target_mag[k] / a)
                              : std::complex<double>(target_mag[k], 0.0);
        }
        Eigen::VectorXd shaped = fft.inverse(spec);

        // amplitude step: rank-order remap onto the original sorted values;
        // ties keep original time order (stable sort)
        std::vector<int> order = stable_order(shaped);
        for (int r = 0; r < T; ++r)
            s[order[static_cast<std::size_t>(r)]] = sorted_vals[r];

        if (!prev_order.empty() && order == prev_order)
            break;
        prev_order = std::move(order);

        auto check = fft.forward(s);
        for (std::size_t k = 0; k < check.size(); ++k)
            mag[k] = std::abs(check[k]);
        if (rel_rms(mag, target_mag) < config.spectrum_tolerance)
            break;
    }
    return s;
}

Eigen::VectorXd periodogram(const Eigen::VectorXd& series) {
    const int T = static_cast<int>(series.size());
    if (T < 2)
        throw std::invalid_argument("periodogram: series must have at least 2 samples");
    Eigen::VectorXd centered = series.array() - series.mean();
    RealFft fft(T);
    auto spec = fft.forward(centered);
    const int bins = static_cast<int>(spec.size());
    Eigen::VectorXd power(bins);
    for (int k = 0; k < bins; ++k) {
        const double p = std::norm(spec[static_cast<std::size_t>(k)]);
        const bool interior = k > 0 && !(T % 2 == 0 && k == bins - 1);
        power[k] = interior ? 2.0 * p : p;
    }
    return power;
}

} // namespace shadowmap::surrogate
