#pragma once

#include <Eigen/Core>

#include "shadowmap/rng.hpp"

namespace shadowmap::surrogate {

struct SurrogateConfig {
    int max_iterations = 1000;
    double spectrum_tolerance = 1e-8;  // relative RMS spectral error early stop
};

// Iterative Amplitude Adjusted Fourier Transform surrogate: exact amplitude
// distribution (the output is a permutation of the input), power spectrum
// matched as closely as the iteration allows. Deterministic given the rng.
Eigen::VectorXd iaaft(const Eigen::VectorXd& series, const SurrogateConfig& config,
                      Rng& rng);

// One-sided periodogram of the mean-removed series: squared DFT magnitudes at
// the non-negative frequency bins, interior bins doubled so that
// sum(periodogram) / T == sum((x - mean)^2) exactly (Parseval).
Eigen::VectorXd periodogram(const Eigen::VectorXd& series);

} // namespace shadowmap::surrogate
