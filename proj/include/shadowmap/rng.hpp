#pragma once

#include <cstdint>
#include <random>

namespace shadowmap {

// Deterministic seed mixing (splitmix64 finalizer). Used to derive
// independent per-run / per-variable streams from one master seed, so
// results do not depend on thread scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Thin wrapper around mt19937_64. uniform() uses the top 53 bits of the
// raw output, so sequences are reproducible independent of the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // [0, n), n > 0
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n));
    }

private:
    std::mt19937_64 gen_;
};

} // namespace shadowmap
