#ifndef DQKD_RANDOM_HPP
#define DQKD_RANDOM_HPP

#include <cstdint>
#include <random>

namespace dqkd {

// Seeded generator that every stochastic operation draws from.
//
// Draws are derived from raw 64-bit engine output rather than the
// std:: distributions, whose algorithms are implementation-defined; this
// keeps reports byte-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    bool coin() { return (engine_() >> 63) != 0; }

    // Uniform double in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Always consumes exactly one draw, including for p = 0 and p = 1.
    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, bound). bound must be nonzero.
    std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
};

// Seed for session `index` of a run with master seed `master`:
// splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15).
// Session k can therefore be replayed without running sessions 0..k-1.
std::uint64_t session_seed(std::uint64_t master, std::uint64_t index);

} // namespace dqkd

#endif
