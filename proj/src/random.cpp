#include "dqkd/random.hpp"

#include <limits>

namespace dqkd {

std::uint64_t Rng::below(std::uint64_t bound)
{
    // reject the top partial block so every residue is equally likely
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = engine_();
    while (draw >= limit) {
        draw = engine_();
    }
    return draw % bound;
}

std::uint64_t session_seed(std::uint64_t master, std::uint64_t index)
{
    std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace dqkd
