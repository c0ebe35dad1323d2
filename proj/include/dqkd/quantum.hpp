#ifndef DQKD_QUANTUM_HPP
#define DQKD_QUANTUM_HPP

#include <cstdint>
#include <optional>
#include <string_view>

#include "dqkd/random.hpp"

namespace dqkd {

// The two complementary coding bases.
enum class Basis : std::uint8_t { X, Y };

// Bit value carried by an eigenstate: '+' is 1, '-' is 0.
enum class Bit : std::uint8_t { zero = 0, one = 1 };

constexpr Bit operator^(Bit a, Bit b)
{
    return static_cast<Bit>(static_cast<std::uint8_t>(a) ^ static_cast<std::uint8_t>(b));
}

constexpr Bit flipped(Bit b) { return b ^ Bit::one; }
constexpr int to_int(Bit b) { return static_cast<int>(b); }
constexpr Bit to_bit(bool value) { return value ? Bit::one : Bit::zero; }
constexpr Basis other(Basis b) { return b == Basis::X ? Basis::Y : Basis::X; }

constexpr char basis_char(Basis b) { return b == Basis::X ? 'X' : 'Y'; }
constexpr char bit_char(Bit b) { return b == Bit::one ? '1' : '0'; }

// Eigenstate |+>/|-> of the X or Y operator. Every state this protocol
// prepares or collapses to is one of these four, so (basis, bit) is exact.
struct QubitState {
    Basis basis{Basis::X};
    Bit bit{Bit::zero};

    friend constexpr bool operator==(const QubitState&, const QubitState&) = default;
};

// Abstract channel: the photon is lost with loss_probability; otherwise its
// bit is inverted within its basis with flip_probability.
struct ChannelModel {
    double loss_probability{0.0};
    double flip_probability{0.0};

    // Throws std::invalid_argument when a probability is outside [0, 1].
    void validate() const;

    static ChannelModel ideal() { return {}; }
};

struct Measurement {
    Bit outcome;
    QubitState post_state;
};

constexpr QubitState prepare(Basis basis, Bit bit) { return {basis, bit}; }

// Same basis: deterministic. Complementary basis: fair coin, and the state
// collapses onto the eigenstate of the outcome.
Measurement measure(const QubitState& state, Basis basis, Rng& rng);

// nullopt means the photon was lost.
std::optional<QubitState> transmit(const QubitState& state, const ChannelModel& channel, Rng& rng);

// Validates a probability parameter by name.
void require_probability(double p, std::string_view name);

} // namespace dqkd

#endif
