#ifndef DQKD_ADVERSARY_HPP
#define DQKD_ADVERSARY_HPP

#include <cstdint>
#include <optional>
#include <string_view>

#include "dqkd/quantum.hpp"

namespace dqkd {

// Timeslots are 1-based and unique within a transcript.
using Timeslot = std::uint64_t;

enum class EveKind : std::uint8_t { absent, intercept_resend };
enum class EveBasisPolicy : std::uint8_t { uniform_random, always_X, always_Y };

struct EveStrategy {
    EveKind kind{EveKind::absent};
    double intercept_fraction{0.0};
    EveBasisPolicy basis_policy{EveBasisPolicy::uniform_random};

    void validate() const;

    static EveStrategy absent() { return {}; }
    static EveStrategy intercept_resend(double fraction,
                                        EveBasisPolicy policy = EveBasisPolicy::uniform_random)
    {
        return {EveKind::intercept_resend, fraction, policy};
    }
};

// What Eve saw on one intercepted timeslot.
struct EveRecord {
    Timeslot timeslot{0};
    Basis measured_basis{Basis::X};
    Bit measured_bit{Bit::zero};

    friend bool operator==(const EveRecord&, const EveRecord&) = default;
};

struct Interception {
    QubitState forwarded;
    std::optional<EveRecord> record;
};

// Eve sits on the link before channel noise and resends noiselessly.
// An absent strategy consumes no randomness.
Interception maybe_intercept(Timeslot timeslot, const QubitState& state, const EveStrategy& strategy, Rng& rng);

std::string_view to_string(EveBasisPolicy policy);
std::optional<EveBasisPolicy> parse_basis_policy(std::string_view text);

} // namespace dqkd

#endif
