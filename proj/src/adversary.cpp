#include "dqkd/adversary.hpp"

namespace dqkd {

void EveStrategy::validate() const
{
    if (kind == EveKind::intercept_resend) {
        require_probability(intercept_fraction, "intercept_fraction");
    }
}

namespace {

Basis choose_basis(EveBasisPolicy policy, Rng& rng)
{
    switch (policy) {
    case EveBasisPolicy::always_X:
        return Basis::X;
    case EveBasisPolicy::always_Y:
        return Basis::Y;
    case EveBasisPolicy::uniform_random:
        break;
    }
    return rng.coin() ? Basis::Y : Basis::X;
}

} // namespace

Interception maybe_intercept(Timeslot timeslot, const QubitState& state, const EveStrategy& strategy, Rng& rng)
{
    if (strategy.kind == EveKind::absent || !rng.bernoulli(strategy.intercept_fraction)) {
        return {state, std::nullopt};
    }
    const Basis basis = choose_basis(strategy.basis_policy, rng);
    const Measurement m = measure(state, basis, rng);
    return {m.post_state, EveRecord{timeslot, basis, m.outcome}};
}

std::string_view to_string(EveBasisPolicy policy)
{
    switch (policy) {
    case EveBasisPolicy::always_X:
        return "always_X";
    case EveBasisPolicy::always_Y:
        return "always_Y";
    case EveBasisPolicy::uniform_random:
        break;
    }
    return "uniform_random";
}

std::optional<EveBasisPolicy> parse_basis_policy(std::string_view text)
{
    if (text == "uniform_random" || text == "uniform") {
        return EveBasisPolicy::uniform_random;
    }
    if (text == "always_X" || text == "X") {
        return EveBasisPolicy::always_X;
    }
    if (text == "always_Y" || text == "Y") {
        return EveBasisPolicy::always_Y;
    }
    return std::nullopt;
}

} // namespace dqkd
