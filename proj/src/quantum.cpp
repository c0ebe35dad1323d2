#include "dqkd/quantum.hpp"

#include <stdexcept>
#include <string>

namespace dqkd {

void require_probability(double p, std::string_view name)
{
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument(std::string(name) + " must be in [0, 1], got " + std::to_string(p));
    }
}

void ChannelModel::validate() const
{
    require_probability(loss_probability, "loss_probability");
    require_probability(flip_probability, "flip_probability");
}

Measurement measure(const QubitState& state, Basis basis, Rng& rng)
{
    if (basis == state.basis) {
        return {state.bit, state};
    }
    const Bit outcome = to_bit(rng.coin());
    return {outcome, prepare(basis, outcome)};
}

std::optional<QubitState> transmit(const QubitState& state, const ChannelModel& channel, Rng& rng)
{
    if (rng.bernoulli(channel.loss_probability)) {
        return std::nullopt;
    }
    QubitState out = state;
    if (rng.bernoulli(channel.flip_probability)) {
        out.bit = flipped(out.bit);
    }
    return out;
}

} // namespace dqkd
