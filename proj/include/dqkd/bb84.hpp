#ifndef DQKD_BB84_HPP
#define DQKD_BB84_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dqkd/adversary.hpp"
#include "dqkd/quantum.hpp"
#include "dqkd/transcript.hpp"

namespace dqkd {

// Single-direction BB84 baseline with sifting and random-sample error
// estimation.
struct Bb84Config {
    std::size_t n_timeslots{1000};
    ChannelModel channel{};
    EveStrategy eve{};
    double sample_fraction{0.5};
    std::uint64_t seed{0};
    // Session is flagged when the sampled error rate exceeds this.
    double error_threshold{0.0};

    void validate() const;
};

struct Bb84Outcome {
    std::size_t n_timeslots{0};
    std::vector<SlotRecord> sifted_records;
    std::vector<Timeslot> sampled_timeslots; // ascending
    std::size_t sample_mismatches{0};
    double estimated_error_rate{0.0};

    // Key candidates, renumbered 1..N by position; key_timeslots[i] is the
    // original timeslot behind key index i + 1.
    std::vector<Timeslot> key_timeslots;
    std::vector<Bit> key_bits_alice;
    std::vector<Bit> key_bits_bob;

    std::vector<EveRecord> eve_records;
    // Ground-truth error rate over all sifted slots (not observable by the
    // parties).
    double sifted_error_rate{0.0};
    bool detected{false};
};

// Keeps received, basis-matched slots in their original order.
std::vector<SlotRecord> sift(std::span<const SlotRecord> records);

// Indices of a uniform draw without replacement of
// ceil(fraction * population) elements, returned ascending.
std::vector<std::size_t> draw_sample(std::size_t population, double fraction, Rng& rng);

// Throws std::invalid_argument on an invalid config (including n_timeslots = 0).
Bb84Outcome run_bb84(const Bb84Config& config);
Bb84Outcome run_bb84(const Bb84Config& config, Rng& rng);

} // namespace dqkd

#endif
