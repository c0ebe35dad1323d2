#include "dqkd/bb84.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dqkd {

void Bb84Config::validate() const
{
    if (n_timeslots == 0) {
        throw std::invalid_argument("n_timeslots must be at least 1");
    }
    channel.validate();
    eve.validate();
    if (!(sample_fraction > 0.0 && sample_fraction < 1.0)) {
        throw std::invalid_argument("sample_fraction must be in (0, 1)");
    }
    require_probability(error_threshold, "error_threshold");
}

std::vector<SlotRecord> sift(std::span<const SlotRecord> records)
{
    std::vector<SlotRecord> out;
    for (const SlotRecord& r : records) {
        if (!r.lost() && r.bases_match()) {
            out.push_back(r);
        }
    }
    return out;
}

std::vector<std::size_t> draw_sample(std::size_t population, double fraction, Rng& rng)
{
    const auto wanted = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(population)));
    const std::size_t k = std::min(wanted, population);
    std::vector<std::size_t> idx(population);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(population - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Bb84Outcome run_bb84(const Bb84Config& config)
{
    Rng rng(config.seed);
    return run_bb84(config, rng);
}

Bb84Outcome run_bb84(const Bb84Config& config, Rng& rng)
{
    config.validate();

    Bb84Outcome out;
    out.n_timeslots = config.n_timeslots;

    // steps 1-6
    std::vector<SlotRecord> records;
    records.reserve(config.n_timeslots);
    for (Timeslot t = 1; t <= config.n_timeslots; ++t) {
        const SlotChoices choices = draw_choices(rng);
        records.push_back(simulate_slot(t, Direction::AliceToBob, choices, config.channel, config.eve, rng,
                                        out.eve_records));
    }

    // step 7
    out.sifted_records = sift(records);
    std::size_t sifted_errors = 0;
    for (const SlotRecord& r : out.sifted_records) {
        sifted_errors += (*r.receiver_bit != r.sender_bit) ? 1 : 0;
    }
    if (!out.sifted_records.empty()) {
        out.sifted_error_rate = static_cast<double>(sifted_errors) / static_cast<double>(out.sifted_records.size());
    }

    // step 8: compare a random sample, then drop it
    const std::vector<std::size_t> sample = draw_sample(out.sifted_records.size(), config.sample_fraction, rng);
    std::vector<bool> sampled(out.sifted_records.size(), false);
    std::size_t sample_errors = 0;
    for (std::size_t i : sample) {
        const SlotRecord& r = out.sifted_records[i];
        sampled[i] = true;
        out.sampled_timeslots.push_back(r.timeslot);
        sample_errors += (*r.receiver_bit != r.sender_bit) ? 1 : 0;
    }
    out.sample_mismatches = sample_errors;
    if (!sample.empty()) {
        out.estimated_error_rate = static_cast<double>(sample_errors) / static_cast<double>(sample.size());
    }

    // step 9
    for (std::size_t i = 0; i < out.sifted_records.size(); ++i) {
        if (sampled[i]) {
            continue;
        }
        const SlotRecord& r = out.sifted_records[i];
        out.key_timeslots.push_back(r.timeslot);
        out.key_bits_alice.push_back(r.sender_bit);
        out.key_bits_bob.push_back(*r.receiver_bit);
    }

    out.detected = out.estimated_error_rate > config.error_threshold;
    return out;
}

} // namespace dqkd
