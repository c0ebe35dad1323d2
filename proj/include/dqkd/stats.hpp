#ifndef DQKD_STATS_HPP
#define DQKD_STATS_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dqkd/adversary.hpp"
#include "dqkd/bb84.hpp"
#include "dqkd/duplex.hpp"
#include "dqkd/quantum.hpp"

namespace dqkd {

// ---- closed forms ---------------------------------------------------------

// Per matched slot error probability. Intercept-resend contributes
// intercept_fraction / 4 (for any basis policy, since the sender basis is
// uniform); channel flips compose as an independent XOR:
//   p = p_eve + p_chan - 2 p_eve p_chan
double slot_error_probability(const EveStrategy& eve, const ChannelModel& channel);

// A pair fails iff exactly one of its two slots is in error: 2 p (1 - p).
double pair_error_from_slot(double p_slot);
double pair_error_probability(const EveStrategy& eve, const ChannelModel& channel);

// Inverse of pair_error_from_slot on p_slot in [0, 1/2]; rates above 1/2
// clamp to 1/2.
double slot_error_from_pair(double p_pair);

// (1 - p_pair)^n_pairs: chance that n checked pairs all pass.
double undetected_probability(std::size_t n_pairs, double p_pair);

// ---- Eve information accounting --------------------------------------------

struct BitPair {
    Bit set2{Bit::zero};
    Bit set3{Bit::zero};

    friend bool operator==(const BitPair&, const BitPair&) = default;
};

struct PairLeak {
    Triple triple;
    // Bits of the pair revealed by the public triple (its XOR).
    int bits_revealed{1};
    // Pair values still consistent with everything Eve knows.
    std::vector<BitPair> candidates;
    // Interceptions on either slot made in the announced basis.
    std::vector<EveRecord> informative_records;
    bool key_exposed{false};
};

struct EveInformation {
    std::vector<PairLeak> per_triple;
    std::size_t bits_revealed{0};
    std::size_t exposed_key_bits{0};
};

// Per published triple: the flip bit pins the pair to two candidates; an
// interception in the slot's announced basis pins one bit and therefore the
// key bit.
EveInformation eve_information(std::span<const Triple> triples, std::span<const EveRecord> eve_records,
                               const BasisAnnouncement& announced_bases);

// Mutual information in bits of a 2x2 joint count table.
double mutual_information_bits(const std::array<std::array<double, 2>, 2>& joint);

// ---- estimates ------------------------------------------------------------

struct Estimate {
    double value{0.0};
    double half_width{0.0};
    std::size_t samples{0};
};

// Normal-approximation intervals; z = 1.96 gives 95%.
Estimate proportion_estimate(std::size_t successes, std::size_t trials, double z = 1.96);
Estimate mean_estimate(std::span<const double> values, double z = 1.96);

// Clopper-Pearson interval for small samples.
std::pair<double, double> exact_binomial_interval(std::size_t successes, std::size_t trials,
                                                  double confidence = 0.95);

// ---- session reports ------------------------------------------------------

enum class Protocol : std::uint8_t { bb84, duplex };

struct SessionReport {
    Protocol protocol{Protocol::duplex};
    std::uint64_t session_index{0};
    std::uint64_t seed{0};
    std::size_t n_timeslots{0};
    std::size_t sifted{0};           // matched, received slots
    std::size_t sifted_or_paired{0}; // bb84: sifted; duplex: checked pairs
    std::size_t sampled{0};          // bb84 only
    std::size_t unpaired{0};         // duplex only
    std::size_t failures{0};         // bb84: sample mismatches; duplex: failed pairs
    double estimated_error_rate{0.0};
    double pair_error_rate{0.0};
    double true_error_rate{0.0};
    std::size_t key_length{0};
    bool keys_agree{true};
    std::size_t key_disagreements{0};
    std::size_t eve_intercepts{0};
    std::size_t eve_pair_bits_revealed{0};
    std::size_t eve_exposed_key_bits{0};
    std::size_t bits_sacrificed{0};
    bool detected{false};
    bool accepted{true};
};

SessionReport make_report(const Bb84Outcome& outcome, std::uint64_t session_index = 0, std::uint64_t seed = 0);
SessionReport make_report(const DuplexOutcome& outcome, std::uint64_t session_index = 0, std::uint64_t seed = 0);

struct AggregateStats {
    Protocol protocol{Protocol::duplex};
    std::size_t sessions{0};
    Estimate detection_rate;
    Estimate accept_rate;
    Estimate mean_error_rate;
    Estimate mean_true_error_rate;
    Estimate key_rate; // key bits per transmitted timeslot
    Estimate pair_failure_rate; // pooled over every checked pair
    double mean_key_length{0.0};
    std::size_t total_checked{0};
    std::size_t total_failures{0};
    std::size_t sessions_keys_disagree{0};
};

// Throws std::invalid_argument on an empty or mixed-protocol span.
AggregateStats aggregate(std::span<const SessionReport> reports);

struct ComparisonRow {
    Protocol protocol{Protocol::duplex};
    std::size_t sessions{0};
    double mean_timeslots{0.0};
    double mean_key_length{0.0};
    Estimate key_rate;
    // Key rate if sampled bits were not sacrificed (same as key_rate for duplex).
    double key_rate_without_sampling{0.0};
    double mean_bits_sacrificed{0.0};
    Estimate detection_rate;
    double mean_error_rate{0.0};
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows; // duplex first, then bb84
};

ComparisonTable compare_protocols(std::span<const SessionReport> duplex_reports,
                                  std::span<const SessionReport> bb84_reports);

// ---- sweeps ---------------------------------------------------------------

struct SweepPoint {
    double intercept_fraction{0.0};
    double flip_probability{0.0};
    double loss_probability{0.0};
    std::size_t n_timeslots{0};
};

struct SweepCell {
    SweepPoint point;
    AggregateStats stats;
};

struct SweepResult {
    std::vector<SweepCell> cells;
};

// ---- delimiter-separated output -------------------------------------------

void write_reports_dsv(std::ostream& out, std::span<const SessionReport> reports, char sep = ',');
void write_comparison_dsv(std::ostream& out, const ComparisonTable& table, char sep = ',');
void write_sweep_dsv(std::ostream& out, const SweepResult& sweep, char sep = ',');

std::string_view to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view text);

// Shortest round-trip decimal form; used by every text emitter.
std::string format_double(double v);

} // namespace dqkd

#endif
