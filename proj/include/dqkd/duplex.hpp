#ifndef DQKD_DUPLEX_HPP
#define DQKD_DUPLEX_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dqkd/adversary.hpp"
#include "dqkd/quantum.hpp"
#include "dqkd/transcript.hpp"

namespace dqkd {

// Duplex BB84: both parties transmit, matched slots are split into the
// Alice-sent set 2 and the Bob-sent set 3, and Bob publishes pairs of
// timeslots (one from each set) that Alice checks for parity. No bit value
// is ever compared in public.

struct Transmission {
    Transcript transcript;
    std::vector<EveRecord> eve_records;
};

// Draws every slot's choices from `rng`. Requires n_timeslots >= 2 and a
// rule other than explicit_directions.
Transmission run_duplex_transmission(std::size_t n_timeslots, const ChannelModel& channel, const EveStrategy& eve,
                                     Rng& rng, Interleaving rule = Interleaving::odd_alice_to_bob);

// Same, but with the endpoint choices supplied (one entry per timeslot, in
// order). Measurement outcomes, Eve and the channel still draw from `rng`.
Transmission run_duplex_transmission(std::span<const SlotChoices> choices, const ChannelModel& channel,
                                     const EveStrategy& eve, Rng& rng,
                                     Interleaving rule = Interleaving::odd_alice_to_bob);

struct AnnouncedBasis {
    Timeslot timeslot{0};
    Basis basis{Basis::X};

    friend bool operator==(const AnnouncedBasis&, const AnnouncedBasis&) = default;
};
using BasisAnnouncement = std::vector<AnnouncedBasis>;

// A party's public list of the bases it used, both to send and to measure.
BasisAnnouncement announce_bases(const Transcript& transcript, Party party);

// set 1 = discard (lost or basis mismatch), set 2 = matched and Alice sent,
// set 3 = matched and Bob sent. All lists ascending.
struct SetPartition {
    std::vector<Timeslot> discard;
    std::vector<Timeslot> set2;
    std::vector<Timeslot> set3;
};

// Throws std::invalid_argument if either announcement lacks a slot of the
// transcript.
SetPartition filter_sets(const Transcript& transcript, const BasisAnnouncement& alice_bases,
                         const BasisAnnouncement& bob_bases);

// A party's private (T, BV) records: sent bits and received (non-lost) bits.
using LocalRecords = std::map<Timeslot, Bit>;
LocalRecords local_records(const Transcript& transcript, Party party);

struct SlotBit {
    Timeslot timeslot{0};
    Bit bit{Bit::zero};
};

// Projects `records` onto `timeslots`; throws std::out_of_range on a gap.
std::vector<SlotBit> bit_view(const LocalRecords& records, std::span<const Timeslot> timeslots);

struct Triple {
    Timeslot t_set2{0};
    Timeslot t_set3{0};
    Bit flip{Bit::zero}; // 1: Alice flips her set-3 bit before comparing

    friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleList {
    std::vector<Triple> triples;
    std::vector<Timeslot> unpaired; // tail of the longer set
};

// Positional pairing: i-th of set 2 with i-th of set 3, flip = BV2 ^ BV3
// over Bob's values.
TripleList make_triples_flip(std::span<const SlotBit> set2_view, std::span<const SlotBit> set3_view);

struct SlotPair {
    Timeslot t_set2{0};
    Timeslot t_set3{0};

    friend bool operator==(const SlotPair&, const SlotPair&) = default;
};

struct PairSearch {
    std::vector<SlotPair> pairs;
    std::vector<Timeslot> skipped_set2; // no equal-BV set-3 element left
    std::vector<Timeslot> unused_set3;
};

// Greedy same-BV matching: each set-2 element, in order, takes the earliest
// unused set-3 element with the same BV.
PairSearch make_pairs_search(std::span<const SlotBit> set2_view, std::span<const SlotBit> set3_view);

// A same-BV pair is a triple with flip 0.
std::vector<Triple> as_triples(std::span<const SlotPair> pairs);

struct VerificationResult {
    std::size_t checked_pairs{0};
    std::vector<Triple> failures;
    bool pass{true};
};

// Alice's check: BV(t_set2) == BV(t_set3) ^ flip. Throws std::out_of_range
// when a referenced timeslot has no record.
VerificationResult verify_triples(const LocalRecords& alice_records, std::span<const Triple> triples);

// Reads an ordered pair of bit values as one key bit:
// (0,1) and (0,0) read as 0; (1,0) and (1,1) read as 1.
Bit key_bit_rule(Bit set2_bit, Bit set3_bit);

// One key bit per triple from the caller's own records. Throws
// std::out_of_range on a missing record.
std::vector<Bit> extract_key(std::span<const Triple> triples, const LocalRecords& local_records);

enum class PairingVariant : std::uint8_t { flip_triples, search_pairs };

enum class FailurePolicy : std::uint8_t {
    abort_on_any, // any failed pair discards the key
    threshold,    // keep the key while failures / checked <= max_pair_error_rate
};

struct DuplexOptions {
    PairingVariant variant{PairingVariant::flip_triples};
    FailurePolicy failure_policy{FailurePolicy::abort_on_any};
    double max_pair_error_rate{0.0};
    // Whether same-BV pairs are also used as key material.
    bool search_pairs_as_key{true};
    // Cap on pairs Bob publishes; 0 means all of them.
    std::size_t max_pairs{0};

    void validate() const;
};

// Classical messages exchanged in the clear.
struct PublicMessages {
    BasisAnnouncement alice_bases;
    BasisAnnouncement bob_bases;
    std::vector<Timeslot> discard_notice; // Bob -> Alice
    std::vector<Triple> triples;          // Bob -> Alice
};

struct DuplexAnalysis {
    SetPartition partition;
    PairingVariant variant{PairingVariant::flip_triples};
    std::vector<Triple> triples;
    // Filtered slots that were never checked: leftover tail, search skips,
    // and anything beyond max_pairs.
    std::vector<Timeslot> unpaired;
    VerificationResult verification;
    double pair_error_rate{0.0};
    bool detected{false};
    bool accepted{true};
    bool keyed{true};
    std::vector<Bit> alice_key;
    std::vector<Bit> bob_key;
    // Key indices where the two keys differ (even-parity errors slip past
    // verification and surface here).
    std::vector<std::size_t> key_disagreements;
    PublicMessages messages;
};

// Runs basis announcement, filtering, pairing, verification and key
// extraction over a finished transcript.
DuplexAnalysis analyze_duplex(const Transcript& transcript, const DuplexOptions& options = {});

struct DuplexConfig {
    std::size_t n_timeslots{1000};
    ChannelModel channel{};
    EveStrategy eve{};
    Interleaving interleaving{Interleaving::odd_alice_to_bob};
    DuplexOptions options{};
    std::uint64_t seed{0};

    void validate() const;
};

struct DuplexOutcome {
    Transmission transmission;
    DuplexAnalysis analysis;
};

DuplexOutcome run_duplex_session(const DuplexConfig& config);
DuplexOutcome run_duplex_session(const DuplexConfig& config, Rng& rng);

std::string_view to_string(PairingVariant v);
std::optional<PairingVariant> parse_variant(std::string_view text);
std::string_view to_string(FailurePolicy p);
std::optional<FailurePolicy> parse_failure_policy(std::string_view text);

} // namespace dqkd

#endif
