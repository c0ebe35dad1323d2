#include "dqkd/duplex.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dqkd {

namespace {

Transmission transmit_all(std::size_t n, const ChannelModel& channel, const EveStrategy& eve, Rng& rng,
                          Interleaving rule, const std::span<const SlotChoices>* fixed)
{
    if (n < 2) {
        throw std::invalid_argument("duplex transmission needs at least 2 timeslots");
    }
    if (rule == Interleaving::explicit_directions) {
        throw std::invalid_argument("generated transcripts need an odd or even interleaving rule");
    }
    channel.validate();
    eve.validate();

    Transmission out;
    out.transcript.interleaving = rule;
    out.transcript.slots.reserve(n);
    for (Timeslot t = 1; t <= n; ++t) {
        const SlotChoices choices = fixed ? (*fixed)[t - 1] : draw_choices(rng);
        out.transcript.slots.push_back(
            simulate_slot(t, direction_for(t, rule), choices, channel, eve, rng, out.eve_records));
    }
    return out;
}

Bit lookup(const LocalRecords& records, Timeslot t, const char* who)
{
    const auto it = records.find(t);
    if (it == records.end()) {
        throw std::out_of_range(std::string(who) + " has no bit value for timeslot " + std::to_string(t));
    }
    return it->second;
}

std::map<Timeslot, Basis> index_announcement(const BasisAnnouncement& a)
{
    std::map<Timeslot, Basis> m;
    for (const AnnouncedBasis& e : a) {
        m[e.timeslot] = e.basis;
    }
    return m;
}

} // namespace

Transmission run_duplex_transmission(std::size_t n_timeslots, const ChannelModel& channel, const EveStrategy& eve,
                                     Rng& rng, Interleaving rule)
{
    return transmit_all(n_timeslots, channel, eve, rng, rule, nullptr);
}

Transmission run_duplex_transmission(std::span<const SlotChoices> choices, const ChannelModel& channel,
                                     const EveStrategy& eve, Rng& rng, Interleaving rule)
{
    return transmit_all(choices.size(), channel, eve, rng, rule, &choices);
}

BasisAnnouncement announce_bases(const Transcript& transcript, Party party)
{
    BasisAnnouncement out;
    out.reserve(transcript.slots.size());
    for (const SlotRecord& r : transcript.slots) {
        out.push_back({r.timeslot, r.basis_of(party)});
    }
    return out;
}

SetPartition filter_sets(const Transcript& transcript, const BasisAnnouncement& alice_bases,
                         const BasisAnnouncement& bob_bases)
{
    const auto alice = index_announcement(alice_bases);
    const auto bob = index_announcement(bob_bases);

    SetPartition p;
    for (const SlotRecord& r : transcript.slots) {
        const auto a = alice.find(r.timeslot);
        const auto b = bob.find(r.timeslot);
        if (a == alice.end() || b == bob.end()) {
            throw std::invalid_argument(std::string("no ") + (a == alice.end() ? "Alice" : "Bob") +
                                        " basis announced for timeslot " + std::to_string(r.timeslot));
        }
        if (r.lost() || a->second != b->second) {
            p.discard.push_back(r.timeslot);
        } else if (r.direction == Direction::AliceToBob) {
            p.set2.push_back(r.timeslot);
        } else {
            p.set3.push_back(r.timeslot);
        }
    }
    std::sort(p.discard.begin(), p.discard.end());
    std::sort(p.set2.begin(), p.set2.end());
    std::sort(p.set3.begin(), p.set3.end());
    return p;
}

LocalRecords local_records(const Transcript& transcript, Party party)
{
    LocalRecords out;
    for (const SlotRecord& r : transcript.slots) {
        if (const auto bit = r.bit_of(party)) {
            out.emplace(r.timeslot, *bit);
        }
    }
    return out;
}

std::vector<SlotBit> bit_view(const LocalRecords& records, std::span<const Timeslot> timeslots)
{
    std::vector<SlotBit> out;
    out.reserve(timeslots.size());
    for (Timeslot t : timeslots) {
        out.push_back({t, lookup(records, t, "view")});
    }
    return out;
}

TripleList make_triples_flip(std::span<const SlotBit> set2_view, std::span<const SlotBit> set3_view)
{
    TripleList out;
    const std::size_t n = std::min(set2_view.size(), set3_view.size());
    out.triples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.triples.push_back({set2_view[i].timeslot, set3_view[i].timeslot, set2_view[i].bit ^ set3_view[i].bit});
    }
    const auto longer = set2_view.size() > n ? set2_view : set3_view;
    for (std::size_t i = n; i < longer.size(); ++i) {
        out.unpaired.push_back(longer[i].timeslot);
    }
    return out;
}

PairSearch make_pairs_search(std::span<const SlotBit> set2_view, std::span<const SlotBit> set3_view)
{
    PairSearch out;
    std::vector<bool> used(set3_view.size(), false);
    // next candidate per bit value; set-3 elements are consumed in order
    std::size_t cursor[2] = {0, 0};
    for (const SlotBit& s2 : set2_view) {
        std::size_t& c = cursor[to_int(s2.bit)];
        while (c < set3_view.size() && (used[c] || set3_view[c].bit != s2.bit)) {
            ++c;
        }
        if (c == set3_view.size()) {
            out.skipped_set2.push_back(s2.timeslot);
            continue;
        }
        used[c] = true;
        out.pairs.push_back({s2.timeslot, set3_view[c].timeslot});
    }
    for (std::size_t i = 0; i < set3_view.size(); ++i) {
        if (!used[i]) {
            out.unused_set3.push_back(set3_view[i].timeslot);
        }
    }
    return out;
}

std::vector<Triple> as_triples(std::span<const SlotPair> pairs)
{
    std::vector<Triple> out;
    out.reserve(pairs.size());
    for (const SlotPair& p : pairs) {
        out.push_back({p.t_set2, p.t_set3, Bit::zero});
    }
    return out;
}

VerificationResult verify_triples(const LocalRecords& alice_records, std::span<const Triple> triples)
{
    VerificationResult out;
    for (const Triple& tr : triples) {
        const Bit sent = lookup(alice_records, tr.t_set2, "Alice");
        const Bit measured = lookup(alice_records, tr.t_set3, "Alice");
        if (sent != (measured ^ tr.flip)) {
            out.failures.push_back(tr);
        }
        ++out.checked_pairs;
    }
    out.pass = out.failures.empty();
    return out;
}

Bit key_bit_rule(Bit set2_bit, Bit set3_bit)
{
    switch ((to_int(set2_bit) << 1) | to_int(set3_bit)) {
    case 0b00: // 0,0
    case 0b01: // 0,1
        return Bit::zero;
    case 0b10: // 1,0
    case 0b11: // 1,1
    default:
        return Bit::one;
    }
}

std::vector<Bit> extract_key(std::span<const Triple> triples, const LocalRecords& local_records)
{
    std::vector<Bit> key;
    key.reserve(triples.size());
    for (const Triple& tr : triples) {
        key.push_back(key_bit_rule(lookup(local_records, tr.t_set2, "local party"),
                                   lookup(local_records, tr.t_set3, "local party")));
    }
    return key;
}

void DuplexOptions::validate() const
{
    require_probability(max_pair_error_rate, "max_pair_error_rate");
}

DuplexAnalysis analyze_duplex(const Transcript& transcript, const DuplexOptions& options)
{
    options.validate();

    DuplexAnalysis out;
    out.variant = options.variant;

    // Alice announces every basis she used; Bob filters and returns the discard set.
    out.messages.alice_bases = announce_bases(transcript, Party::Alice);
    out.messages.bob_bases = announce_bases(transcript, Party::Bob);
    out.partition = filter_sets(transcript, out.messages.alice_bases, out.messages.bob_bases);
    out.messages.discard_notice = out.partition.discard;

    const LocalRecords alice = local_records(transcript, Party::Alice);
    const LocalRecords bob = local_records(transcript, Party::Bob);
    const auto set2_view = bit_view(bob, out.partition.set2);
    const auto set3_view = bit_view(bob, out.partition.set3);

    if (options.variant == PairingVariant::flip_triples) {
        TripleList tl = make_triples_flip(set2_view, set3_view);
        out.triples = std::move(tl.triples);
        out.unpaired = std::move(tl.unpaired);
    } else {
        PairSearch ps = make_pairs_search(set2_view, set3_view);
        out.triples = as_triples(ps.pairs);
        out.unpaired = std::move(ps.skipped_set2);
        out.unpaired.insert(out.unpaired.end(), ps.unused_set3.begin(), ps.unused_set3.end());
        out.keyed = options.search_pairs_as_key;
    }
    if (options.max_pairs != 0 && out.triples.size() > options.max_pairs) {
        for (auto it = out.triples.begin() + static_cast<std::ptrdiff_t>(options.max_pairs); it != out.triples.end();
             ++it) {
            out.unpaired.push_back(it->t_set2);
            out.unpaired.push_back(it->t_set3);
        }
        out.triples.resize(options.max_pairs);
    }
    std::sort(out.unpaired.begin(), out.unpaired.end());
    out.messages.triples = out.triples;

    out.verification = verify_triples(alice, out.triples);
    const std::size_t failures = out.verification.failures.size();
    if (out.verification.checked_pairs > 0) {
        out.pair_error_rate =
            static_cast<double>(failures) / static_cast<double>(out.verification.checked_pairs);
    }
    out.detected = failures > 0;
    out.accepted = options.failure_policy == FailurePolicy::abort_on_any
                       ? failures == 0
                       : out.pair_error_rate <= options.max_pair_error_rate;

    if (out.accepted && out.keyed) {
        out.alice_key = extract_key(out.triples, alice);
        out.bob_key = extract_key(out.triples, bob);
        for (std::size_t i = 0; i < out.alice_key.size(); ++i) {
            if (out.alice_key[i] != out.bob_key[i]) {
                out.key_disagreements.push_back(i);
            }
        }
    }
    return out;
}

void DuplexConfig::validate() const
{
    if (n_timeslots < 2) {
        throw std::invalid_argument("n_timeslots must be at least 2 for a duplex session");
    }
    channel.validate();
    eve.validate();
    options.validate();
}

DuplexOutcome run_duplex_session(const DuplexConfig& config)
{
    Rng rng(config.seed);
    return run_duplex_session(config, rng);
}

DuplexOutcome run_duplex_session(const DuplexConfig& config, Rng& rng)
{
    config.validate();
    DuplexOutcome out;
    out.transmission = run_duplex_transmission(config.n_timeslots, config.channel, config.eve, rng, config.interleaving);
    out.analysis = analyze_duplex(out.transmission.transcript, config.options);
    return out;
}

std::string_view to_string(PairingVariant v)
{
    return v == PairingVariant::flip_triples ? "flip_triples" : "search_pairs";
}

std::optional<PairingVariant> parse_variant(std::string_view text)
{
    if (text == "flip_triples") {
        return PairingVariant::flip_triples;
    }
    if (text == "search_pairs") {
        return PairingVariant::search_pairs;
    }
    return std::nullopt;
}

std::string_view to_string(FailurePolicy p)
{
    return p == FailurePolicy::abort_on_any ? "abort_on_any" : "threshold";
}

std::optional<FailurePolicy> parse_failure_policy(std::string_view text)
{
    if (text == "abort_on_any" || text == "abort") {
        return FailurePolicy::abort_on_any;
    }
    if (text == "threshold") {
        return FailurePolicy::threshold;
    }
    return std::nullopt;
}

} // namespace dqkd
