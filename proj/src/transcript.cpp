#include "dqkd/transcript.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace dqkd {

Direction direction_for(Timeslot timeslot, Interleaving rule)
{
    const bool odd = (timeslot % 2) == 1;
    switch (rule) {
    case Interleaving::even_alice_to_bob:
        return odd ? Direction::BobToAlice : Direction::AliceToBob;
    case Interleaving::odd_alice_to_bob:
    case Interleaving::explicit_directions:
        break;
    }
    return odd ? Direction::AliceToBob : Direction::BobToAlice;
}

const SlotRecord* Transcript::find(Timeslot t) const
{
    auto it = std::lower_bound(slots.begin(), slots.end(), t,
                               [](const SlotRecord& r, Timeslot v) { return r.timeslot < v; });
    if (it != slots.end() && it->timeslot == t) {
        return &*it;
    }
    // fall back for transcripts not sorted by timeslot
    it = std::find_if(slots.begin(), slots.end(), [t](const SlotRecord& r) { return r.timeslot == t; });
    return it == slots.end() ? nullptr : &*it;
}

SlotChoices draw_choices(Rng& rng)
{
    SlotChoices c;
    c.sender_basis = rng.coin() ? Basis::Y : Basis::X;
    c.sender_bit = to_bit(rng.coin());
    c.receiver_basis = rng.coin() ? Basis::Y : Basis::X;
    return c;
}

SlotRecord simulate_slot(Timeslot timeslot, Direction direction, const SlotChoices& choices,
                         const ChannelModel& channel, const EveStrategy& eve, Rng& rng,
                         std::vector<EveRecord>& eve_log)
{
    SlotRecord rec;
    rec.timeslot = timeslot;
    rec.direction = direction;
    rec.sender_basis = choices.sender_basis;
    rec.sender_bit = choices.sender_bit;
    rec.receiver_basis = choices.receiver_basis;

    Interception hit = maybe_intercept(timeslot, prepare(choices.sender_basis, choices.sender_bit), eve, rng);
    if (hit.record) {
        eve_log.push_back(*hit.record);
    }
    const std::optional<QubitState> arrived = transmit(hit.forwarded, channel, rng);
    if (arrived) {
        rec.receiver_bit = measure(*arrived, choices.receiver_basis, rng).outcome;
    }
    return rec;
}

TranscriptFormatError::TranscriptFormatError(std::size_t line, const std::string& what)
    : std::runtime_error("transcript line " + std::to_string(line) + ": " + what), line_(line)
{
}

namespace {

std::vector<std::string_view> split_fields(std::string_view row)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < row.size()) {
        while (i < row.size() && (row[i] == ' ' || row[i] == '\t' || row[i] == '\r')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < row.size() && row[i] != ' ' && row[i] != '\t' && row[i] != '\r') {
            ++i;
        }
        if (i > start) {
            out.push_back(row.substr(start, i - start));
        }
    }
    return out;
}

Basis parse_basis_field(std::string_view f, std::size_t line, std::string_view column)
{
    if (f == "X") {
        return Basis::X;
    }
    if (f == "Y") {
        return Basis::Y;
    }
    throw TranscriptFormatError(line, std::string(column) + " must be X or Y, got '" + std::string(f) + "'");
}

Bit parse_bit_field(std::string_view f, std::size_t line, std::string_view column)
{
    if (f == "0") {
        return Bit::zero;
    }
    if (f == "1") {
        return Bit::one;
    }
    throw TranscriptFormatError(line, std::string(column) + " must be 0 or 1, got '" + std::string(f) + "'");
}

Interleaving infer_interleaving(const std::vector<SlotRecord>& slots)
{
    for (Interleaving rule : {Interleaving::odd_alice_to_bob, Interleaving::even_alice_to_bob}) {
        const bool fits = std::all_of(slots.begin(), slots.end(), [rule](const SlotRecord& r) {
            return direction_for(r.timeslot, rule) == r.direction;
        });
        if (fits) {
            return rule;
        }
    }
    return Interleaving::explicit_directions;
}

} // namespace

Transcript parse_transcript(std::istream& in)
{
    Transcript t;
    std::vector<std::size_t> row_lines;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view row(raw);
        if (const auto hash = row.find('#'); hash != std::string_view::npos) {
            row = row.substr(0, hash);
        }
        const auto fields = split_fields(row);
        if (fields.empty()) {
            continue;
        }
        if (fields.size() != 6) {
            throw TranscriptFormatError(line, "expected 6 fields, got " + std::to_string(fields.size()));
        }

        SlotRecord r;
        const std::string_view ts = fields[0];
        const auto [end, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), r.timeslot);
        if (ec != std::errc{} || end != ts.data() + ts.size() || r.timeslot == 0) {
            throw TranscriptFormatError(line, "timeslot must be a positive integer, got '" + std::string(ts) + "'");
        }
        if (fields[1] == "AB") {
            r.direction = Direction::AliceToBob;
        } else if (fields[1] == "BA") {
            r.direction = Direction::BobToAlice;
        } else {
            throw TranscriptFormatError(line, "direction must be AB or BA, got '" + std::string(fields[1]) + "'");
        }
        r.sender_basis = parse_basis_field(fields[2], line, "sender_basis");
        r.sender_bit = parse_bit_field(fields[3], line, "sender_bit");
        r.receiver_basis = parse_basis_field(fields[4], line, "receiver_basis");
        if (fields[5] != "LOST") {
            r.receiver_bit = parse_bit_field(fields[5], line, "receiver_bit");
        }
        t.slots.push_back(r);
        row_lines.push_back(line);
    }

    std::vector<std::size_t> order(t.slots.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return t.slots[a].timeslot < t.slots[b].timeslot; });
    std::vector<SlotRecord> sorted;
    sorted.reserve(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k > 0 && t.slots[order[k]].timeslot == t.slots[order[k - 1]].timeslot) {
            throw TranscriptFormatError(row_lines[order[k]], "duplicate timeslot " +
                                                                 std::to_string(t.slots[order[k]].timeslot));
        }
        sorted.push_back(t.slots[order[k]]);
    }
    t.slots = std::move(sorted);
    t.interleaving = infer_interleaving(t.slots);
    return t;
}

Transcript parse_transcript(std::string_view text)
{
    std::istringstream in{std::string(text)};
    return parse_transcript(in);
}

void write_transcript(std::ostream& out, const Transcript& transcript)
{
    out << "# timeslot\tdirection\tsender_basis\tsender_bit\treceiver_basis\treceiver_bit\n";
    for (const SlotRecord& r : transcript.slots) {
        out << r.timeslot << '\t' << to_string(r.direction) << '\t' << basis_char(r.sender_basis) << '\t'
            << bit_char(r.sender_bit) << '\t' << basis_char(r.receiver_basis) << '\t';
        if (r.receiver_bit) {
            out << bit_char(*r.receiver_bit);
        } else {
            out << "LOST";
        }
        out << '\n';
    }
}

std::string_view to_string(Direction d)
{
    return d == Direction::AliceToBob ? "AB" : "BA";
}

std::string_view to_string(Interleaving rule)
{
    switch (rule) {
    case Interleaving::even_alice_to_bob:
        return "even_alice_to_bob";
    case Interleaving::explicit_directions:
        return "explicit";
    case Interleaving::odd_alice_to_bob:
        break;
    }
    return "odd_alice_to_bob";
}

std::optional<Interleaving> parse_interleaving(std::string_view text)
{
    if (text == "odd_alice_to_bob" || text == "odd") {
        return Interleaving::odd_alice_to_bob;
    }
    if (text == "even_alice_to_bob" || text == "even") {
        return Interleaving::even_alice_to_bob;
    }
    if (text == "explicit") {
        return Interleaving::explicit_directions;
    }
    return std::nullopt;
}

} // namespace dqkd
