#ifndef DQKD_TRANSCRIPT_HPP
#define DQKD_TRANSCRIPT_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dqkd/adversary.hpp"
#include "dqkd/quantum.hpp"

namespace dqkd {

enum class Direction : std::uint8_t { AliceToBob, BobToAlice };

enum class Party : std::uint8_t { Alice, Bob };

// How timeslots map to directions. `explicit_directions` means each record
// carries its own direction (e.g. two independent streams).
enum class Interleaving : std::uint8_t { odd_alice_to_bob, even_alice_to_bob, explicit_directions };

Direction direction_for(Timeslot timeslot, Interleaving rule);

constexpr Party sender_of(Direction d) { return d == Direction::AliceToBob ? Party::Alice : Party::Bob; }
constexpr Party receiver_of(Direction d) { return d == Direction::AliceToBob ? Party::Bob : Party::Alice; }

// Full ground truth for one timeslot: the (T, CB, BV) records of both ends.
struct SlotRecord {
    Timeslot timeslot{0};
    Direction direction{Direction::AliceToBob};
    Basis sender_basis{Basis::X};
    Bit sender_bit{Bit::zero};
    Basis receiver_basis{Basis::X};
    std::optional<Bit> receiver_bit; // nullopt iff the photon was lost

    bool lost() const { return !receiver_bit.has_value(); }
    bool bases_match() const { return sender_basis == receiver_basis; }

    Basis basis_of(Party p) const { return p == sender_of(direction) ? sender_basis : receiver_basis; }
    // The party's local bit value; nullopt for the receiver of a lost photon.
    std::optional<Bit> bit_of(Party p) const
    {
        return p == sender_of(direction) ? std::optional<Bit>(sender_bit) : receiver_bit;
    }

    friend bool operator==(const SlotRecord&, const SlotRecord&) = default;
};

struct Transcript {
    std::vector<SlotRecord> slots;
    Interleaving interleaving{Interleaving::odd_alice_to_bob};

    const SlotRecord* find(Timeslot t) const;
};

// Random choices made by the two endpoints for one slot.
struct SlotChoices {
    Basis sender_basis{Basis::X};
    Bit sender_bit{Bit::zero};
    Basis receiver_basis{Basis::X};
};

SlotChoices draw_choices(Rng& rng);

// Prepare -> Eve -> channel -> measure for one timeslot. Eve's record, if
// any, is appended to `eve_log`.
SlotRecord simulate_slot(Timeslot timeslot, Direction direction, const SlotChoices& choices,
                         const ChannelModel& channel, const EveStrategy& eve, Rng& rng,
                         std::vector<EveRecord>& eve_log);

// Replay format: one row per timeslot, whitespace separated
//
//   timeslot  direction  sender_basis  sender_bit  receiver_basis  receiver_bit
//
// direction is AB or BA, bases X or Y, bits 0 or 1, and receiver_bit may be
// LOST. '#' starts a comment; blank lines are ignored.
class TranscriptFormatError : public std::runtime_error {
public:
    TranscriptFormatError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

Transcript parse_transcript(std::istream& in);
Transcript parse_transcript(std::string_view text);
void write_transcript(std::ostream& out, const Transcript& transcript);

std::string_view to_string(Direction d);
std::string_view to_string(Interleaving rule);
std::optional<Interleaving> parse_interleaving(std::string_view text);

} // namespace dqkd

#endif
