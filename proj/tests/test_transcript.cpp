#include "doctest.h"

#include <sstream>

#include "dqkd/duplex.hpp"
#include "dqkd/transcript.hpp"
#include "test_support.hpp"

using namespace dqkd;

TEST_CASE("worked example fixture parses")
{
    const Transcript t = test::worked_example();
    REQUIRE(t.slots.size() == 20);
    CHECK(t.interleaving == Interleaving::odd_alice_to_bob);
    for (const SlotRecord& r : t.slots) {
        CHECK(r.direction == direction_for(r.timeslot, Interleaving::odd_alice_to_bob));
        CHECK_FALSE(r.lost());
    }
    const SlotRecord* s3 = t.find(3);
    REQUIRE(s3 != nullptr);
    CHECK(s3->sender_basis == Basis::X);
    CHECK(s3->sender_bit == Bit::one);
    CHECK(s3->bit_of(Party::Bob) == Bit::one);
    CHECK(t.find(21) == nullptr);
}

TEST_CASE("parser accepts LOST, comments and any row order")
{
    const Transcript t = parse_transcript("# header\n"
                                          "2 BA Y 1 Y LOST   # Alice saw nothing\n"
                                          "\n"
                                          "1\tAB\tX\t0\tX\t0\n");
    REQUIRE(t.slots.size() == 2);
    CHECK(t.slots[0].timeslot == 1);
    CHECK(t.slots[1].lost());
    CHECK_FALSE(t.slots[1].bit_of(Party::Alice).has_value());
    CHECK(t.slots[1].bit_of(Party::Bob) == Bit::one);
}

TEST_CASE("empty input is an empty transcript")
{
    CHECK(parse_transcript("").slots.empty());
    CHECK(parse_transcript("# nothing\n\n").slots.empty());
}

TEST_CASE("malformed rows name their line")
{
    auto line_of = [](std::string_view text) -> std::size_t {
        try {
            parse_transcript(text);
        } catch (const TranscriptFormatError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("1 AB X 1 X 1\n2 BA Q 0 X 0\n") == 2);
    CHECK(line_of("# c\n1 AB X 1 X\n") == 2);
    CHECK(line_of("0 AB X 1 X 1\n") == 1);
    CHECK(line_of("x AB X 1 X 1\n") == 1);
    CHECK(line_of("1 AC X 1 X 1\n") == 1);
    CHECK(line_of("1 AB X 2 X 1\n") == 1);
    CHECK(line_of("1 AB X 1 X lost\n") == 1);
    CHECK(line_of("1 AB X 1 X 1\n\n1 AB Y 0 Y 0\n") == 3);
}

TEST_CASE("write/parse round trip on random transcripts")
{
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const Transmission tx =
            run_duplex_transmission(2 + rng.below(60), {0.3, 0.1}, EveStrategy::intercept_resend(0.5), rng);
        std::ostringstream out;
        write_transcript(out, tx.transcript);
        const Transcript back = parse_transcript(out.str());
        CHECK(back.slots == tx.transcript.slots);
        CHECK(back.interleaving == tx.transcript.interleaving);
    }
}

TEST_CASE("interleaving rules")
{
    CHECK(direction_for(1, Interleaving::odd_alice_to_bob) == Direction::AliceToBob);
    CHECK(direction_for(2, Interleaving::odd_alice_to_bob) == Direction::BobToAlice);
    CHECK(direction_for(1, Interleaving::even_alice_to_bob) == Direction::BobToAlice);
    CHECK(direction_for(2, Interleaving::even_alice_to_bob) == Direction::AliceToBob);
    CHECK(parse_transcript("1 BA X 1 X 1\n2 AB X 1 X 1\n").interleaving == Interleaving::even_alice_to_bob);
    CHECK(parse_transcript("1 AB X 1 X 1\n3 BA X 1 X 1\n").interleaving == Interleaving::explicit_directions);
}
