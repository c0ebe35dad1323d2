#include "doctest.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dqkd/stats.hpp"
#include "test_support.hpp"

using namespace dqkd;

namespace {

double binomial_pmf(std::size_t n, std::size_t k)
{
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
}

} // namespace

TEST_CASE("closed-form pair error examples")
{
    CHECK(pair_error_probability(EveStrategy::absent(), {}) == 0.0);
    CHECK(pair_error_probability(EveStrategy::intercept_resend(1.0), {}) == doctest::Approx(3.0 / 8.0));
    CHECK(pair_error_from_slot(0.5) == doctest::Approx(0.5));
    CHECK(slot_error_from_pair(3.0 / 8.0) == doctest::Approx(0.25));
    CHECK(slot_error_from_pair(0.0) == 0.0);
    CHECK(slot_error_from_pair(0.9) == 0.5);
}

TEST_CASE("closed-form slot error matches exhaustive enumeration")
{
    for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        for (double flip : {0.0, 0.01, 0.05, 0.3}) {
            for (auto policy : {EveBasisPolicy::uniform_random, EveBasisPolicy::always_X, EveBasisPolicy::always_Y}) {
                const double oracle = test::enumerate_slot_error(f, policy, flip);
                CHECK(slot_error_probability(EveStrategy::intercept_resend(f, policy), {0.0, flip}) ==
                      doctest::Approx(oracle).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("pair error exhaustive parity composition")
{
    // a pair fails iff exactly one of two independent slots errs
    for (double p : {0.0, 0.1, 0.25, 0.5, 0.8}) {
        double odd = 0.0;
        for (int e2 = 0; e2 < 2; ++e2) {
            for (int e3 = 0; e3 < 2; ++e3) {
                if ((e2 ^ e3) == 1) {
                    odd += (e2 ? p : 1 - p) * (e3 ? p : 1 - p);
                }
            }
        }
        CHECK(pair_error_from_slot(p) == doctest::Approx(odd));
    }
}

TEST_CASE("undetected probability")
{
    CHECK(undetected_probability(0, 0.375) == 1.0);
    CHECK(undetected_probability(10, 0.375) == doctest::Approx(0.009094947).epsilon(1e-6));
    for (std::size_t n : {0u, 1u, 50u}) {
        CHECK(undetected_probability(n, 0.0) == 1.0);
    }
    for (double p : {0.01, 0.375, 1.0}) {
        for (std::size_t n = 0; n < 40; ++n) {
            CHECK(undetected_probability(n + 1, p) <= undetected_probability(n, p));
            if (p < 1.0) {
                CHECK(undetected_probability(n + 1, p) < undetected_probability(n, p));
            }
        }
    }
    CHECK(undetected_probability(1, 1.0) == 0.0);
    CHECK_THROWS_AS(undetected_probability(3, 1.5), std::invalid_argument);
}

TEST_CASE("Monte Carlo pair failures match the closed form")
{
    for (double f : {0.0, 0.25, 0.5, 1.0}) {
        for (double flip : {0.0, 0.01, 0.05}) {
            std::size_t checked = 0;
            std::size_t failed = 0;
            for (std::uint64_t s = 0; checked < 100000; ++s) {
                DuplexConfig c;
                c.n_timeslots = 4000;
                c.channel = {0.0, flip};
                c.eve = f > 0 ? EveStrategy::intercept_resend(f) : EveStrategy::absent();
                c.seed = session_seed(static_cast<std::uint64_t>(f * 1000 + flip * 100000), s);
                const DuplexOutcome out = run_duplex_session(c);
                checked += out.analysis.verification.checked_pairs;
                failed += out.analysis.verification.failures.size();
            }
            const double p = pair_error_probability(EveStrategy::intercept_resend(f), {0.0, flip});
            const double freq = static_cast<double>(failed) / static_cast<double>(checked);
            INFO("intercept=" << f << " flip=" << flip << " freq=" << freq << " p=" << p);
            if (p == 0.0) {
                CHECK(failed == 0);
            } else {
                CHECK(std::abs(freq - p) <= 3.0 * test::bernoulli_sigma(p, checked));
            }
        }
    }
}

TEST_CASE("session detection at ten pairs matches (5/8)^10")
{
    constexpr std::size_t sessions = 100000;
    std::size_t undetected = 0;
    for (std::uint64_t s = 0; s < sessions; ++s) {
        DuplexConfig c;
        c.n_timeslots = 200;
        c.eve = EveStrategy::intercept_resend(1.0);
        c.options.max_pairs = 10;
        c.seed = session_seed(77, s);
        const DuplexOutcome out = run_duplex_session(c);
        REQUIRE(out.analysis.verification.checked_pairs == 10);
        undetected += out.analysis.detected ? 0 : 1;
    }
    const double p = undetected_probability(10, 3.0 / 8.0);
    const double freq = static_cast<double>(undetected) / sessions;
    CHECK(std::abs(freq - p) <= 3.0 * test::bernoulli_sigma(p, sessions));
}

TEST_CASE("Eve information per triple")
{
    const BasisAnnouncement bases{{2, Basis::X}, {3, Basis::X}, {5, Basis::Y}, {6, Basis::Y}};
    SUBCASE("flip 1 without interception")
    {
        const auto info = eve_information(std::vector<Triple>{{3, 2, Bit::one}}, {}, bases);
        REQUIRE(info.per_triple.size() == 1);
        CHECK(info.per_triple[0].candidates ==
              std::vector<BitPair>{{Bit::zero, Bit::one}, {Bit::one, Bit::zero}});
        CHECK(info.per_triple[0].bits_revealed == 1);
        CHECK_FALSE(info.per_triple[0].key_exposed);
        CHECK(info.bits_revealed == 1);
        CHECK(info.exposed_key_bits == 0);
    }
    SUBCASE("flip 0 without interception")
    {
        const auto info = eve_information(std::vector<Triple>{{5, 6, Bit::zero}}, {}, bases);
        CHECK(info.per_triple[0].candidates ==
              std::vector<BitPair>{{Bit::zero, Bit::zero}, {Bit::one, Bit::one}});
    }
    SUBCASE("matching-basis interception on the set-2 slot exposes the key bit")
    {
        const std::vector<EveRecord> eve{{3, Basis::X, Bit::one}};
        const auto info = eve_information(std::vector<Triple>{{3, 2, Bit::one}}, eve, bases);
        CHECK(info.per_triple[0].candidates == std::vector<BitPair>{{Bit::one, Bit::zero}});
        CHECK(info.per_triple[0].key_exposed);
        CHECK(info.per_triple[0].informative_records.size() == 1);
        CHECK(info.exposed_key_bits == 1);
    }
    SUBCASE("matching-basis interception on the set-3 slot also exposes it")
    {
        const std::vector<EveRecord> eve{{2, Basis::X, Bit::zero}};
        const auto info = eve_information(std::vector<Triple>{{3, 2, Bit::one}}, eve, bases);
        CHECK(info.per_triple[0].candidates == std::vector<BitPair>{{Bit::one, Bit::zero}});
        CHECK(info.per_triple[0].key_exposed);
    }
    SUBCASE("wrong-basis interception teaches nothing")
    {
        const std::vector<EveRecord> eve{{3, Basis::Y, Bit::one}};
        const auto info = eve_information(std::vector<Triple>{{3, 2, Bit::one}}, eve, bases);
        CHECK(info.per_triple[0].candidates.size() == 2);
        CHECK_FALSE(info.per_triple[0].key_exposed);
        CHECK(info.per_triple[0].informative_records.empty());
    }
}

TEST_CASE("flip bit leaks nothing about the key bit")
{
    // exhaustive over the four equally likely pair values
    std::array<std::array<double, 2>, 2> flip_vs_key{};
    std::array<std::array<double, 2>, 2> flip_vs_set3{};
    for (Bit b2 : {Bit::zero, Bit::one}) {
        for (Bit b3 : {Bit::zero, Bit::one}) {
            const TripleList tl = make_triples_flip(std::vector<SlotBit>{{1, b2}}, std::vector<SlotBit>{{2, b3}});
            const Triple& tr = tl.triples.at(0);
            CHECK(tr.flip == (b2 ^ b3));
            const Bit key = extract_key(tl.triples, LocalRecords{{1, b2}, {2, b3}}).at(0);
            flip_vs_key[to_int(tr.flip)][to_int(key)] += 1.0;
            flip_vs_set3[to_int(tr.flip)][to_int(b3)] += 1.0;
            const auto info = eve_information(tl.triples, {}, {});
            CHECK(info.per_triple[0].candidates.size() == 2);
        }
    }
    CHECK(mutual_information_bits(flip_vs_key) == 0.0);
    CHECK(mutual_information_bits(flip_vs_set3) == 0.0);
    // sanity: identical variables share one bit
    CHECK(mutual_information_bits({{{2.0, 0.0}, {0.0, 2.0}}}) == doctest::Approx(1.0));
}

TEST_CASE("estimates")
{
    const Estimate p = proportion_estimate(25, 100);
    CHECK(p.value == doctest::Approx(0.25));
    CHECK(p.half_width == doctest::Approx(1.96 * std::sqrt(0.25 * 0.75 / 100)));
    CHECK(p.samples == 100);
    CHECK(proportion_estimate(0, 0).samples == 0);

    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const Estimate m = mean_estimate(v);
    CHECK(m.value == doctest::Approx(2.5));
    CHECK(m.half_width == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0 / 4.0)));
}

TEST_CASE("exact binomial interval")
{
    const auto [lo0, hi0] = exact_binomial_interval(0, 10);
    CHECK(lo0 == 0.0);
    CHECK(hi0 == doctest::Approx(1.0 - std::pow(0.025, 0.1)));
    const auto [lo1, hi1] = exact_binomial_interval(10, 10);
    CHECK(lo1 == doctest::Approx(std::pow(0.025, 0.1)));
    CHECK(hi1 == 1.0);
    const auto [lo, hi] = exact_binomial_interval(5, 20);
    CHECK(lo < 0.25);
    CHECK(hi > 0.25);
    CHECK_THROWS(exact_binomial_interval(3, 0));
}

TEST_CASE("session reports conserve slot accounting")
{
    for (std::uint64_t s = 0; s < 100; ++s) {
        DuplexConfig d;
        d.n_timeslots = 150;
        d.channel = {0.1, 0.02};
        d.seed = s;
        const SessionReport r = make_report(run_duplex_session(d), s, d.seed);
        CHECK(r.sifted == 2 * r.sifted_or_paired + r.unpaired);
        CHECK(r.failures <= r.sifted_or_paired);

        Bb84Config b;
        b.n_timeslots = 150;
        b.channel = {0.1, 0.02};
        b.error_threshold = 1.0;
        b.seed = s;
        const SessionReport q = make_report(run_bb84(b), s, b.seed);
        CHECK(q.sifted == q.key_length + q.sampled);
        CHECK(q.failures <= q.sampled);
    }
}

TEST_CASE("aggregate rejects empty and mixed input")
{
    CHECK_THROWS_AS(aggregate(std::vector<SessionReport>{}), std::invalid_argument);
    SessionReport a;
    a.protocol = Protocol::bb84;
    SessionReport b;
    b.protocol = Protocol::duplex;
    CHECK_THROWS_AS(aggregate(std::vector<SessionReport>{a, b}), std::invalid_argument);
}

TEST_CASE("protocol comparison: noiseless key yield")
{
    constexpr std::size_t n = 200;
    constexpr std::size_t sessions = 10000;
    constexpr double sample_fraction = 0.5;

    // Exact expectations by enumerating binomial counts.
    // duplex: key = min(|set2|, |set3|), each ~ Bin(n/2, 1/2)
    double duplex_expected = 0.0;
    for (std::size_t a = 0; a <= n / 2; ++a) {
        for (std::size_t b = 0; b <= n / 2; ++b) {
            duplex_expected += binomial_pmf(n / 2, a) * binomial_pmf(n / 2, b) * static_cast<double>(std::min(a, b));
        }
    }
    // bb84: key = S - ceil(f S), S ~ Bin(n, 1/2)
    double bb84_expected = 0.0;
    double bb84_unsampled = 0.0;
    for (std::size_t s = 0; s <= n; ++s) {
        bb84_expected += binomial_pmf(n, s) * (s - std::ceil(sample_fraction * s));
        bb84_unsampled += binomial_pmf(n, s) * static_cast<double>(s);
    }

    std::vector<SessionReport> duplex;
    std::vector<SessionReport> bb84;
    for (std::uint64_t s = 0; s < sessions; ++s) {
        DuplexConfig d;
        d.n_timeslots = n;
        d.seed = session_seed(5, s);
        duplex.push_back(make_report(run_duplex_session(d), s, d.seed));
        Bb84Config b;
        b.n_timeslots = n;
        b.sample_fraction = sample_fraction;
        b.seed = session_seed(6, s);
        bb84.push_back(make_report(run_bb84(b), s, b.seed));
    }
    const ComparisonTable t = compare_protocols(duplex, bb84);
    REQUIRE(t.rows.size() == 2);
    const ComparisonRow& dr = t.rows[0];
    const ComparisonRow& br = t.rows[1];
    CHECK(dr.protocol == Protocol::duplex);
    CHECK(br.protocol == Protocol::bb84);
    // 1.96 -> 3 sigma
    const double z = 3.0 / 1.96;
    CHECK(std::abs(dr.key_rate.value - duplex_expected / n) <= z * dr.key_rate.half_width);
    CHECK(std::abs(br.key_rate.value - bb84_expected / n) <= z * br.key_rate.half_width);
    CHECK(br.key_rate_without_sampling == doctest::Approx(bb84_unsampled / n).epsilon(0.01));
    CHECK(dr.mean_bits_sacrificed == 0.0);
    CHECK(br.mean_bits_sacrificed > 0.0);
    CHECK(dr.detection_rate.value == 0.0);

    std::ostringstream dsv;
    write_comparison_dsv(dsv, t);
    CHECK(dsv.str().find("duplex,10000,200,") != std::string::npos);
}

TEST_CASE("protocol comparison edge cases")
{
    SessionReport d;
    d.protocol = Protocol::duplex;
    SessionReport b;
    b.protocol = Protocol::bb84;
    CHECK_THROWS_AS(compare_protocols({}, std::vector{b}), std::invalid_argument);
    CHECK_THROWS_AS(compare_protocols(std::vector{d}, {}), std::invalid_argument);

    // every session aborted
    std::vector<SessionReport> aborted;
    for (std::uint64_t s = 0; s < 50; ++s) {
        DuplexConfig c;
        c.n_timeslots = 200;
        c.channel = {0.0, 0.5};
        c.seed = s;
        aborted.push_back(make_report(run_duplex_session(c), s, c.seed));
        REQUIRE_FALSE(aborted.back().accepted);
    }
    const ComparisonTable t = compare_protocols(aborted, std::vector{b});
    CHECK(t.rows[0].key_rate.value == 0.0);
    CHECK(t.rows[0].detection_rate.value == 1.0);
}

TEST_CASE("format_double is shortest round trip")
{
    CHECK(format_double(0.25) == "0.25");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
}
