#include "dqkd/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>

namespace dqkd {

double slot_error_probability(const EveStrategy& eve, const ChannelModel& channel)
{
    eve.validate();
    channel.validate();
    const double p_eve = eve.kind == EveKind::absent ? 0.0 : 0.25 * eve.intercept_fraction;
    const double p_chan = channel.flip_probability;
    return p_eve + p_chan - 2.0 * p_eve * p_chan;
}

double pair_error_from_slot(double p_slot)
{
    return 2.0 * p_slot * (1.0 - p_slot);
}

double pair_error_probability(const EveStrategy& eve, const ChannelModel& channel)
{
    return pair_error_from_slot(slot_error_probability(eve, channel));
}

double slot_error_from_pair(double p_pair)
{
    if (p_pair >= 0.5) {
        return 0.5;
    }
    return 0.5 * (1.0 - std::sqrt(1.0 - 2.0 * std::max(p_pair, 0.0)));
}

double undetected_probability(std::size_t n_pairs, double p_pair)
{
    require_probability(p_pair, "p_pair");
    return std::pow(1.0 - p_pair, static_cast<double>(n_pairs));
}

EveInformation eve_information(std::span<const Triple> triples, std::span<const EveRecord> eve_records,
                               const BasisAnnouncement& announced_bases)
{
    std::map<Timeslot, Basis> bases;
    for (const AnnouncedBasis& a : announced_bases) {
        bases[a.timeslot] = a.basis;
    }
    std::map<Timeslot, EveRecord> seen;
    for (const EveRecord& r : eve_records) {
        seen[r.timeslot] = r;
    }
    // Eve learns the sent bit only when she measured in the basis later announced.
    auto informative = [&](Timeslot t) -> const EveRecord* {
        const auto rec = seen.find(t);
        const auto basis = bases.find(t);
        if (rec == seen.end() || basis == bases.end() || rec->second.measured_basis != basis->second) {
            return nullptr;
        }
        return &rec->second;
    };

    EveInformation out;
    for (const Triple& tr : triples) {
        PairLeak leak;
        leak.triple = tr;
        for (Bit b : {Bit::zero, Bit::one}) {
            leak.candidates.push_back({b, b ^ tr.flip});
        }
        if (const EveRecord* r = informative(tr.t_set2)) {
            leak.informative_records.push_back(*r);
            std::erase_if(leak.candidates, [r](const BitPair& c) { return c.set2 != r->measured_bit; });
        }
        if (const EveRecord* r = informative(tr.t_set3)) {
            leak.informative_records.push_back(*r);
            std::erase_if(leak.candidates, [r](const BitPair& c) { return c.set3 != r->measured_bit; });
        }
        leak.key_exposed = leak.candidates.size() == 1;
        out.bits_revealed += static_cast<std::size_t>(leak.bits_revealed);
        out.exposed_key_bits += leak.key_exposed ? 1 : 0;
        out.per_triple.push_back(std::move(leak));
    }
    return out;
}

double mutual_information_bits(const std::array<std::array<double, 2>, 2>& joint)
{
    double total = 0.0;
    std::array<double, 2> row{0.0, 0.0};
    std::array<double, 2> col{0.0, 0.0};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            total += joint[i][j];
            row[i] += joint[i][j];
            col[j] += joint[i][j];
        }
    }
    if (total <= 0.0) {
        return 0.0;
    }
    double mi = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            if (joint[i][j] > 0.0) {
                const double pij = joint[i][j] / total;
                mi += pij * std::log2(pij * total * total / (row[i] * col[j]));
            }
        }
    }
    return mi;
}

Estimate proportion_estimate(std::size_t successes, std::size_t trials, double z)
{
    Estimate e;
    e.samples = trials;
    if (trials == 0) {
        return e;
    }
    const double n = static_cast<double>(trials);
    e.value = static_cast<double>(successes) / n;
    e.half_width = z * std::sqrt(e.value * (1.0 - e.value) / n);
    return e;
}

Estimate mean_estimate(std::span<const double> values, double z)
{
    Estimate e;
    e.samples = values.size();
    if (values.empty()) {
        return e;
    }
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    e.value = sum / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - e.value) * (v - e.value);
        }
        e.half_width = z * std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

std::pair<double, double> exact_binomial_interval(std::size_t successes, std::size_t trials, double confidence)
{
    if (trials == 0 || successes > trials) {
        throw std::invalid_argument("exact_binomial_interval needs successes <= trials and trials > 0");
    }
    const double alpha = 1.0 - confidence;
    const auto k = static_cast<double>(successes);
    const auto n = static_cast<double>(trials);
    double lo = 0.0;
    double hi = 1.0;
    if (successes > 0) {
        lo = boost::math::quantile(boost::math::beta_distribution<double>(k, n - k + 1.0), alpha / 2.0);
    }
    if (successes < trials) {
        hi = boost::math::quantile(boost::math::beta_distribution<double>(k + 1.0, n - k), 1.0 - alpha / 2.0);
    }
    return {lo, hi};
}

namespace {

double ratio(std::size_t num, std::size_t den)
{
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

SessionReport make_report(const Bb84Outcome& outcome, std::uint64_t session_index, std::uint64_t seed)
{
    SessionReport r;
    r.protocol = Protocol::bb84;
    r.session_index = session_index;
    r.seed = seed;
    r.n_timeslots = outcome.n_timeslots;
    r.sifted = outcome.sifted_records.size();
    r.sifted_or_paired = r.sifted;
    r.sampled = outcome.sampled_timeslots.size();
    r.failures = outcome.sample_mismatches;
    r.estimated_error_rate = outcome.estimated_error_rate;
    r.true_error_rate = outcome.sifted_error_rate;
    r.detected = outcome.detected;
    r.accepted = !outcome.detected;
    // a flagged session keeps no key
    if (r.accepted) {
        r.key_length = outcome.key_bits_alice.size();
        for (std::size_t i = 0; i < r.key_length; ++i) {
            r.key_disagreements += outcome.key_bits_alice[i] != outcome.key_bits_bob[i] ? 1 : 0;
        }
    }
    r.keys_agree = r.key_disagreements == 0;
    r.eve_intercepts = outcome.eve_records.size();
    r.bits_sacrificed = r.sampled;
    return r;
}

SessionReport make_report(const DuplexOutcome& outcome, std::uint64_t session_index, std::uint64_t seed)
{
    const Transcript& transcript = outcome.transmission.transcript;
    const DuplexAnalysis& a = outcome.analysis;

    SessionReport r;
    r.protocol = Protocol::duplex;
    r.session_index = session_index;
    r.seed = seed;
    r.n_timeslots = transcript.slots.size();
    r.sifted = a.partition.set2.size() + a.partition.set3.size();
    r.sifted_or_paired = a.verification.checked_pairs;
    r.unpaired = a.unpaired.size();
    r.failures = a.verification.failures.size();
    r.pair_error_rate = a.pair_error_rate;
    r.estimated_error_rate = slot_error_from_pair(a.pair_error_rate);

    std::size_t matched_errors = 0;
    for (const SlotRecord& s : transcript.slots) {
        if (!s.lost() && s.bases_match() && *s.receiver_bit != s.sender_bit) {
            ++matched_errors;
        }
    }
    r.true_error_rate = ratio(matched_errors, r.sifted);

    r.key_length = a.alice_key.size();
    r.key_disagreements = a.key_disagreements.size();
    r.keys_agree = r.key_disagreements == 0;
    r.eve_intercepts = outcome.transmission.eve_records.size();
    const EveInformation info =
        eve_information(a.triples, outcome.transmission.eve_records, a.messages.alice_bases);
    r.eve_pair_bits_revealed = info.bits_revealed;
    r.eve_exposed_key_bits = a.keyed && a.accepted ? info.exposed_key_bits : 0;
    r.bits_sacrificed = 0;
    r.detected = a.detected;
    r.accepted = a.accepted;
    return r;
}

AggregateStats aggregate(std::span<const SessionReport> reports)
{
    if (reports.empty()) {
        throw std::invalid_argument("cannot aggregate zero sessions");
    }
    AggregateStats s;
    s.protocol = reports.front().protocol;
    s.sessions = reports.size();

    std::size_t detected = 0;
    std::size_t accepted = 0;
    std::vector<double> errors;
    std::vector<double> true_errors;
    std::vector<double> key_rates;
    double key_sum = 0.0;
    for (const SessionReport& r : reports) {
        if (r.protocol != s.protocol) {
            throw std::invalid_argument("cannot aggregate reports of different protocols");
        }
        detected += r.detected ? 1 : 0;
        accepted += r.accepted ? 1 : 0;
        errors.push_back(r.estimated_error_rate);
        true_errors.push_back(r.true_error_rate);
        key_rates.push_back(ratio(r.key_length, r.n_timeslots));
        key_sum += static_cast<double>(r.key_length);
        s.total_failures += r.failures;
        s.total_checked += r.protocol == Protocol::duplex ? r.sifted_or_paired : r.sampled;
        s.sessions_keys_disagree += r.keys_agree ? 0 : 1;
    }
    s.detection_rate = proportion_estimate(detected, s.sessions);
    s.accept_rate = proportion_estimate(accepted, s.sessions);
    s.mean_error_rate = mean_estimate(errors);
    s.mean_true_error_rate = mean_estimate(true_errors);
    s.key_rate = mean_estimate(key_rates);
    s.pair_failure_rate = proportion_estimate(s.total_failures, s.total_checked);
    s.mean_key_length = key_sum / static_cast<double>(s.sessions);
    return s;
}

namespace {

ComparisonRow comparison_row(std::span<const SessionReport> reports)
{
    const AggregateStats s = aggregate(reports);
    ComparisonRow row;
    row.protocol = s.protocol;
    row.sessions = s.sessions;
    row.mean_key_length = s.mean_key_length;
    row.key_rate = s.key_rate;
    row.detection_rate = s.detection_rate;
    row.mean_error_rate = s.mean_error_rate.value;
    double timeslots = 0.0;
    double sacrificed = 0.0;
    double unsampled_rate = 0.0;
    for (const SessionReport& r : reports) {
        timeslots += static_cast<double>(r.n_timeslots);
        sacrificed += static_cast<double>(r.bits_sacrificed);
        const std::size_t kept = r.protocol == Protocol::bb84 && r.accepted ? r.key_length + r.sampled : r.key_length;
        unsampled_rate += ratio(kept, r.n_timeslots);
    }
    const double n = static_cast<double>(reports.size());
    row.mean_timeslots = timeslots / n;
    row.mean_bits_sacrificed = sacrificed / n;
    row.key_rate_without_sampling = unsampled_rate / n;
    return row;
}

} // namespace

ComparisonTable compare_protocols(std::span<const SessionReport> duplex_reports,
                                  std::span<const SessionReport> bb84_reports)
{
    if (duplex_reports.empty() || bb84_reports.empty()) {
        throw std::invalid_argument("protocol comparison needs at least one session of each protocol");
    }
    ComparisonTable t;
    t.rows.push_back(comparison_row(duplex_reports));
    t.rows.push_back(comparison_row(bb84_reports));
    if (t.rows[0].protocol != Protocol::duplex || t.rows[1].protocol != Protocol::bb84) {
        throw std::invalid_argument("protocol comparison got reports for the wrong protocol");
    }
    return t;
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_reports_dsv(std::ostream& out, std::span<const SessionReport> reports, char sep)
{
    out << "session" << sep << "seed" << sep << "protocol" << sep << "n_timeslots" << sep << "sifted" << sep
        << "sifted_or_paired" << sep << "sampled" << sep << "unpaired" << sep << "failures" << sep
        << "estimated_error_rate" << sep << "pair_error_rate" << sep << "true_error_rate" << sep << "key_length"
        << sep << "keys_agree" << sep << "eve_intercepts" << sep << "eve_pair_bits_revealed" << sep
        << "eve_exposed_key_bits" << sep << "bits_sacrificed" << sep << "detected" << sep << "accepted" << '\n';
    for (const SessionReport& r : reports) {
        out << r.session_index << sep << r.seed << sep << to_string(r.protocol) << sep << r.n_timeslots << sep
            << r.sifted << sep << r.sifted_or_paired << sep << r.sampled << sep << r.unpaired << sep << r.failures
            << sep << format_double(r.estimated_error_rate) << sep << format_double(r.pair_error_rate) << sep
            << format_double(r.true_error_rate) << sep << r.key_length << sep << (r.keys_agree ? 1 : 0) << sep
            << r.eve_intercepts << sep << r.eve_pair_bits_revealed << sep << r.eve_exposed_key_bits << sep
            << r.bits_sacrificed << sep << (r.detected ? 1 : 0) << sep << (r.accepted ? 1 : 0) << '\n';
    }
}

void write_comparison_dsv(std::ostream& out, const ComparisonTable& table, char sep)
{
    out << "protocol" << sep << "sessions" << sep << "mean_timeslots" << sep << "mean_key_length" << sep
        << "key_rate" << sep << "key_rate_hw" << sep << "key_rate_without_sampling" << sep
        << "mean_bits_sacrificed" << sep << "detection_rate" << sep << "detection_rate_hw" << sep
        << "mean_error_rate" << '\n';
    for (const ComparisonRow& r : table.rows) {
        out << to_string(r.protocol) << sep << r.sessions << sep << format_double(r.mean_timeslots) << sep
            << format_double(r.mean_key_length) << sep << format_double(r.key_rate.value) << sep
            << format_double(r.key_rate.half_width) << sep << format_double(r.key_rate_without_sampling) << sep
            << format_double(r.mean_bits_sacrificed) << sep << format_double(r.detection_rate.value) << sep
            << format_double(r.detection_rate.half_width) << sep << format_double(r.mean_error_rate) << '\n';
    }
}

void write_sweep_dsv(std::ostream& out, const SweepResult& sweep, char sep)
{
    out << "intercept_fraction" << sep << "flip_probability" << sep << "loss_probability" << sep << "n_timeslots"
        << sep << "protocol" << sep << "sessions" << sep << "detection_rate" << sep << "detection_rate_hw" << sep
        << "mean_qber" << sep << "mean_qber_hw" << sep << "mean_key_rate" << sep << "mean_key_rate_hw" << sep
        << "pair_failure_rate" << '\n';
    for (const SweepCell& c : sweep.cells) {
        out << format_double(c.point.intercept_fraction) << sep << format_double(c.point.flip_probability) << sep
            << format_double(c.point.loss_probability) << sep << c.point.n_timeslots << sep
            << to_string(c.stats.protocol) << sep << c.stats.sessions << sep
            << format_double(c.stats.detection_rate.value) << sep << format_double(c.stats.detection_rate.half_width)
            << sep << format_double(c.stats.mean_error_rate.value) << sep
            << format_double(c.stats.mean_error_rate.half_width) << sep << format_double(c.stats.key_rate.value)
            << sep << format_double(c.stats.key_rate.half_width) << sep
            << format_double(c.stats.pair_failure_rate.value) << '\n';
    }
}

std::string_view to_string(Protocol p)
{
    return p == Protocol::bb84 ? "bb84" : "duplex";
}

std::optional<Protocol> parse_protocol(std::string_view text)
{
    if (text == "bb84") {
        return Protocol::bb84;
    }
    if (text == "duplex") {
        return Protocol::duplex;
    }
    return std::nullopt;
}

} // namespace dqkd
