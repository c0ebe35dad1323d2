#include "dqkd/app.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "dqkd/bb84.hpp"
#include "dqkd/random.hpp"
#include "json.hpp"

namespace dqkd {

using Json = nlohmann::ordered_json;

void RunConfig::validate() const
{
    if (sessions == 0) {
        throw std::invalid_argument("sessions must be at least 1");
    }
    channel.validate();
    require_probability(intercept_fraction, "intercept_fraction");
    require_probability(error_threshold, "error_threshold");
    require_probability(max_pair_error_rate, "max_pair_error_rate");
    const bool needs_bb84 = protocol == Protocol::bb84 || compare;
    const bool needs_duplex = protocol == Protocol::duplex || compare;
    if (needs_bb84) {
        if (n_timeslots == 0) {
            throw std::invalid_argument("n_timeslots must be at least 1");
        }
        if (!(sample_fraction > 0.0 && sample_fraction < 1.0)) {
            throw std::invalid_argument("sample_fraction must be in (0, 1)");
        }
    }
    if (needs_duplex) {
        if (n_timeslots < 2) {
            throw std::invalid_argument("n_timeslots must be at least 2 for duplex sessions");
        }
        if (interleaving == Interleaving::explicit_directions) {
            throw std::invalid_argument("simulated runs need an odd or even interleaving");
        }
    }
}

EveStrategy RunConfig::eve() const
{
    if (intercept_fraction <= 0.0) {
        return EveStrategy::absent();
    }
    return EveStrategy::intercept_resend(intercept_fraction, eve_basis);
}

DuplexOptions RunConfig::duplex_options() const
{
    DuplexOptions o;
    o.variant = variant;
    o.failure_policy = failure_policy;
    o.max_pair_error_rate = max_pair_error_rate;
    o.search_pairs_as_key = search_pairs_as_key;
    o.max_pairs = max_pairs;
    return o;
}

SessionReport run_session(const RunConfig& config, Protocol protocol, std::uint64_t index)
{
    const std::uint64_t seed = session_seed(config.seed, index);
    if (protocol == Protocol::bb84) {
        Bb84Config c;
        c.n_timeslots = config.n_timeslots;
        c.channel = config.channel;
        c.eve = config.eve();
        c.sample_fraction = config.sample_fraction;
        c.error_threshold = config.error_threshold;
        c.seed = seed;
        return make_report(run_bb84(c), index, seed);
    }
    DuplexConfig c;
    c.n_timeslots = config.n_timeslots;
    c.channel = config.channel;
    c.eve = config.eve();
    c.interleaving = config.interleaving;
    c.options = config.duplex_options();
    c.seed = seed;
    return make_report(run_duplex_session(c), index, seed);
}

namespace {

// Runs fn(i) for i in [0, count) on a bounded pool; results land by index.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn)
{
    if (threads == 0) {
        threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    }
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) {
                            failure = std::current_exception();
                        }
                        next = count;
                    }
                }
            });
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

std::vector<SessionReport> run_sessions(const RunConfig& config, Protocol protocol)
{
    std::vector<SessionReport> reports(config.sessions);
    parallel_for(config.sessions, config.threads,
                 [&](std::size_t i) { reports[i] = run_session(config, protocol, i); });
    return reports;
}

} // namespace

RunResult execute_run(const RunConfig& config)
{
    config.validate();
    RunResult result;
    result.config = config;
    result.sessions = run_sessions(config, config.protocol);
    result.aggregate = aggregate(result.sessions);
    if (config.compare) {
        const Protocol other = config.protocol == Protocol::bb84 ? Protocol::duplex : Protocol::bb84;
        result.baseline_sessions = run_sessions(config, other);
        const auto& duplex = config.protocol == Protocol::duplex ? result.sessions : result.baseline_sessions;
        const auto& bb84 = config.protocol == Protocol::bb84 ? result.sessions : result.baseline_sessions;
        result.comparison = compare_protocols(duplex, bb84);
    }
    return result;
}

bool SweepGrid::empty() const
{
    return intercept_fraction.empty() || flip_probability.empty() || loss_probability.empty() ||
           n_timeslots.empty();
}

SweepResult execute_sweep(const RunConfig& base, const SweepGrid& grid)
{
    if (grid.empty()) {
        throw std::invalid_argument("sweep grid is empty");
    }
    SweepResult result;
    for (std::size_t n : grid.n_timeslots) {
        for (double loss : grid.loss_probability) {
            for (double flip : grid.flip_probability) {
                for (double intercept : grid.intercept_fraction) {
                    RunConfig cell = base;
                    cell.compare = false;
                    cell.n_timeslots = n;
                    cell.channel.loss_probability = loss;
                    cell.channel.flip_probability = flip;
                    cell.intercept_fraction = intercept;
                    cell.validate();
                    const auto reports = run_sessions(cell, cell.protocol);
                    result.cells.push_back({{intercept, flip, loss, n}, aggregate(reports)});
                }
            }
        }
    }
    return result;
}

ReplayResult replay_transcript(Transcript transcript, const DuplexOptions& options)
{
    ReplayResult r;
    r.transcript = std::move(transcript);
    r.options = options;
    r.analysis = analyze_duplex(r.transcript, options);
    return r;
}

// ---- JSON ------------------------------------------------------------------

namespace {

Json to_json(const Estimate& e)
{
    return Json{{"value", e.value}, {"half_width", e.half_width}, {"samples", e.samples}};
}

Json to_json(const RunConfig& c)
{
    return Json{{"protocol", to_string(c.protocol)},
                {"variant", to_string(c.variant)},
                {"n_timeslots", c.n_timeslots},
                {"loss", c.channel.loss_probability},
                {"flip", c.channel.flip_probability},
                {"intercept", c.intercept_fraction},
                {"eve_basis", to_string(c.eve_basis)},
                {"sample_fraction", c.sample_fraction},
                {"error_threshold", c.error_threshold},
                {"failure_policy", to_string(c.failure_policy)},
                {"max_pair_error_rate", c.max_pair_error_rate},
                {"search_pairs_as_key", c.search_pairs_as_key},
                {"max_pairs", c.max_pairs},
                {"interleaving", to_string(c.interleaving)},
                {"sessions", c.sessions},
                {"seed", c.seed},
                {"compare", c.compare}};
}

Json to_json(const SessionReport& r)
{
    return Json{{"session", r.session_index},
                {"seed", r.seed},
                {"protocol", to_string(r.protocol)},
                {"n_timeslots", r.n_timeslots},
                {"sifted", r.sifted},
                {"sifted_or_paired", r.sifted_or_paired},
                {"sampled", r.sampled},
                {"unpaired", r.unpaired},
                {"failures", r.failures},
                {"estimated_error_rate", r.estimated_error_rate},
                {"pair_error_rate", r.pair_error_rate},
                {"true_error_rate", r.true_error_rate},
                {"key_length", r.key_length},
                {"keys_agree", r.keys_agree},
                {"key_disagreements", r.key_disagreements},
                {"eve_intercepts", r.eve_intercepts},
                {"eve_pair_bits_revealed", r.eve_pair_bits_revealed},
                {"eve_exposed_key_bits", r.eve_exposed_key_bits},
                {"bits_sacrificed", r.bits_sacrificed},
                {"detected", r.detected},
                {"accepted", r.accepted}};
}

Json to_json(const AggregateStats& s)
{
    return Json{{"protocol", to_string(s.protocol)},
                {"sessions", s.sessions},
                {"detection_rate", to_json(s.detection_rate)},
                {"accept_rate", to_json(s.accept_rate)},
                {"mean_error_rate", to_json(s.mean_error_rate)},
                {"mean_true_error_rate", to_json(s.mean_true_error_rate)},
                {"key_rate", to_json(s.key_rate)},
                {"pair_failure_rate", to_json(s.pair_failure_rate)},
                {"mean_key_length", s.mean_key_length},
                {"total_checked", s.total_checked},
                {"total_failures", s.total_failures},
                {"sessions_keys_disagree", s.sessions_keys_disagree}};
}

Json to_json(const ComparisonTable& t)
{
    Json rows = Json::array();
    for (const ComparisonRow& r : t.rows) {
        rows.push_back(Json{{"protocol", to_string(r.protocol)},
                            {"sessions", r.sessions},
                            {"mean_timeslots", r.mean_timeslots},
                            {"mean_key_length", r.mean_key_length},
                            {"key_rate", to_json(r.key_rate)},
                            {"key_rate_without_sampling", r.key_rate_without_sampling},
                            {"mean_bits_sacrificed", r.mean_bits_sacrificed},
                            {"detection_rate", to_json(r.detection_rate)},
                            {"mean_error_rate", r.mean_error_rate}});
    }
    return rows;
}

Json to_json(const Triple& t)
{
    return Json::array({t.t_set2, t.t_set3, to_int(t.flip)});
}

Json bits_json(const std::vector<Bit>& bits)
{
    std::string s;
    s.reserve(bits.size());
    for (Bit b : bits) {
        s.push_back(bit_char(b));
    }
    return s;
}

} // namespace

std::string run_report_json(const RunResult& result)
{
    Json j;
    j["config"] = to_json(result.config);
    Json sessions = Json::array();
    for (const SessionReport& r : result.sessions) {
        sessions.push_back(to_json(r));
    }
    j["sessions"] = std::move(sessions);
    j["aggregate"] = to_json(result.aggregate);
    if (result.comparison) {
        j["baseline_aggregate"] = to_json(aggregate(result.baseline_sessions));
        j["comparison"] = to_json(*result.comparison);
    }
    return j.dump(2) + "\n";
}

std::string sweep_report_json(const RunConfig& base, const SweepGrid& grid, const SweepResult& sweep)
{
    Json j;
    j["config"] = to_json(base);
    j["grid"] = Json{{"intercept", grid.intercept_fraction},
                     {"flip", grid.flip_probability},
                     {"loss", grid.loss_probability},
                     {"n_timeslots", grid.n_timeslots}};
    Json cells = Json::array();
    for (const SweepCell& c : sweep.cells) {
        cells.push_back(Json{{"intercept", c.point.intercept_fraction},
                             {"flip", c.point.flip_probability},
                             {"loss", c.point.loss_probability},
                             {"n_timeslots", c.point.n_timeslots},
                             {"stats", to_json(c.stats)}});
    }
    j["cells"] = std::move(cells);
    return j.dump(2) + "\n";
}

std::string replay_report_json(const ReplayResult& replay)
{
    const DuplexAnalysis& a = replay.analysis;
    Json j;
    j["n_timeslots"] = replay.transcript.slots.size();
    j["interleaving"] = to_string(replay.transcript.interleaving);
    j["variant"] = to_string(a.variant);
    j["flip_applies_to"] = "set3";
    j["failure_policy"] = to_string(replay.options.failure_policy);
    j["discard"] = a.partition.discard;
    j["set2"] = a.partition.set2;
    j["set3"] = a.partition.set3;
    Json triples = Json::array();
    for (const Triple& t : a.triples) {
        triples.push_back(to_json(t));
    }
    j["triples"] = std::move(triples);
    j["unpaired"] = a.unpaired;
    Json failures = Json::array();
    for (const Triple& t : a.verification.failures) {
        failures.push_back(to_json(t));
    }
    j["verification"] = Json{{"checked_pairs", a.verification.checked_pairs},
                             {"failures", std::move(failures)},
                             {"pass", a.verification.pass}};
    j["detected"] = a.detected;
    j["accepted"] = a.accepted;
    j["keyed"] = a.keyed;
    j["alice_key"] = bits_json(a.alice_key);
    j["bob_key"] = bits_json(a.bob_key);
    j["keys_agree"] = a.key_disagreements.empty();
    j["key_disagreements"] = a.key_disagreements;
    j["eve_pair_bits_revealed"] = a.triples.size();
    return j.dump(2) + "\n";
}

void write_replay_text(std::ostream& out, const ReplayResult& replay)
{
    const DuplexAnalysis& a = replay.analysis;
    auto list = [&out](std::string_view label, const std::vector<Timeslot>& ts) {
        out << label << ':';
        for (Timeslot t : ts) {
            out << ' ' << t;
        }
        out << '\n';
    };
    out << "timeslots: " << replay.transcript.slots.size() << '\n';
    out << "variant: " << to_string(a.variant) << '\n';
    list("discard", a.partition.discard);
    list("set2", a.partition.set2);
    list("set3", a.partition.set3);
    out << "triples:";
    for (const Triple& t : a.triples) {
        out << " (" << t.t_set2 << ',' << t.t_set3 << ',' << to_int(t.flip) << ')';
    }
    out << '\n';
    list("unpaired", a.unpaired);
    out << "checked: " << a.verification.checked_pairs << '\n';
    out << "failures:";
    for (const Triple& t : a.verification.failures) {
        out << " (" << t.t_set2 << ',' << t.t_set3 << ',' << to_int(t.flip) << ')';
    }
    out << '\n';
    out << "verification: " << (a.verification.pass ? "pass" : "FAIL") << '\n';
    out << "alice_key: " << bits_json(a.alice_key).get<std::string>() << '\n';
    out << "bob_key: " << bits_json(a.bob_key).get<std::string>() << '\n';
}

void write_aggregate_dsv(std::ostream& out, const AggregateStats& s, char sep)
{
    out << "protocol" << sep << "sessions" << sep << "detection_rate" << sep << "detection_rate_hw" << sep
        << "mean_error_rate" << sep << "mean_error_rate_hw" << sep << "key_rate" << sep << "key_rate_hw" << sep
        << "pair_failure_rate" << sep << "pair_failure_rate_hw" << sep << "total_checked" << sep
        << "total_failures" << '\n';
    out << to_string(s.protocol) << sep << s.sessions << sep << format_double(s.detection_rate.value) << sep
        << format_double(s.detection_rate.half_width) << sep << format_double(s.mean_error_rate.value) << sep
        << format_double(s.mean_error_rate.half_width) << sep << format_double(s.key_rate.value) << sep
        << format_double(s.key_rate.half_width) << sep << format_double(s.pair_failure_rate.value) << sep
        << format_double(s.pair_failure_rate.half_width) << sep << s.total_checked << sep << s.total_failures
        << '\n';
}

std::string_view to_string(OutputFormat f)
{
    switch (f) {
    case OutputFormat::csv:
        return "csv";
    case OutputFormat::both:
        return "both";
    case OutputFormat::json:
        break;
    }
    return "json";
}

} // namespace dqkd
