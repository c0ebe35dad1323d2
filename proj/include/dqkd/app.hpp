#ifndef DQKD_APP_HPP
#define DQKD_APP_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dqkd/adversary.hpp"
#include "dqkd/duplex.hpp"
#include "dqkd/quantum.hpp"
#include "dqkd/stats.hpp"
#include "dqkd/transcript.hpp"

namespace dqkd {

enum class OutputFormat : std::uint8_t { json, csv, both };

struct RunConfig {
    Protocol protocol{Protocol::duplex};
    PairingVariant variant{PairingVariant::flip_triples};
    std::size_t n_timeslots{1000};
    ChannelModel channel{};
    double intercept_fraction{0.0};
    EveBasisPolicy eve_basis{EveBasisPolicy::uniform_random};
    double sample_fraction{0.5};
    double error_threshold{0.0};
    FailurePolicy failure_policy{FailurePolicy::abort_on_any};
    double max_pair_error_rate{0.0};
    bool search_pairs_as_key{true};
    std::size_t max_pairs{0};
    Interleaving interleaving{Interleaving::odd_alice_to_bob};
    std::size_t sessions{1};
    std::uint64_t seed{1};
    // Worker threads; 0 picks the hardware concurrency. Never affects output.
    std::size_t threads{1};
    OutputFormat format{OutputFormat::json};
    // Also run the other protocol and emit a comparison table.
    bool compare{false};

    // Throws std::invalid_argument.
    void validate() const;

    // Eve is absent when intercept_fraction is 0.
    EveStrategy eve() const;
    DuplexOptions duplex_options() const;
};

// One session of `protocol`, seeded with session_seed(config.seed, index).
SessionReport run_session(const RunConfig& config, Protocol protocol, std::uint64_t index);

struct RunResult {
    RunConfig config;
    std::vector<SessionReport> sessions;
    AggregateStats aggregate;
    // Filled when config.compare is set.
    std::vector<SessionReport> baseline_sessions;
    std::optional<ComparisonTable> comparison;
};

RunResult execute_run(const RunConfig& config);

struct SweepGrid {
    std::vector<double> intercept_fraction;
    std::vector<double> flip_probability;
    std::vector<double> loss_probability;
    std::vector<std::size_t> n_timeslots;

    bool empty() const;
};

// Cross product of the grid, intercept_fraction varying fastest. Every cell
// reuses the base seed, so cells differ only in their parameters. Throws
// std::invalid_argument if any axis is empty.
SweepResult execute_sweep(const RunConfig& base, const SweepGrid& grid);

struct ReplayResult {
    Transcript transcript;
    DuplexOptions options;
    DuplexAnalysis analysis;
};

ReplayResult replay_transcript(Transcript transcript, const DuplexOptions& options);

// Structured (JSON) and tabular emitters. JSON output is the golden form.
std::string run_report_json(const RunResult& result);
std::string sweep_report_json(const RunConfig& base, const SweepGrid& grid, const SweepResult& sweep);
std::string replay_report_json(const ReplayResult& replay);
void write_replay_text(std::ostream& out, const ReplayResult& replay);
void write_aggregate_dsv(std::ostream& out, const AggregateStats& stats, char sep = ',');

// Entry point of the command-line tool. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string_view to_string(OutputFormat f);

} // namespace dqkd

#endif
