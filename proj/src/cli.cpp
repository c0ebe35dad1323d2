#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dqkd/app.hpp"

namespace dqkd {

namespace {

// Raw string values for enum-like options; resolved after parsing.
struct EnumArgs {
    std::string protocol{"duplex"};
    std::string variant{"flip_triples"};
    std::string eve_basis{"uniform_random"};
    std::string failure_policy{"abort_on_any"};
    std::string interleaving{"odd"};
    std::string format{"json"};
};

template <class T, class Parse>
T resolve(const std::string& text, Parse parse, std::string_view option)
{
    const auto v = parse(text);
    if (!v) {
        throw std::invalid_argument("invalid value '" + text + "' for --" + std::string(option));
    }
    return *v;
}

std::optional<OutputFormat> parse_format(std::string_view text)
{
    if (text == "json") {
        return OutputFormat::json;
    }
    if (text == "csv") {
        return OutputFormat::csv;
    }
    if (text == "both") {
        return OutputFormat::both;
    }
    return std::nullopt;
}

void add_duplex_options(CLI::App* cmd, RunConfig& cfg, EnumArgs& raw)
{
    cmd->add_option("--variant", raw.variant, "Duplex pairing: flip_triples or search_pairs");
    cmd->add_option("--failure-policy", raw.failure_policy, "abort_on_any or threshold");
    cmd->add_option("--max-pair-error-rate", cfg.max_pair_error_rate,
                    "Largest failed-pair fraction accepted under the threshold policy");
    cmd->add_option("--search-pairs-as-key", cfg.search_pairs_as_key,
                    "Use same-BV pairs as key material (search_pairs variant)");
    cmd->add_option("--max-pairs", cfg.max_pairs, "Cap on published pairs per session (0 = no cap)");
}

void add_run_options(CLI::App* cmd, RunConfig& cfg, EnumArgs& raw)
{
    cmd->add_option("--protocol", raw.protocol, "bb84 or duplex");
    add_duplex_options(cmd, cfg, raw);
    cmd->add_option("--n-timeslots", cfg.n_timeslots, "Timeslots per session");
    cmd->add_option("--loss", cfg.channel.loss_probability, "Channel loss probability");
    cmd->add_option("--flip", cfg.channel.flip_probability, "Channel bit-flip probability");
    cmd->add_option("--intercept", cfg.intercept_fraction, "Fraction of slots Eve intercepts (0 = no Eve)");
    cmd->add_option("--eve-basis", raw.eve_basis, "uniform_random, always_X or always_Y");
    cmd->add_option("--sample-fraction", cfg.sample_fraction, "BB84 fraction of sifted bits compared");
    cmd->add_option("--error-threshold", cfg.error_threshold, "BB84 sampled error rate above which to abort");
    cmd->add_option("--interleaving", raw.interleaving, "odd (Alice sends odd slots) or even");
    cmd->add_option("--sessions", cfg.sessions, "Number of sessions");
    cmd->add_option("--seed", cfg.seed, "Master seed")->envname("DQKD_SEED");
    cmd->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
    cmd->add_option("--format", raw.format, "json, csv or both");
    cmd->add_flag("--compare", cfg.compare, "Also run the other protocol and tabulate both");
}

void resolve_run_enums(RunConfig& cfg, const EnumArgs& raw)
{
    cfg.protocol = resolve<Protocol>(raw.protocol, parse_protocol, "protocol");
    cfg.variant = resolve<PairingVariant>(raw.variant, parse_variant, "variant");
    cfg.eve_basis = resolve<EveBasisPolicy>(raw.eve_basis, parse_basis_policy, "eve-basis");
    cfg.failure_policy = resolve<FailurePolicy>(raw.failure_policy, parse_failure_policy, "failure-policy");
    cfg.interleaving = resolve<Interleaving>(raw.interleaving, parse_interleaving, "interleaving");
    cfg.format = resolve<OutputFormat>(raw.format, parse_format, "format");
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// key = value lines; '#' comments; list values comma separated, optionally
// in brackets. Keys are long option names with '_' or '-'.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file " + path);
    }
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        if (trim(view).empty()) {
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw std::runtime_error(path + ":" + std::to_string(number) + ": expected key = value");
        }
        std::string key = trim(view.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        entries.emplace_back(key, trim(view.substr(eq + 1)));
    }
    return entries;
}

std::vector<std::string> split_list(std::string value)
{
    if (!value.empty() && value.front() == '[' && value.back() == ']') {
        value = value.substr(1, value.size() - 2);
    }
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (auto t = trim(item); !t.empty()) {
            out.push_back(t);
        }
    }
    return out;
}

// Config values fill only options not given on the command line or through
// the environment.
void apply_config_file(CLI::App* cmd, const std::string& path)
{
    for (const auto& [key, value] : read_config_file(path)) {
        CLI::Option* opt = nullptr;
        try {
            opt = cmd->get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw std::runtime_error(path + ": unknown key '" + key + "'");
        }
        if (key == "config" || opt->count() > 0) {
            continue;
        }
        if (opt->get_items_expected_max() > 1) {
            opt->add_result(split_list(value));
        } else {
            opt->add_result(value);
        }
        opt->run_callback();
    }
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot write " + path.string());
    }
    f << content;
}

std::string run_csv(const RunResult& r)
{
    std::ostringstream s;
    write_reports_dsv(s, r.sessions);
    return s.str();
}

std::string aggregate_csv(const RunResult& r)
{
    std::ostringstream s;
    write_aggregate_dsv(s, r.aggregate);
    return s.str();
}

std::string comparison_csv(const RunResult& r)
{
    std::ostringstream s;
    write_comparison_dsv(s, *r.comparison);
    return s.str();
}

int emit_run(const RunResult& result, const std::string& out_dir, std::ostream& out)
{
    const OutputFormat fmt = result.config.format;
    const bool json = fmt != OutputFormat::csv;
    const bool csv = fmt != OutputFormat::json;
    if (out_dir.empty()) {
        if (json) {
            out << run_report_json(result);
        }
        if (csv) {
            out << run_csv(result) << '\n' << aggregate_csv(result);
            if (result.comparison) {
                out << '\n' << comparison_csv(result);
            }
        }
        return 0;
    }
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    if (json) {
        write_file(dir / "report.json", run_report_json(result));
    }
    if (csv) {
        write_file(dir / "sessions.csv", run_csv(result));
        write_file(dir / "aggregate.csv", aggregate_csv(result));
        if (result.comparison) {
            write_file(dir / "comparison.csv", comparison_csv(result));
        }
    }
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Duplex BB84 simulator: eavesdropper detection without public bit comparison", "dqkd"};
    app.require_subcommand(1);

    RunConfig run_cfg;
    EnumArgs run_raw;
    std::string run_config_file;
    std::string run_out;
    CLI::App* run = app.add_subcommand("run", "Run seeded Monte Carlo sessions");
    run->add_option("--config", run_config_file, "key = value config file");
    run->add_option("--out", run_out, "Directory for report files (default: stdout)");
    add_run_options(run, run_cfg, run_raw);

    RunConfig sweep_cfg;
    EnumArgs sweep_raw;
    std::string sweep_config_file;
    std::string sweep_out;
    SweepGrid grid;
    CLI::App* sweep = app.add_subcommand("sweep", "Aggregate sessions over a parameter grid");
    sweep->add_option("--config", sweep_config_file, "key = value config file");
    sweep->add_option("--out", sweep_out, "Directory for report files (default: stdout)");
    add_run_options(sweep, sweep_cfg, sweep_raw);
    sweep->add_option("--intercept-grid", grid.intercept_fraction, "Intercept fractions")->delimiter(',');
    sweep->add_option("--flip-grid", grid.flip_probability, "Flip probabilities")->delimiter(',');
    sweep->add_option("--loss-grid", grid.loss_probability, "Loss probabilities")->delimiter(',');
    sweep->add_option("--n-timeslots-grid", grid.n_timeslots, "Timeslot counts")->delimiter(',');

    RunConfig replay_cfg;
    EnumArgs replay_raw;
    std::string replay_file;
    std::string replay_out;
    std::string replay_format{"json"};
    CLI::App* replay = app.add_subcommand("replay", "Analyse a recorded transcript");
    replay->add_option("transcript", replay_file, "Transcript file")->required();
    add_duplex_options(replay, replay_cfg, replay_raw);
    replay->add_option("--format", replay_format, "json or text");
    replay->add_option("--out", replay_out, "Output file (default: stdout)");

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            return app.exit(e, out, err);
        }

        if (run->parsed()) {
            if (!run_config_file.empty()) {
                apply_config_file(run, run_config_file);
            }
            resolve_run_enums(run_cfg, run_raw);
            return emit_run(execute_run(run_cfg), run_out, out);
        }

        if (sweep->parsed()) {
            if (!sweep_config_file.empty()) {
                apply_config_file(sweep, sweep_config_file);
            }
            resolve_run_enums(sweep_cfg, sweep_raw);
            if (grid.intercept_fraction.empty() && grid.flip_probability.empty() &&
                grid.loss_probability.empty() && grid.n_timeslots.empty()) {
                throw std::invalid_argument("sweep needs at least one of --intercept-grid, --flip-grid, "
                                            "--loss-grid, --n-timeslots-grid");
            }
            // unswept axes hold the base value
            if (grid.intercept_fraction.empty()) {
                grid.intercept_fraction.push_back(sweep_cfg.intercept_fraction);
            }
            if (grid.flip_probability.empty()) {
                grid.flip_probability.push_back(sweep_cfg.channel.flip_probability);
            }
            if (grid.loss_probability.empty()) {
                grid.loss_probability.push_back(sweep_cfg.channel.loss_probability);
            }
            if (grid.n_timeslots.empty()) {
                grid.n_timeslots.push_back(sweep_cfg.n_timeslots);
            }
            const SweepResult result = execute_sweep(sweep_cfg, grid);
            std::ostringstream table;
            write_sweep_dsv(table, result);
            const bool json = sweep_cfg.format != OutputFormat::csv;
            const bool csv = sweep_cfg.format != OutputFormat::json;
            if (sweep_out.empty()) {
                if (json) {
                    out << sweep_report_json(sweep_cfg, grid, result);
                }
                if (csv) {
                    out << table.str();
                }
            } else {
                std::filesystem::create_directories(sweep_out);
                if (json) {
                    write_file(std::filesystem::path(sweep_out) / "sweep.json",
                               sweep_report_json(sweep_cfg, grid, result));
                }
                if (csv) {
                    write_file(std::filesystem::path(sweep_out) / "sweep.csv", table.str());
                }
            }
            return 0;
        }

        if (replay->parsed()) {
            replay_cfg.variant = resolve<PairingVariant>(replay_raw.variant, parse_variant, "variant");
            replay_cfg.failure_policy =
                resolve<FailurePolicy>(replay_raw.failure_policy, parse_failure_policy, "failure-policy");
            if (replay_format != "json" && replay_format != "text") {
                throw std::invalid_argument("invalid value '" + replay_format + "' for --format");
            }
            std::ifstream in(replay_file);
            if (!in) {
                throw std::runtime_error("cannot open transcript " + replay_file);
            }
            const ReplayResult result = replay_transcript(parse_transcript(in), replay_cfg.duplex_options());
            std::string text;
            if (replay_format == "json") {
                text = replay_report_json(result);
            } else {
                std::ostringstream s;
                write_replay_text(s, result);
                text = s.str();
            }
            if (replay_out.empty()) {
                out << text;
            } else {
                write_file(replay_out, text);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace dqkd
