#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <sstream>

#include "dqkd/app.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace dqkd;
using Json = nlohmann::json;

namespace {

struct CliResult {
    int status;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "dqkd");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {status, out.str(), err.str()};
}

std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("dqkd_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

} // namespace

TEST_CASE("session seeds make each session reproducible in isolation")
{
    RunConfig c;
    c.sessions = 8;
    c.n_timeslots = 200;
    c.intercept_fraction = 0.5;
    c.seed = 99;
    const RunResult r = execute_run(c);
    for (std::uint64_t k = 0; k < c.sessions; ++k) {
        const SessionReport alone = run_session(c, Protocol::duplex, k);
        CHECK(alone.seed == r.sessions[k].seed);
        CHECK(alone.failures == r.sessions[k].failures);
        CHECK(alone.key_length == r.sessions[k].key_length);
    }
    CHECK(session_seed(99, 0) != session_seed(99, 1));
    CHECK(session_seed(99, 0) != session_seed(98, 0));
}

TEST_CASE("thread count never changes the report")
{
    RunConfig c;
    c.sessions = 64;
    c.n_timeslots = 300;
    c.intercept_fraction = 0.3;
    c.channel.flip_probability = 0.02;
    c.seed = 2024;
    c.threads = 1;
    const std::string serial = run_report_json(execute_run(c));
    c.threads = 4;
    CHECK(run_report_json(execute_run(c)) == serial);
}

TEST_CASE("noiseless duplex run reports no failures")
{
    RunConfig c;
    c.seed = 7;
    const RunResult r = execute_run(c);
    REQUIRE(r.sessions.size() == 1);
    CHECK(r.sessions[0].failures == 0);
    CHECK(r.sessions[0].keys_agree);
    CHECK(r.sessions[0].key_length > 0);
}

TEST_CASE("bb84 runs under full interception average a quarter error")
{
    RunConfig c;
    c.protocol = Protocol::bb84;
    c.intercept_fraction = 1.0;
    c.n_timeslots = 100;
    c.sessions = 10000;
    c.seed = 11;
    const RunResult r = execute_run(c);
    CHECK(std::abs(r.aggregate.mean_error_rate.value - 0.25) <= 0.015);
}

TEST_CASE("duplex runs of ten pairs detect at 1 - (5/8)^10")
{
    RunConfig c;
    c.intercept_fraction = 1.0;
    c.n_timeslots = 200;
    c.max_pairs = 10;
    c.sessions = 10000;
    c.seed = 12;
    const RunResult r = execute_run(c);
    CHECK(std::abs(r.aggregate.detection_rate.value - (1.0 - std::pow(5.0 / 8.0, 10))) <= 0.01);
}

TEST_CASE("compare flag adds the baseline protocol")
{
    RunConfig c;
    c.sessions = 20;
    c.n_timeslots = 200;
    c.compare = true;
    const RunResult r = execute_run(c);
    REQUIRE(r.comparison.has_value());
    CHECK(r.baseline_sessions.size() == 20);
    CHECK(r.baseline_sessions[0].protocol == Protocol::bb84);
    const Json j = Json::parse(run_report_json(r));
    CHECK(j["comparison"].size() == 2);
}

TEST_CASE("run configuration validation")
{
    RunConfig c;
    c.sessions = 0;
    CHECK_THROWS_AS(execute_run(c), std::invalid_argument);
    c = RunConfig{};
    c.n_timeslots = 1;
    CHECK_THROWS_AS(execute_run(c), std::invalid_argument);
    c.protocol = Protocol::bb84;
    CHECK_NOTHROW(execute_run(c));
    c.sample_fraction = 0.0;
    CHECK_THROWS_AS(execute_run(c), std::invalid_argument);
}

TEST_CASE("replay of the worked example matches the golden report")
{
    const ReplayResult r = replay_transcript(test::worked_example(), {});
    const std::string golden = test::read_file(std::string(DQKD_GOLDEN_DIR) + "/worked_example_replay.json");
    CHECK(replay_report_json(r) == golden);
}

TEST_CASE("replay with a corrupted slot reports the failing triple")
{
    Transcript t = test::worked_example();
    for (SlotRecord& s : t.slots) {
        if (s.timeslot == 2) {
            s.receiver_bit = flipped(*s.receiver_bit);
        }
    }
    const Json j = Json::parse(replay_report_json(replay_transcript(t, {})));
    CHECK(j["verification"]["failures"] == Json::parse("[[3,2,1]]"));
    CHECK(j["verification"]["pass"] == false);
}

TEST_CASE("cli replay")
{
    SUBCASE("worked example as text")
    {
        const CliResult r = cli({"replay", test::worked_example_path(), "--format", "text"});
        CHECK(r.status == 0);
        CHECK(r.out.find("discard: 1 4 7 12 13 19 20") != std::string::npos);
        CHECK(r.out.find("verification: pass") != std::string::npos);
        CHECK(r.out.find("alice_key: 111110") != std::string::npos);
    }
    SUBCASE("empty file")
    {
        const auto dir = scratch_dir("empty");
        write_text(dir / "empty.tsv", "");
        const CliResult r = cli({"replay", (dir / "empty.tsv").string()});
        CHECK(r.status == 0);
        const Json j = Json::parse(r.out);
        CHECK(j["n_timeslots"] == 0);
        CHECK(j["triples"].empty());
        CHECK(j["verification"]["pass"] == true);
    }
    SUBCASE("malformed row is named")
    {
        const auto dir = scratch_dir("malformed");
        write_text(dir / "bad.tsv", "1 AB X 1 X 1\n2 BA X 0 X 0\n3 AB Z 1 X 1\n");
        const CliResult r = cli({"replay", (dir / "bad.tsv").string()});
        CHECK(r.status != 0);
        CHECK(r.err.find("line 3") != std::string::npos);
    }
    SUBCASE("missing file")
    {
        CHECK(cli({"replay", "/nonexistent/x.tsv"}).status != 0);
    }
    SUBCASE("search variant")
    {
        const CliResult r = cli({"replay", test::worked_example_path(), "--variant", "search_pairs"});
        REQUIRE(r.status == 0);
        const Json j = Json::parse(r.out);
        CHECK(j["triples"] == Json::parse("[[3,6,0],[5,8,0],[9,10,0],[11,16,0],[17,2,0]]"));
    }
}

TEST_CASE("cli run: config file, environment and flags")
{
    const auto dir = scratch_dir("config");
    write_text(dir / "run.conf", "# duplex run\n"
                                 "protocol = duplex\n"
                                 "n_timeslots = 120\n"
                                 "sessions = 3\n"
                                 "seed = 5\n"
                                 "intercept = 0.5\n"
                                 "compare = true\n");
    const std::string conf = (dir / "run.conf").string();

    const CliResult base = cli({"run", "--config", conf});
    REQUIRE(base.status == 0);
    const Json j = Json::parse(base.out);
    CHECK(j["config"]["n_timeslots"] == 120);
    CHECK(j["config"]["seed"] == 5);
    CHECK(j["config"]["compare"] == true);
    CHECK(j["sessions"].size() == 3);

    const CliResult flag = cli({"run", "--config", conf, "--seed", "6", "--sessions", "2"});
    REQUIRE(flag.status == 0);
    CHECK(Json::parse(flag.out)["config"]["seed"] == 6);
    CHECK(Json::parse(flag.out)["sessions"].size() == 2);

    ::setenv("DQKD_SEED", "77", 1);
    const CliResult env = cli({"run", "--config", conf});
    const CliResult env_and_flag = cli({"run", "--config", conf, "--seed", "8"});
    ::unsetenv("DQKD_SEED");
    CHECK(Json::parse(env.out)["config"]["seed"] == 77);
    CHECK(Json::parse(env_and_flag.out)["config"]["seed"] == 8);

    // same config and seed: identical bytes
    CHECK(cli({"run", "--config", conf}).out == base.out);
}

TEST_CASE("cli run: errors")
{
    CHECK(cli({"run", "--loss", "1.5"}).status != 0);
    CHECK(cli({"run", "--protocol", "e91"}).status != 0);
    CHECK(cli({"run", "--sessions", "0"}).status != 0);
    CHECK(cli({"run", "--config", "/nonexistent.conf"}).status != 0);
    const auto dir = scratch_dir("badconf");
    write_text(dir / "bad.conf", "colour = blue\n");
    const CliResult unknown = cli({"run", "--config", (dir / "bad.conf").string()});
    CHECK(unknown.status != 0);
    CHECK(unknown.err.find("colour") != std::string::npos);
    CHECK(cli({}).status != 0);
}

TEST_CASE("cli run writes report files")
{
    const auto dir = scratch_dir("out");
    const CliResult r = cli({"run", "--sessions", "4", "--n-timeslots", "100", "--format", "both", "--compare",
                             "--out", dir.string()});
    REQUIRE(r.status == 0);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "sessions.csv"));
    CHECK(std::filesystem::exists(dir / "aggregate.csv"));
    CHECK(std::filesystem::exists(dir / "comparison.csv"));
    const std::string sessions = test::read_file((dir / "sessions.csv").string());
    CHECK(std::count(sessions.begin(), sessions.end(), '\n') == 5);
}

TEST_CASE("cli sweep")
{
    SUBCASE("two-cell grid")
    {
        const CliResult r = cli({"sweep", "--intercept-grid", "0,1", "--flip-grid", "0", "--sessions", "50",
                                 "--n-timeslots", "100", "--format", "csv"});
        REQUIRE(r.status == 0);
        std::istringstream lines(r.out);
        std::string header;
        std::getline(lines, header);
        CHECK(header.find("sessions") != std::string::npos);
        std::vector<std::string> rows;
        for (std::string row; std::getline(lines, row);) {
            rows.push_back(row);
        }
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].rfind("0,0,0,100,duplex,50,", 0) == 0);
        CHECK(rows[1].rfind("1,0,0,100,duplex,50,", 0) == 0);
    }
    SUBCASE("empty grid")
    {
        CHECK(cli({"sweep"}).status != 0);
        CHECK_THROWS_AS(execute_sweep(RunConfig{}, SweepGrid{}), std::invalid_argument);
    }
    SUBCASE("grid from config file")
    {
        const auto dir = scratch_dir("sweepconf");
        write_text(dir / "sweep.conf", "intercept_grid = [0, 0.5]\nloss_grid = 0,0.1\nsessions = 5\n");
        const CliResult r = cli({"sweep", "--config", (dir / "sweep.conf").string()});
        REQUIRE(r.status == 0);
        const Json j = Json::parse(r.out);
        CHECK(j["cells"].size() == 4);
        for (const auto& cell : j["cells"]) {
            CHECK(cell["stats"]["sessions"] == 5);
        }
    }
}

TEST_CASE("detection rate is nondecreasing in intercept fraction")
{
    RunConfig base;
    base.n_timeslots = 40;
    base.sessions = 10000;
    base.seed = 31;
    SweepGrid grid;
    grid.intercept_fraction = {0.0, 0.25, 0.5, 0.75, 1.0};
    grid.flip_probability = {0.0};
    grid.loss_probability = {0.0};
    grid.n_timeslots = {40};
    const SweepResult sweep = execute_sweep(base, grid);
    REQUIRE(sweep.cells.size() == 5);
    for (std::size_t i = 1; i < sweep.cells.size(); ++i) {
        CHECK(sweep.cells[i].stats.detection_rate.value >= sweep.cells[i - 1].stats.detection_rate.value);
        CHECK(sweep.cells[i].stats.sessions == 10000);
    }
}
