#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support/instances.hpp"

using namespace newcast;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "newcast");
    std::vector<const char *> argv;
    for (const auto &a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

/// Data rows of a CSV payload, keyed by column name.
std::vector<std::map<std::string, std::string>> rows(const std::string &csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("# schema=", 0), 0u);
    std::getline(in, line);
    std::vector<std::string> header;
    for (const auto f : detail::split(line, ',')) header.emplace_back(f);
    std::vector<std::map<std::string, std::string>> out;
    while (std::getline(in, line)) {
        const auto fields = detail::split(line, ',');
        EXPECT_EQ(fields.size(), header.size());
        auto &row = out.emplace_back();
        for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = std::string(fields[i]);
    }
    return out;
}

double num(const std::string &s) { return *detail::parse_double(s); }

fs::path scratch(const std::string &name) {
    const auto dir = fs::temp_directory_path() / ("newcast_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// 40-segment variant of the reference video on 50-slot windows, for quick scans.
fs::path short_video(const fs::path &dir) {
    auto doc = to_json(reference_video());
    doc["n_segments"] = 40;
    const auto path = dir / "short.json";
    std::ofstream(path) << doc.dump();
    return path;
}

} // namespace

TEST(CliPlan, ReportValidatesAndBeatsBenchmark) {
    const auto r = run({"plan", "--synthetic-seed", "3", "--a", "4.5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = json::parse(r.out);
    EXPECT_NO_THROW(validate_plan_report(report));
    EXPECT_LE(report["outcome"]["cost"].get<double>(), report["benchmark"]["cost"].get<double>());
    EXPECT_EQ(report["outcome"]["trajectory"]["arrived_frames"].size(), 190u);
}

TEST(CliPlan, ZeroTradeoffRaisesThreshold) {
    const auto low = json::parse(run({"plan", "--synthetic-seed", "3", "--a", "0"}).out);
    const auto mid = json::parse(run({"plan", "--synthetic-seed", "3", "--a", "4.5"}).out);
    EXPECT_GE(low["outcome"]["quality"].get<double>(), 0.09);
    EXPECT_GE(low["alpha_th_bps"].get<double>(), mid["alpha_th_bps"].get<double>());
}

TEST(CliPlan, VideoFileMatchesDefaults) {
    const auto a = run({"plan", "--synthetic-seed", "2", "--a", "1"});
    const auto b = run({"plan", "--synthetic-seed", "2", "--a", "1", "--video", NEWCAST_CONFIG_DIR "/reference.json"});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(a.out, b.out);
}

TEST(CliPlan, MissingTraceIsIoErrorWithoutOutput) {
    const auto dir = scratch("missing");
    const auto r = run({"plan", "--trace", (dir / "nope.csv").string(), "--a", "1", "--out", (dir / "out").string()});
    EXPECT_EQ(r.code, cli::kIo);
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(CliPlan, InfeasibleSession) {
    const auto dir = scratch("infeasible");
    save_trace((dir / "weak.csv").string(), CapacityTrace(1., std::vector<double>(190, 1e5)));
    const auto r = run({"plan", "--trace", (dir / "weak.csv").string(), "--a", "1"});
    EXPECT_EQ(r.code, cli::kInfeasible);
    EXPECT_TRUE(r.out.empty());
}

TEST(CliPlan, ConfigErrors) {
    EXPECT_EQ(run({"plan", "--synthetic-seed", "1"}).code, cli::kConfig);
    EXPECT_EQ(run({"plan", "--synthetic-seed", "1", "--a", "-1"}).code, cli::kConfig);
    EXPECT_EQ(run({"plan", "--synthetic-seed", "1", "--a", "1", "--mode", "fastest"}).code, cli::kConfig);
    EXPECT_EQ(run({"plan", "--a", "1"}).code, cli::kConfig);
    EXPECT_EQ(run({"plan", "--synthetic-seed", "1", "--a", "1", "--window-slots", "100"}).code, cli::kConfig);
    EXPECT_EQ(run({}).code, cli::kConfig);
}

TEST(CliSweep, GridAroundSwitchIsNonIncreasing) {
    const auto r = run({"sweep-a", "--synthetic-seed", "5", "--a-grid", "4.5:4.7:0.02", "--jobs", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto table = rows(r.out);
    ASSERT_EQ(table.size(), 11u);
    for (std::size_t i = 1; i < table.size(); ++i)
        EXPECT_LE(num(table[i].at("alpha_th_bps")), num(table[i - 1].at("alpha_th_bps")));
}

TEST(CliSweep, SingleValueMatchesPlan) {
    const auto sweep = rows(run({"sweep-a", "--synthetic-seed", "4", "--a", "2"}).out);
    const auto plan = json::parse(run({"plan", "--synthetic-seed", "4", "--a", "2"}).out);
    ASSERT_EQ(sweep.size(), 1u);
    EXPECT_EQ(num(sweep[0].at("alpha_th_bps")), plan["alpha_th_bps"].get<double>());
    EXPECT_EQ(num(sweep[0].at("cost")), plan["outcome"]["cost"].get<double>());
    EXPECT_EQ(num(sweep[0].at("quality")), plan["outcome"]["quality"].get<double>());
}

TEST(CliSweep, EmptyListIsUsageError) { EXPECT_EQ(run({"sweep-a", "--synthetic-seed", "4"}).code, cli::kConfig); }

TEST(CliSweep, TrajectoriesAndMetadata) {
    const auto dir = scratch("sweep");
    const auto r = run({"sweep-a", "--synthetic-seed", "4", "--a", "0.5", "--a", "10", "--trajectories", "--out",
                        dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "sweep_a.csv"));
    EXPECT_TRUE(fs::exists(dir / "trajectory_a0.5.csv"));
    EXPECT_TRUE(fs::exists(dir / "trajectory_a10.csv"));
    const auto meta = json::parse(std::ifstream(dir / "run_metadata.json"));
    EXPECT_EQ(meta["command"], "sweep-a");
    std::ifstream in(dir / "trajectory_a10.csv");
    std::stringstream text;
    text << in.rdbuf();
    const auto traj = rows(text.str());
    ASSERT_EQ(traj.size(), 190u);
    for (const auto &row : traj) EXPECT_GE(num(row.at("buffer_frames")), -1e-9);
}

TEST(CliSweep, Reproducible) {
    const auto a = run({"sweep-a", "--synthetic-seed", "9", "--a", "1", "--a", "5", "--jobs", "2"});
    const auto b = run({"sweep-a", "--synthetic-seed", "9", "--a", "1", "--a", "5", "--jobs", "1"});
    EXPECT_EQ(a.out, b.out);
}

TEST(CliStallScan, RowsPerPosition) {
    const auto dir = scratch("stall");
    const auto video = short_video(dir);
    const auto r = run({"stall-scan", "--synthetic-seed", "1", "--window-slots", "50", "--video", video.string(),
                        "--a", "0.5", "--jobs", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto table = rows(r.out);
    EXPECT_EQ(table.size(), 40u - 2 * 4 + 1);
    for (const auto &row : table) {
        if (row.at("feasible") == "1") {
            EXPECT_FALSE(row.at("cost_after").empty());
            EXPECT_GE(num(row.at("stall_slot")), 4.);
        }
    }
}

TEST(CliRobustness, IdenticalRealizationsGiveZeroError) {
    const auto dir = scratch("robust_same");
    const auto trace = fixtures::reference_trace(3);
    for (int i = 0; i < 3; ++i) save_trace((dir / ("r" + std::to_string(i) + ".csv")).string(), trace);
    const auto r = run({"robustness", "--realizations-dir", dir.string(), "--a", "4.5"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto &row : rows(r.out)) {
        EXPECT_EQ(num(row.at("error_utilization")), 0.);
        EXPECT_EQ(num(row.at("error_quality")), 0.);
    }
}

TEST(CliRobustness, SingleRealization) {
    const auto dir = scratch("robust_one");
    save_trace((dir / "only.csv").string(), fixtures::reference_trace(8));
    const auto table = rows(run({"robustness", "--realizations-dir", dir.string(), "--a", "1"}).out);
    ASSERT_EQ(table.size(), 2u);
    EXPECT_EQ(table[0].at("realization"), "only.csv");
    EXPECT_EQ(table[1].at("realization"), "mean");
}

TEST(CliRobustness, TwentySyntheticRealizations) {
    const auto r = run({"robustness", "--synthetic-seed", "1", "--synthetic-realizations", "20", "--a", "4.5",
                        "--jobs", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto table = rows(r.out);
    ASSERT_EQ(table.size(), 21u);
    const auto &mean = table.back();
    EXPECT_TRUE(std::isfinite(num(mean.at("error_utilization"))));
    EXPECT_TRUE(std::isfinite(num(mean.at("error_quality"))));
}

TEST(CliRobustness, DriveLogsAreMapped) {
    const auto dir = scratch("robust_logs");
    std::vector<std::string> args{"robustness", "--a", "1", "--speed-kmph", "50", "--mapping", "bit-density"};
    for (int f = 0; f < 2; ++f) {
        const auto path = dir / ("drive" + std::to_string(f) + ".csv");
        std::ofstream out(path);
        out << "timestamp_ms,latitude,longitude,bytes\n";
        std::mt19937_64 rng(f + 1);
        for (int i = 0; i <= 200; ++i)
            out << i * 1000 << ',' << detail::format_double(59.9 + i * (50. / 3.6) / 111195.08) << ",10.7,"
                << (i ? static_cast<long>(fixtures::uniform(rng, 1.5e5, 3.5e5)) : 0) << '\n';
        args.push_back("--log");
        args.push_back(path.string());
    }
    const auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(rows(r.out).size(), 3u);
}

TEST(CliBench, BaselinePeriodIsExactlyOne) {
    const auto r = run({"bench", "--traces", "3", "--periods", "1", "2", "--quanta", "1", "5", "--a", "4.5", "--jobs",
                        "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto table = rows(r.out);
    ASSERT_EQ(table.size(), 4u);
    EXPECT_EQ(table[0].at("sweep"), "period");
    EXPECT_EQ(num(table[0].at("accuracy_cost")), 1.);
    EXPECT_EQ(num(table[0].at("accuracy_quality")), 1.);
    for (const auto &row : table) EXPECT_GT(num(row.at("mean_runtime_s")), 0.);
    for (std::size_t i = 2; i < 4; ++i) EXPECT_LE(std::abs(1. - num(table[i].at("accuracy_cost"))), 0.16);
}

TEST(CliTrace, GenerateAndReload) {
    const auto dir = scratch("gen");
    const auto path = (dir / "t.csv").string();
    ASSERT_EQ(run({"gen-trace", "--synthetic-seed", "12", "--trace-out", path}).code, 0);
    SyntheticTraceConfig cfg;
    cfg.seed = 12;
    EXPECT_EQ(load_trace(path), generate_synthetic(cfg));
    const auto fromFile = run({"plan", "--trace", path, "--a", "3"});
    const auto direct = run({"plan", "--synthetic-seed", "12", "--a", "3"});
    EXPECT_EQ(fromFile.out, direct.out);
}

TEST(CliTrace, BadTraceFileIsInputError) {
    const auto dir = scratch("bad");
    std::ofstream(dir / "bad.csv") << "hello\n";
    EXPECT_EQ(run({"plan", "--trace", (dir / "bad.csv").string(), "--a", "1"}).code, cli::kIo);
}

TEST(CliBinary, EnvironmentOverridesAndExitCodes) {
    const std::string bin = NEWCAST_CLI_PATH;
    const auto dir = scratch("bin");
    const auto out = (dir / "o").string();
    const auto status = [](const std::string &cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(status("NEWCAST_A=2 NEWCAST_SYNTHETIC_SEED=4 " + bin + " plan --out " + out), 0);
    const auto report = json::parse(std::ifstream(out + "/plan_report.json"));
    EXPECT_EQ(report["a"].get<double>(), 2.);
    EXPECT_EQ(status(bin + " plan --synthetic-seed 4"), cli::kConfig);
    EXPECT_EQ(status(bin + " plan --trace /nonexistent.csv --a 1"), cli::kIo);
    EXPECT_EQ(status(bin + " --help"), 0);
}
