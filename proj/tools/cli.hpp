#pragma once

// Batch experiment driver: plan, sweep-a, stall-scan, robustness, bench, gen-trace, map-log.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <newcast/newcast.hpp>
#include <newcast/report.hpp>

namespace newcast::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInfeasible = 2, kIo = 3, kConfig = 4 };

/// Bad flags or an unusable experiment description.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct TraceSource {
    std::optional<std::string> file;
    std::optional<std::uint64_t> synthetic_seed;
    SyntheticTraceConfig synthetic;
};

struct ExperimentConfig {
    VideoSpec video = reference_video();
    TraceSource trace;
    std::vector<double> a_values;
    ThresholdMode mode;
    std::optional<double> sampling_period;  ///< Resample the trace to this slot length.
    std::optional<std::string> out_dir;
    std::size_t jobs = 1;
};

inline VideoSpec load_video(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read video spec " + path);
    try {
        return video_from_json(json::parse(in));
    } catch (const json::exception &e) {
        throw ConfigError("video spec " + path + ": " + e.what());
    } catch (const ArgumentError &e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline CapacityTrace load_trace(const ExperimentConfig &config) {
    CapacityTrace trace;
    if (config.trace.file && config.trace.synthetic_seed)
        throw ConfigError("give either --trace or --synthetic-seed, not both");
    if (config.trace.file) {
        trace = ::newcast::load_trace(*config.trace.file);
    } else if (config.trace.synthetic_seed) {
        auto synthetic = config.trace.synthetic;
        synthetic.seed = *config.trace.synthetic_seed;
        try {
            trace = generate_synthetic(synthetic);
        } catch (const ArgumentError &e) {
            throw ConfigError(e.what());
        }
    } else {
        throw ConfigError("no trace source: give --trace <file> or --synthetic-seed <n>");
    }
    if (config.sampling_period) {
        try {
            trace = resample(trace, *config.sampling_period);
        } catch (const ArgumentError &e) {
            throw ConfigError(e.what());
        }
    }
    return trace;
}

inline std::vector<TradeoffParam> tradeoffs(const ExperimentConfig &config) {
    if (config.a_values.empty()) throw ConfigError("no trade-off values: give at least one --a");
    std::vector<TradeoffParam> values;
    for (const auto a : config.a_values) {
        if (!(a >= 0.) || !std::isfinite(a)) throw ConfigError("trade-off values must be >= 0");
        values.emplace_back(a);
    }
    return values;
}

inline std::string mode_name(const ThresholdMode &mode) {
    return mode.kind == ThresholdMode::Kind::optimal ? "optimal" : "invest";
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

inline json plan_report(const ExperimentConfig &config) {
    const auto values = tradeoffs(config);
    if (values.size() != 1) throw ConfigError("plan takes exactly one --a (use sweep-a for several)");
    const auto a = values.front();
    const auto trace = load_trace(config);
    const auto candidates = enumerate_candidates(trace, config.video, config.mode);
    const auto result = select_candidate(candidates, a);
    const auto reference = benchmark(candidates, a);

    json report = {{"schema", "newcast.plan_report"},
                   {"schema_version", kSchemaVersion},
                   {"a", a.value()},
                   {"mode", mode_name(config.mode)},
                   {"quantum_bits", config.mode.kind == ThresholdMode::Kind::invest ? json(config.mode.quantum_bits)
                                                                                    : json(nullptr)},
                   {"video", to_json(config.video)},
                   {"alpha_th_bps", result.alpha_th},
                   {"candidates_evaluated", result.candidates_evaluated},
                   {"plan", to_json(result.plan)},
                   {"outcome", outcome_json(result.outcome, trace)},
                   {"benchmark",
                    {{"alpha_bps", reference.alpha_th},
                     {"utilization", reference.outcome.utilization},
                     {"quality", reference.outcome.quality},
                     {"cost", reference.outcome.cost}}}};
    validate_plan_report(report);
    return report;
}

// ---------------------------------------------------------------------------
// sweep-a
// ---------------------------------------------------------------------------

inline CsvTable trajectory_table(const PlanResult &result, const CapacityTrace &trace) {
    CsvTable table("newcast.trajectory",
                   {"slot", "time_s", "capacity_bps", "active", "bits_used", "level", "arrived_frames",
                    "watched_frames", "buffer_frames"});
    const auto &o = result.outcome;
    for (std::size_t k = 0; k < trace.size(); ++k)
        table.add_row({static_cast<std::int64_t>(k), trace.origin_time() + static_cast<double>(k + 1) * trace.slot_duration(),
                       trace[k], static_cast<std::int64_t>(trace[k] >= result.alpha_th), o.bits_used_per_slot[k],
                       static_cast<std::int64_t>(o.level_per_slot[k]), static_cast<std::int64_t>(o.arrived_frames[k]),
                       o.watched_frames[k], static_cast<double>(o.arrived_frames[k]) - o.watched_frames[k]});
    return table;
}

struct SweepOutput {
    CsvTable summary{"newcast.sweep_a", {"a", "alpha_th_bps", "utilization", "quality", "cost"}};
    std::vector<std::pair<std::string, CsvTable>> trajectories;
};

inline SweepOutput sweep_a(const ExperimentConfig &config, bool withTrajectories) {
    const auto values = tradeoffs(config);
    const auto trace = load_trace(config);
    const auto candidates = enumerate_candidates(trace, config.video, config.mode);
    const auto results = parallel_map(values.size(), config.jobs,
                                      [&](std::size_t i) { return select_candidate(candidates, values[i]); });
    SweepOutput out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto &r = results[i];
        out.summary.add_row({values[i].value(), r.alpha_th, r.outcome.utilization, r.outcome.quality, r.outcome.cost});
        if (withTrajectories)
            out.trajectories.emplace_back("trajectory_a" + detail::format_double(values[i].value()) + ".csv",
                                          trajectory_table(r, trace));
    }
    return out;
}

// ---------------------------------------------------------------------------
// stall-scan
// ---------------------------------------------------------------------------

inline CsvTable stall_scan(const ExperimentConfig &config) {
    const auto values = tradeoffs(config);
    const auto trace = load_trace(config);
    CsvTable table("newcast.stall_scan", {"a", "stall_slot", "cut_segment", "cost_before", "cost_after", "feasible"});
    for (const auto a : values) {
        const auto before = plan_newcast(trace, config.video, a, config.mode).outcome.cost;
        const auto minPart = config.video.cache_segments();
        std::vector<std::size_t> cuts;
        for (auto cut = std::max<std::size_t>(minPart, 1); cut + minPart <= config.video.n_segments(); ++cut)
            cuts.push_back(cut);
        const auto runs = parallel_map(cuts.size(), config.jobs, [&](std::size_t i) -> std::optional<StalledPlanResult> {
            try {
                return plan_with_stalls(trace, config.video, a, {1, {cuts[i]}}, config.mode);
            } catch (const PartInfeasibleError &) {
                return std::nullopt;
            }
        });
        for (std::size_t i = 0; i < cuts.size(); ++i) {
            if (runs[i])
                table.add_row({a.value(), static_cast<std::int64_t>(runs[i]->part_offsets[1]),
                               static_cast<std::int64_t>(cuts[i]), before, runs[i]->outcome.cost, std::int64_t{1}});
            else
                table.add_row({a.value(), std::monostate{}, static_cast<std::int64_t>(cuts[i]), before, std::monostate{},
                               std::int64_t{0}});
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// robustness
// ---------------------------------------------------------------------------

struct RobustnessOptions {
    std::optional<std::string> realizations_dir;  ///< Trace CSV files, one per realization.
    std::vector<std::string> logs;                ///< Drive-test logs mapped with `columns` at `speed_kmph`.
    std::size_t synthetic_realizations = 0;       ///< Seeds synthetic_seed .. synthetic_seed + n - 1.
    ColumnMap columns;
    double speed_kmph = 50.;
    MappingMode mapping = MappingMode::throughput_field;
    bool reoptimize = false;  ///< Compare against a plan made with the realization itself.
};

struct Realization {
    std::string name;
    CapacityTrace trace;
};

inline std::vector<Realization> load_realizations(const ExperimentConfig &config, const RobustnessOptions &options) {
    std::vector<Realization> out;
    if (options.realizations_dir) {
        const fs::path dir(*options.realizations_dir);
        if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
        std::vector<fs::path> files;
        for (const auto &entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
        std::ranges::sort(files);
        for (const auto &file : files) out.push_back({file.filename().string(), ::newcast::load_trace(file.string())});
    }
    for (const auto &path : options.logs) {
        const auto log = ingest_csv(path, options.columns);
        const auto slot = config.sampling_period.value_or(config.trace.synthetic.slot_duration);
        out.push_back({fs::path(path).filename().string(), temporal_mapping(log, options.speed_kmph, slot, options.mapping)});
    }
    for (std::size_t i = 0; i < options.synthetic_realizations; ++i) {
        auto synthetic = config.trace.synthetic;
        synthetic.seed = config.trace.synthetic_seed.value_or(1) + i;
        out.push_back({"seed" + std::to_string(synthetic.seed), generate_synthetic(synthetic)});
    }
    if (out.empty()) throw ConfigError("no realizations: give --realizations-dir, --log or --synthetic-realizations");
    // Realizations of different lengths are cut to the shortest one.
    const auto slots = std::ranges::min(out, {}, [](const Realization &r) { return r.trace.size(); }).trace.size();
    for (auto &r : out) {
        if (r.trace.slot_duration() != out.front().trace.slot_duration())
            throw ConfigError("realizations use different slot durations");
        r.trace = r.trace.slice(0, slots);
    }
    return out;
}

inline CsvTable robustness(const ExperimentConfig &config, const RobustnessOptions &options) {
    const auto values = tradeoffs(config);
    const auto realizations = load_realizations(config, options);
    std::vector<CapacityTrace> traces;
    for (const auto &r : realizations) traces.push_back(r.trace);
    const auto mean = mean_trace(traces);

    CsvTable table("newcast.robustness",
                   {"a", "realization", "utilization_mean", "utilization_real", "error_utilization", "quality_mean",
                    "quality_real", "error_quality", "stalled"});
    const auto cell = [](std::optional<double> v) -> CsvTable::Cell {
        if (v) return *v;
        return std::monostate{};
    };
    for (const auto a : values) {
        const auto reference = plan_newcast(mean, config.video, a, config.mode);
        struct Row {
            std::optional<double> utilization, quality;
            bool stalled = false;
        };
        const auto rows = parallel_map(realizations.size(), config.jobs, [&](std::size_t i) {
            const auto &trace = realizations[i].trace;
            if (options.reoptimize) {
                try {
                    const auto own = plan_newcast(trace, config.video, a, config.mode);
                    return Row{own.outcome.utilization, own.outcome.quality, false};
                } catch (const NoFeasibleSessionError &) {
                    return Row{std::nullopt, std::nullopt, true};
                }
            }
            const auto seen = evaluate(trace, reference.alpha_th, config.video, reference.plan, a, EvalMode::lenient);
            return Row{seen.utilization, seen.quality, !seen.feasible()};
        });
        std::vector<double> errS, errQ;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto eS = rows[i].utilization ? robustness_error(*rows[i].utilization, reference.outcome.utilization)
                                                : std::nullopt;
            const auto eQ = rows[i].quality ? robustness_error(*rows[i].quality, reference.outcome.quality) : std::nullopt;
            if (eS) errS.push_back(*eS);
            if (eQ) errQ.push_back(*eQ);
            table.add_row({a.value(), realizations[i].name, reference.outcome.utilization, cell(rows[i].utilization),
                           cell(eS), reference.outcome.quality, cell(rows[i].quality), cell(eQ),
                           static_cast<std::int64_t>(rows[i].stalled)});
        }
        const auto average = [](const std::vector<double> &v) -> std::optional<double> {
            if (v.empty()) return std::nullopt;
            return std::accumulate(v.begin(), v.end(), 0.) / static_cast<double>(v.size());
        };
        table.add_row({a.value(), std::string("mean"), reference.outcome.utilization, std::monostate{},
                       cell(average(errS)), reference.outcome.quality, std::monostate{}, cell(average(errQ)),
                       std::monostate{}});
    }
    return table;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchOptions {
    std::vector<double> periods{1., 2., 3., 4., 5.};
    std::vector<double> quanta_bits{1e6, 2e6, 3e6, 4e6, 5e6};
    std::size_t traces = 100;
};

struct Metrics {
    double utilization = 0., quality = 0., cost = 0.;
};

inline CsvTable bench(const ExperimentConfig &config, const BenchOptions &options) {
    const auto values = tradeoffs(config);
    if (options.traces == 0) throw ConfigError("bench needs at least one trace");
    const auto baseSeed = config.trace.synthetic_seed.value_or(1);
    const auto baseSlot = config.trace.synthetic.slot_duration;

    struct Cell {
        std::vector<Metrics> perA;
        double seconds = 0.;
    };
    const auto run = [&](const CapacityTrace &trace, const ThresholdMode &mode) {
        const auto start = std::chrono::steady_clock::now();
        const auto candidates = enumerate_candidates(trace, config.video, mode);
        Cell cell;
        for (const auto a : values) {
            const auto r = select_candidate(candidates, a);
            cell.perA.push_back({r.outcome.utilization, r.outcome.quality, r.outcome.cost});
        }
        cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return cell;
    };

    // Per trace: baseline, then one cell per period, then one per quantum.
    const auto cellsPerTrace = 1 + options.periods.size() + options.quanta_bits.size();
    const auto cells = parallel_map(options.traces * cellsPerTrace, config.jobs, [&](std::size_t index) {
        const auto t = index / cellsPerTrace;
        const auto c = index % cellsPerTrace;
        auto synthetic = config.trace.synthetic;
        synthetic.seed = baseSeed + t;
        const auto trace = generate_synthetic(synthetic);
        if (c == 0) return run(trace, ThresholdMode::optimal());
        if (c <= options.periods.size()) return run(resample(trace, options.periods[c - 1]), ThresholdMode::optimal());
        return run(trace, ThresholdMode::invest(options.quanta_bits[c - 1 - options.periods.size()]));
    });

    const auto average = [&](std::size_t c, std::size_t ai) {
        Metrics m;
        double seconds = 0.;
        for (std::size_t t = 0; t < options.traces; ++t) {
            const auto &cell = cells[t * cellsPerTrace + c];
            m.utilization += cell.perA[ai].utilization;
            m.quality += cell.perA[ai].quality;
            m.cost += cell.perA[ai].cost;
            seconds += cell.seconds;
        }
        const auto n = static_cast<double>(options.traces);
        return std::pair{Metrics{m.utilization / n, m.quality / n, m.cost / n}, seconds / n};
    };

    CsvTable table("newcast.bench", {"sweep", "value", "a", "mean_runtime_s", "accuracy_utilization", "accuracy_quality",
                                     "accuracy_cost"});
    const auto emit = [&](const std::string &sweep, double value, std::size_t c) {
        for (std::size_t ai = 0; ai < values.size(); ++ai) {
            const auto [base, baseSeconds] = average(0, ai);
            // A sweep point identical to the baseline reuses its averages so the rate is exactly 1.
            const bool same = sweep == "period" && value == baseSlot;
            const auto [m, seconds] = same ? average(0, ai) : average(c, ai);
            const auto ratio = [](double x, double y) -> CsvTable::Cell {
                if (y == 0.) return std::monostate{};
                return x / y;
            };
            table.add_row({sweep, value, values[ai].value(), same ? baseSeconds : seconds,
                           ratio(m.utilization, base.utilization), ratio(m.quality, base.quality),
                           ratio(m.cost, base.cost)});
        }
    };
    for (std::size_t p = 0; p < options.periods.size(); ++p) emit("period", options.periods[p], 1 + p);
    for (std::size_t q = 0; q < options.quanta_bits.size(); ++q)
        emit("quantum_bits", options.quanta_bits[q], 1 + options.periods.size() + q);
    return table;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// Writes through a temporary file so a failure never leaves a partial output behind.
inline void write_file(const fs::path &path, const std::string &content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create " + path.parent_path().string());
    }
    const auto temp = path.string() + ".tmp";
    {
        std::ofstream out(temp, std::ios::binary);
        if (!out) throw IoError("cannot write " + temp);
        out << content;
        if (!out) throw IoError("failed writing " + temp);
    }
    std::error_code ec;
    fs::rename(temp, path, ec);
    if (ec) throw IoError("cannot move " + temp + " to " + path.string());
}

inline std::string to_text(const CsvTable &table) {
    std::ostringstream out;
    table.write(out);
    return out.str();
}

/// Payload files go to --out (or stdout); run metadata goes to a sidecar so payloads stay reproducible.
inline void emit(const ExperimentConfig &config, const std::vector<std::pair<std::string, std::string>> &files,
                 const std::string &command, std::ostream &stdoutStream) {
    if (!config.out_dir) {
        for (const auto &[name, content] : files) stdoutStream << content;
        return;
    }
    const fs::path dir(*config.out_dir);
    for (const auto &[name, content] : files) write_file(dir / name, content);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json files_json = json::array();
    for (const auto &[name, content] : files) files_json.push_back(name);
    const json metadata = {{"command", command}, {"generated_at", stamp}, {"files", files_json}};
    write_file(dir / "run_metadata.json", metadata.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline void parse_a_grid(const std::string &grid, std::vector<double> &out) {
    double lo = 0., hi = 0., step = 0.;
    char c1 = 0, c2 = 0;
    std::istringstream in(grid);
    if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.) || hi < lo)
        throw ConfigError("--a-grid expects lo:hi:step");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(lo + static_cast<double>(i) * step);
}

inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    CLI::App app{"Threshold-based anticipative video streaming planner"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Print help for every subcommand");

    ExperimentConfig config;
    std::optional<std::string> videoFile;
    std::string modeName = "optimal";
    double quantumMbit = 2.;
    std::optional<std::string> aGrid;
    bool trajectories = false;
    RobustnessOptions robust;
    BenchOptions benchOptions;
    std::vector<double> quantaMbit{1., 2., 3., 4., 5.};
    std::string mappingName = "throughput";
    std::string delimiter = ",";
    std::string tsCol = "timestamp_ms", latCol = "latitude", lonCol = "longitude", bytesCol = "bytes";
    bool noHeader = false;
    double tsScale = 1.;
    double speed = 50.;
    std::string traceOut;
    std::string logIn;

    const auto addCommon = [&](CLI::App *sub, bool needsA) {
        sub->add_option("--video", videoFile, "Video spec JSON (default: reference session)")->envname("NEWCAST_VIDEO");
        sub->add_option("--trace", config.trace.file, "Capacity trace CSV")->envname("NEWCAST_TRACE");
        sub->add_option("--synthetic-seed", config.trace.synthetic_seed, "Generate a synthetic trace with this seed")
            ->envname("NEWCAST_SYNTHETIC_SEED");
        sub->add_option("--mean-bps", config.trace.synthetic.mean_bps, "Synthetic mean throughput")->capture_default_str();
        sub->add_option("--window-slots", config.trace.synthetic.window_slots, "Synthetic window length in slots")
            ->capture_default_str();
        sub->add_option("--trace-slot", config.trace.synthetic.slot_duration, "Synthetic slot duration (s)")
            ->capture_default_str();
        sub->add_option("--spread", config.trace.synthetic.spread_fraction, "Synthetic spread fraction")
            ->capture_default_str();
        if (needsA) {
            sub->add_option("--a", config.a_values, "Trade-off parameter (repeatable)")->take_all()->envname("NEWCAST_A");
            sub->add_option("--a-grid", aGrid, "Trade-off grid lo:hi:step");
        }
        sub->add_option("--mode", modeName, "Threshold walk: optimal or invest")
            ->check(CLI::IsMember({"optimal", "invest"}))
            ->envname("NEWCAST_MODE")
            ->capture_default_str();
        sub->add_option("--quantum-Q", quantumMbit, "INVEST quantum in Mbit")->envname("NEWCAST_QUANTUM_Q")->capture_default_str();
        sub->add_option("--slot", config.sampling_period, "Resample the trace to this sampling period (s)")
            ->envname("NEWCAST_SLOT");
        sub->add_option("--out", config.out_dir, "Output directory (stdout when omitted)")->envname("NEWCAST_OUT");
        sub->add_option("--jobs", config.jobs, "Worker threads")->envname("NEWCAST_JOBS")->capture_default_str();
    };
    const auto addLogColumns = [&](CLI::App *sub) {
        sub->add_option("--delimiter", delimiter, "Log delimiter (use 'space' for blanks)")->capture_default_str();
        sub->add_option("--col-timestamp", tsCol, "Timestamp column (name or 0-based index)")->capture_default_str();
        sub->add_option("--col-lat", latCol, "Latitude column")->capture_default_str();
        sub->add_option("--col-lon", lonCol, "Longitude column")->capture_default_str();
        sub->add_option("--col-bytes", bytesCol, "Bytes column")->capture_default_str();
        sub->add_flag("--no-header", noHeader, "Log has no header line (columns are indices)");
        sub->add_option("--timestamp-scale", tsScale, "Multiplier turning timestamps into ms")->capture_default_str();
        sub->add_option("--speed-kmph", speed, "Travel speed for the spatial-to-temporal mapping")->capture_default_str();
        sub->add_option("--mapping", mappingName, "throughput or bit-density")
            ->check(CLI::IsMember({"throughput", "bit-density"}))
            ->capture_default_str();
    };

    auto *plan = app.add_subcommand("plan", "Plan one session and write a JSON report");
    addCommon(plan, true);
    auto *sweep = app.add_subcommand("sweep-a", "Plan for several trade-off values (CSV)");
    addCommon(sweep, true);
    sweep->add_flag("--trajectories", trajectories, "Also dump per-slot buffer trajectories");
    auto *stall = app.add_subcommand("stall-scan", "Objective with one enforced stall at every position (CSV)");
    addCommon(stall, true);
    auto *robustCmd = app.add_subcommand("robustness", "Plan on the mean trace, score on each realization (CSV)");
    addCommon(robustCmd, true);
    robustCmd->add_option("--realizations-dir", robust.realizations_dir, "Directory of trace CSV files");
    robustCmd->add_option("--log", robust.logs, "Drive-test log (repeatable)")->take_all();
    robustCmd->add_option("--synthetic-realizations", robust.synthetic_realizations,
                          "Synthetic realizations seeded from --synthetic-seed");
    robustCmd->add_flag("--reoptimize", robust.reoptimize, "Compare against plans made on each realization");
    addLogColumns(robustCmd);
    auto *benchCmd = app.add_subcommand("bench", "Runtime and accuracy versus sampling period and INVEST quantum (CSV)");
    addCommon(benchCmd, true);
    benchCmd->add_option("--periods", benchOptions.periods, "Sampling periods (s)")->take_all()->capture_default_str();
    benchCmd->add_option("--quanta", quantaMbit, "INVEST quanta (Mbit)")->take_all()->capture_default_str();
    benchCmd->add_option("--traces", benchOptions.traces, "Seeded traces to average over")->capture_default_str();
    auto *gen = app.add_subcommand("gen-trace", "Write a synthetic capacity trace");
    addCommon(gen, false);
    gen->add_option("--trace-out", traceOut, "Output trace CSV")->required();
    auto *mapCmd = app.add_subcommand("map-log", "Turn a drive-test log into a capacity trace");
    mapCmd->add_option("--log", logIn, "Drive-test log")->required();
    mapCmd->add_option("--trace-out", traceOut, "Output trace CSV")->required();
    mapCmd->add_option("--slot", config.sampling_period, "Slot duration (s)");
    addLogColumns(mapCmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return kConfig;
    }

    try {
        if (videoFile) config.video = load_video(*videoFile);
        if (aGrid) parse_a_grid(*aGrid, config.a_values);
        if (config.jobs == 0) config.jobs = std::max(1u, std::thread::hardware_concurrency());
        try {
            config.mode = modeName == "invest" ? ThresholdMode::invest(quantumMbit * 1e6) : ThresholdMode::optimal();
        } catch (const ArgumentError &e) {
            throw ConfigError(e.what());
        }
        const auto column = [&](const std::string &text) -> ColumnMap::Column {
            if (!text.empty() && std::ranges::all_of(text, [](char ch) { return ch >= '0' && ch <= '9'; }))
                return static_cast<std::size_t>(std::stoul(text));
            return text;
        };
        robust.columns.delimiter = delimiter == "space" ? ' ' : delimiter == "tab" ? '\t' : delimiter.at(0);
        robust.columns.timestamp = column(tsCol);
        robust.columns.latitude = column(latCol);
        robust.columns.longitude = column(lonCol);
        robust.columns.bytes = column(bytesCol);
        robust.columns.has_header = !noHeader;
        robust.columns.timestamp_scale_to_ms = tsScale;
        robust.speed_kmph = speed;
        robust.mapping = mappingName == "bit-density" ? MappingMode::bit_density : MappingMode::throughput_field;

        std::vector<std::pair<std::string, std::string>> files;
        std::string command;
        if (*plan) {
            command = "plan";
            files.emplace_back("plan_report.json", plan_report(config).dump(2) + "\n");
        } else if (*sweep) {
            command = "sweep-a";
            const auto result = sweep_a(config, trajectories);
            files.emplace_back("sweep_a.csv", to_text(result.summary));
            for (const auto &[name, table] : result.trajectories) files.emplace_back(name, to_text(table));
        } else if (*stall) {
            command = "stall-scan";
            files.emplace_back("stall_scan.csv", to_text(stall_scan(config)));
        } else if (*robustCmd) {
            command = "robustness";
            files.emplace_back("robustness.csv", to_text(robustness(config, robust)));
        } else if (*benchCmd) {
            command = "bench";
            benchOptions.quanta_bits.clear();
            for (const auto q : quantaMbit) benchOptions.quanta_bits.push_back(q * 1e6);
            files.emplace_back("bench.csv", to_text(bench(config, benchOptions)));
        } else if (*gen) {
            auto trace = load_trace(config);
            std::ostringstream text;
            write_trace_csv(text, trace);
            write_file(traceOut, text.str());
            return kOk;
        } else if (*mapCmd) {
            const auto log = ingest_csv(logIn, robust.columns);
            const auto trace = temporal_mapping(log, robust.speed_kmph, config.sampling_period.value_or(1.),
                                                robust.mapping);
            std::ostringstream text;
            write_trace_csv(text, trace);
            write_file(traceOut, text.str());
            return kOk;
        }
        emit(config, files, command, out);
        return kOk;
    } catch (const NoFeasibleSessionError &e) {
        err << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const InfeasiblePlanError &e) {
        err << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const IoError &e) {
        err << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const ParseError &e) {
        err << "input error: " << e.what() << '\n';
        return kIo;
    } catch (const ConfigError &e) {
        err << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const ArgumentError &e) {
        err << "config error: " << e.what() << '\n';
        return kConfig;
    }
}

} // namespace newcast::cli
