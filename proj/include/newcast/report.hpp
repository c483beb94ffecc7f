#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "core_model.hpp"
#include "errors.hpp"
#include "planner.hpp"
#include "traces.hpp"

namespace newcast {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Thrown when an output payload does not match its declared schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Video spec files
// ---------------------------------------------------------------------------

inline json to_json(const VideoSpec &spec) {
    json levels = json::array();
    for (const auto &level : spec.levels()) levels.push_back({{"bitrate_bps", level.bitrate_bps}, {"weight", level.weight}});
    return {{"n_segments", spec.n_segments()},
            {"frames_per_segment", spec.frames_per_segment()},
            {"frame_rate", spec.frame_rate()},
            {"prefetch_frames", spec.prefetch_frames()},
            {"levels", levels}};
}

/// Reads a video description. Levels may omit "weight" when "weights" names a generator
/// ("relative_to_top" or "relative_to_sum").
inline VideoSpec video_from_json(const json &doc) {
    try {
        std::vector<double> bitrates;
        for (const auto &level : doc.at("levels")) bitrates.push_back(level.at("bitrate_bps").get<double>());
        std::vector<double> weights;
        if (doc.contains("weights")) {
            const auto rule = doc.at("weights").get<std::string>();
            if (rule == "relative_to_top") weights = weights_relative_to_top(bitrates);
            else if (rule == "relative_to_sum") weights = weights_relative_to_sum(bitrates);
            else throw ArgumentError("unknown weight rule '" + rule + "'");
        } else {
            for (const auto &level : doc.at("levels")) weights.push_back(level.at("weight").get<double>());
        }
        std::vector<QualityLevel> levels;
        for (std::size_t j = 0; j < bitrates.size(); ++j) levels.push_back({bitrates[j], weights[j]});
        return {doc.at("n_segments").get<std::size_t>(), doc.at("frames_per_segment").get<std::size_t>(),
                doc.at("frame_rate").get<double>(), std::move(levels), doc.at("prefetch_frames").get<std::size_t>()};
    } catch (const json::exception &e) {
        throw ArgumentError(std::string("video spec: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// JSON payloads
// ---------------------------------------------------------------------------

inline json to_json(const QualityPlan &plan) { return plan.segment_levels; }

inline json outcome_json(const SessionOutcome &outcome, const CapacityTrace &trace) {
    json stalls = json::array();
    for (const auto &stall : outcome.stall_events) stalls.push_back({{"slot", stall.slot}, {"duration_s", stall.duration_s}});
    return {{"utilization", outcome.utilization},
            {"quality", outcome.quality},
            {"cost", outcome.cost},
            {"completed", outcome.completed},
            {"session_length_s", outcome.session_length_s},
            {"startup_slot", outcome.startup_slot ? json(*outcome.startup_slot) : json(nullptr)},
            {"stall_events", stalls},
            {"trajectory",
             {{"slot_duration_s", trace.slot_duration()},
              {"capacity_bps", std::vector<double>(trace.capacities().begin(), trace.capacities().end())},
              {"arrived_frames", outcome.arrived_frames},
              {"watched_frames", outcome.watched_frames},
              {"bits_used", outcome.bits_used_per_slot},
              {"level", outcome.level_per_slot}}}};
}

namespace detail {

inline void require(bool ok, const std::string &what) {
    if (!ok) throw SchemaError("schema check failed: " + what);
}

inline void require_number(const json &doc, const char *key) {
    require(doc.contains(key) && doc.at(key).is_number() && std::isfinite(doc.at(key).get<double>()),
            std::string(key) + " must be a finite number");
}

inline void check_outcome(const json &outcome) {
    for (const auto *key : {"utilization", "quality", "cost", "session_length_s"}) require_number(outcome, key);
    require(outcome.contains("trajectory") && outcome.at("trajectory").is_object(), "trajectory object");
    const auto &trajectory = outcome.at("trajectory");
    const auto slots = trajectory.at("capacity_bps").size();
    for (const auto *key : {"arrived_frames", "watched_frames", "bits_used", "level"})
        require(trajectory.contains(key) && trajectory.at(key).is_array() && trajectory.at(key).size() == slots,
                std::string("trajectory.") + key + " must have one entry per slot");
}

} // namespace detail

/// Structural check of a plan report before it is written.
inline void validate_plan_report(const json &report) {
    using detail::require;
    require(report.value("schema", "") == "newcast.plan_report", "schema name");
    require(report.value("schema_version", 0) == kSchemaVersion, "schema version");
    detail::require_number(report, "a");
    detail::require_number(report, "alpha_th_bps");
    require(report.contains("plan") && report.at("plan").is_array(), "plan array");
    for (const auto &level : report.at("plan")) require(level.is_number_integer() && level.get<int>() >= 1, "plan levels");
    require(report.contains("outcome"), "outcome");
    detail::check_outcome(report.at("outcome"));
    require(report.contains("benchmark"), "benchmark");
    detail::require_number(report.at("benchmark"), "alpha_bps");
    detail::require_number(report.at("benchmark"), "cost");
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

/// Typed table written as "# schema=<name>/<version>", a header line, then rows.
class CsvTable {
public:
    using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

    CsvTable(std::string schema, std::vector<std::string> columns)
        : schema_(std::move(schema)), columns_(std::move(columns)) {}

    void add_row(std::vector<Cell> row) { rows_.push_back(std::move(row)); }

    [[nodiscard]] const std::string &schema() const noexcept { return schema_; }
    [[nodiscard]] const std::vector<std::string> &columns() const noexcept { return columns_; }
    [[nodiscard]] const std::vector<std::vector<Cell>> &rows() const noexcept { return rows_; }

    [[nodiscard]] std::size_t column(const std::string &name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i] == name) return i;
        throw ArgumentError("no column " + name);
    }

    /// Numeric value of a cell; NaN for empty cells.
    [[nodiscard]] double number(std::size_t row, const std::string &name) const {
        const auto &cell = rows_.at(row).at(column(name));
        if (const auto *d = std::get_if<double>(&cell)) return *d;
        if (const auto *i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
        return std::nan("");
    }

    void validate() const {
        detail::require(!columns_.empty(), "table has columns");
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            detail::require(rows_[r].size() == columns_.size(), "row " + std::to_string(r) + " width");
            for (const auto &cell : rows_[r])
                if (const auto *d = std::get_if<double>(&cell))
                    detail::require(std::isfinite(*d), "row " + std::to_string(r) + " has a non-finite number");
        }
    }

    void write(std::ostream &out) const {
        validate();
        out << "# schema=" << schema_ << '/' << kSchemaVersion << '\n';
        for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
        out << '\n';
        for (const auto &row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out << ',';
                std::visit(
                    [&](const auto &value) {
                        using T = std::decay_t<decltype(value)>;
                        if constexpr (std::is_same_v<T, double>) out << detail::format_double(value);
                        else if constexpr (std::is_same_v<T, std::int64_t>) out << value;
                        else if constexpr (std::is_same_v<T, std::string>) out << value;
                    },
                    row[i]);
            }
            out << '\n';
        }
    }

private:
    std::string schema_;
    std::vector<std::string> columns_;
    std::vector<std::vector<Cell>> rows_;
};

} // namespace newcast
