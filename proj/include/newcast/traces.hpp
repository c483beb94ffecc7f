#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "core_model.hpp"
#include "errors.hpp"

namespace newcast {

// ---------------------------------------------------------------------------
// Synthetic traces
// ---------------------------------------------------------------------------

struct SyntheticTraceConfig {
    double mean_bps = ReferenceWindow::mean_bps;
    std::size_t window_slots = ReferenceWindow::slots;
    double slot_duration = ReferenceWindow::slot_duration;
    std::uint64_t seed = 1;
    double spread_fraction = 0.5;  ///< Half-width of the uniform band relative to the mean.

    void validate() const {
        if (!(mean_bps > 0.) || !std::isfinite(mean_bps)) throw ArgumentError("mean throughput must be positive");
        if (!(spread_fraction >= 0. && spread_fraction < 1.)) throw ArgumentError("spread must lie in [0, 1)");
        if (!(slot_duration > 0.)) throw ArgumentError("slot duration must be positive");
        if (window_slots == 0) throw ArgumentError("window needs at least one slot");
    }
};

/// I.i.d. uniform capacities on [mean(1-spread), mean(1+spread)].
///
/// The uniform draw is built from the raw 64-bit engine output so a seed yields the same trace on
/// every standard library.
inline CapacityTrace generate_synthetic(const SyntheticTraceConfig &config) {
    config.validate();
    std::mt19937_64 engine(config.seed);
    const auto low = config.mean_bps * (1. - config.spread_fraction);
    const auto width = 2. * config.mean_bps * config.spread_fraction;
    std::vector<double> capacities(config.window_slots);
    for (auto &c : capacities) {
        const auto unit = static_cast<double>(engine() >> 11) * 0x1.0p-53;
        c = low + width * unit;
    }
    return {config.slot_duration, std::move(capacities)};
}

/// Per-slot arithmetic mean of equally slotted traces.
inline CapacityTrace mean_trace(std::span<const CapacityTrace> traces) {
    if (traces.empty()) throw ArgumentError("no traces to average");
    const auto &first = traces.front();
    std::vector<double> sums(first.size(), 0.);
    for (const auto &trace : traces) {
        if (trace.size() != first.size() || trace.slot_duration() != first.slot_duration())
            throw ArgumentError("traces have mismatched slotting");
        for (std::size_t k = 0; k < sums.size(); ++k) sums[k] += trace[k];
    }
    for (auto &s : sums) s /= static_cast<double>(traces.size());
    return {first.slot_duration(), std::move(sums), first.origin_time()};
}

/// Coarser slotting: averages groups of `period / slot_duration` slots; a trailing partial group is dropped.
inline CapacityTrace resample(const CapacityTrace &trace, double period) {
    const auto ratio = period / trace.slot_duration();
    const auto group = static_cast<std::size_t>(std::llround(ratio));
    if (group < 1 || std::abs(ratio - static_cast<double>(group)) > 1e-9 * ratio)
        throw ArgumentError("sampling period must be a whole multiple of the slot duration");
    std::vector<double> capacities;
    for (std::size_t k = 0; k + group <= trace.size(); k += group) {
        double sum = 0.;
        for (std::size_t i = 0; i < group; ++i) sum += trace[k + i];
        capacities.push_back(sum / static_cast<double>(group));
    }
    return {period, std::move(capacities), trace.origin_time()};
}

// ---------------------------------------------------------------------------
// Trace files: "# slot_duration=<s> origin_time=<s>", then "slot_index,capacity_bps" rows
// ---------------------------------------------------------------------------

namespace detail {

/// Shortest representation that parses back to the same double.
inline std::string format_double(double value) {
    char buffer[64];
    const auto [end, ec] = std::to_chars(std::begin(buffer), std::end(buffer), value);
    if (ec != std::errc{}) throw Error("cannot format number");
    return {buffer, end};
}

inline std::optional<double> parse_double(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double value = 0.;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) return std::nullopt;
    return value;
}

inline std::vector<std::string_view> split(std::string_view line, char delimiter) {
    std::vector<std::string_view> fields;
    if (delimiter == ' ') {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
            const auto start = i;
            while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
            if (i > start) fields.push_back(line.substr(start, i - start));
        }
        return fields;
    }
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == delimiter) {
            auto field = line.substr(start, i - start);
            while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.remove_suffix(1);
            while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
            fields.push_back(field);
            start = i + 1;
        }
    }
    return fields;
}

} // namespace detail

inline void write_trace_csv(std::ostream &out, const CapacityTrace &trace) {
    out << "# slot_duration=" << detail::format_double(trace.slot_duration())
        << " origin_time=" << detail::format_double(trace.origin_time()) << '\n';
    out << "slot_index,capacity_bps\n";
    for (std::size_t k = 0; k < trace.size(); ++k) out << k << ',' << detail::format_double(trace[k]) << '\n';
}

inline CapacityTrace read_trace_csv(std::istream &in) {
    std::string line;
    std::size_t lineNo = 0;
    std::optional<double> slotDuration;
    double origin = 0.;
    std::vector<double> capacities;
    bool sawColumns = false;
    while (std::getline(in, line)) {
        ++lineNo;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::istringstream meta(line.substr(1));
            std::string item;
            while (meta >> item) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) continue;
                const auto key = item.substr(0, eq);
                const auto value = detail::parse_double(std::string_view(item).substr(eq + 1));
                if (!value) throw ParseError(lineNo, "bad value for " + key);
                if (key == "slot_duration") slotDuration = *value;
                else if (key == "origin_time") origin = *value;
            }
            continue;
        }
        if (!sawColumns) {
            if (line != "slot_index,capacity_bps") throw ParseError(lineNo, "expected header slot_index,capacity_bps");
            sawColumns = true;
            continue;
        }
        const auto fields = detail::split(line, ',');
        if (fields.size() != 2) throw ParseError(lineNo, "expected 2 fields");
        const auto index = detail::parse_double(fields[0]);
        const auto value = detail::parse_double(fields[1]);
        if (!index || !value) throw ParseError(lineNo, "non-numeric field");
        if (*index != static_cast<double>(capacities.size())) throw ParseError(lineNo, "slot indices must be 0,1,2,...");
        capacities.push_back(*value);
    }
    if (!slotDuration) throw ParseError(0, "missing '# slot_duration=' header");
    if (!sawColumns) throw ParseError(0, "missing column header");
    try {
        return {*slotDuration, std::move(capacities), origin};
    } catch (const ArgumentError &e) {
        throw ParseError(0, e.what());
    }
}

inline void save_trace(const std::string &path, const CapacityTrace &trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_trace_csv(out, trace);
    if (!out) throw IoError("failed writing " + path);
}

inline CapacityTrace load_trace(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return read_trace_csv(in);
}

// ---------------------------------------------------------------------------
// Drive-test logs
// ---------------------------------------------------------------------------

struct BandwidthSample {
    double timestamp_ms = 0.;
    std::optional<double> latitude;
    std::optional<double> longitude;
    double bytes_received = 0.;
};

struct RejectedRow {
    std::size_t line = 0;
    std::string reason;
};

struct RawBandwidthLog {
    std::vector<BandwidthSample> samples;
    std::vector<RejectedRow> rejected;  ///< Only filled when malformed rows are skipped.
    std::size_t data_rows = 0;          ///< Non-blank rows after the header; samples + rejected.

    [[nodiscard]] bool has_coordinates() const {
        return !samples.empty() && std::ranges::all_of(samples, [](const BandwidthSample &s) {
                   return s.latitude.has_value() && s.longitude.has_value();
               });
    }
};

/// Where each field lives. A column is named (header required) or a 0-based index.
struct ColumnMap {
    using Column = std::variant<std::string, std::size_t>;

    Column timestamp = std::string("timestamp_ms");
    std::optional<Column> latitude = Column(std::string("latitude"));
    std::optional<Column> longitude = Column(std::string("longitude"));
    Column bytes = std::string("bytes");
    char delimiter = ',';  ///< ' ' splits on any run of blanks.
    bool has_header = true;
    double timestamp_scale_to_ms = 1.;  ///< 1000 for timestamps in seconds.
    bool skip_malformed = false;        ///< Collect bad rows in `rejected` instead of failing.
};

inline RawBandwidthLog parse_bandwidth_log(std::istream &in, const ColumnMap &map) {
    std::string line;
    std::size_t lineNo = 0;
    std::map<std::string, std::size_t, std::less<>> header;
    bool headerDone = !map.has_header;

    const auto resolve = [&](const ColumnMap::Column &column) -> std::size_t {
        if (const auto *index = std::get_if<std::size_t>(&column)) return *index;
        const auto &name = std::get<std::string>(column);
        const auto it = header.find(name);
        if (it == header.end()) throw MissingColumnError(name);
        return it->second;
    };

    std::size_t tsCol = 0, bytesCol = 0;
    std::optional<std::size_t> latCol, lonCol;
    const auto resolveAll = [&] {
        tsCol = resolve(map.timestamp);
        bytesCol = resolve(map.bytes);
        if (map.latitude) latCol = resolve(*map.latitude);
        if (map.longitude) lonCol = resolve(*map.longitude);
    };
    if (headerDone) resolveAll();

    RawBandwidthLog log;
    while (std::getline(in, line)) {
        ++lineNo;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto fields = detail::split(line, map.delimiter);
        if (!headerDone) {
            for (std::size_t i = 0; i < fields.size(); ++i) header.emplace(std::string(fields[i]), i);
            headerDone = true;
            resolveAll();
            continue;
        }
        ++log.data_rows;
        std::string problem;
        const auto field = [&](std::size_t col, const char *name) -> std::optional<double> {
            if (col >= fields.size()) {
                problem = std::string("missing field ") + name;
                return std::nullopt;
            }
            const auto value = detail::parse_double(fields[col]);
            if (!value || !std::isfinite(*value)) problem = std::string("non-numeric ") + name;
            return value;
        };

        BandwidthSample sample;
        const auto ts = field(tsCol, "timestamp");
        const auto bytes = field(bytesCol, "bytes");
        if (ts) sample.timestamp_ms = *ts * map.timestamp_scale_to_ms;
        if (bytes) {
            sample.bytes_received = *bytes;
            if (*bytes < 0.) problem = "negative byte count";
        }
        if (latCol) {
            sample.latitude = field(*latCol, "latitude");
            if (sample.latitude && std::abs(*sample.latitude) > 90.) problem = "latitude out of range";
        }
        if (lonCol) {
            sample.longitude = field(*lonCol, "longitude");
            if (sample.longitude && std::abs(*sample.longitude) > 180.) problem = "longitude out of range";
        }
        if (problem.empty() && !log.samples.empty() && !(sample.timestamp_ms > log.samples.back().timestamp_ms))
            throw NonMonotoneTimestampError(lineNo, "timestamp does not increase (duplicate or out of order)");
        if (!problem.empty()) {
            if (!map.skip_malformed) throw ParseError(lineNo, problem);
            log.rejected.push_back({lineNo, problem});
            continue;
        }
        log.samples.push_back(sample);
    }
    if (!headerDone) throw ParseError(0, "empty file");
    return log;
}

/// Reads a drive-test bandwidth log under the declared column map.
inline RawBandwidthLog ingest_csv(const std::string &path, const ColumnMap &map = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return parse_bandwidth_log(in, map);
}

/// Great-circle distance in metres.
inline double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    constexpr double earthRadius = 6'371'008.8;
    constexpr double rad = std::numbers::pi / 180.;
    const auto dLat = (lat2 - lat1) * rad;
    const auto dLon = (lon2 - lon1) * rad;
    const auto h = std::sin(dLat / 2) * std::sin(dLat / 2)
                   + std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dLon / 2) * std::sin(dLon / 2);
    return 2. * earthRadius * std::asin(std::min(1., std::sqrt(h)));
}

enum class MappingMode {
    /// Capacity at a position is the throughput measured there; the trace replays it at the new speed.
    throughput_field,
    /// Bits received along the path are spread over distance and replayed at the new speed.
    bit_density,
};

/// Spatial-to-temporal mapping of a drive-test log.
///
/// Sample i (i >= 1) covers the path from sample i-1 to sample i and carries bytes_i received
/// over that interval. The path is walked at `speedKmph`; each output slot spans
/// speed * slotDuration metres and its capacity is the distance-weighted throughput in that
/// span (throughput_field) or the bits laid on it divided by the slot time (bit_density).
inline CapacityTrace temporal_mapping(const RawBandwidthLog &log, double speedKmph, double slotDuration,
                                      MappingMode mode = MappingMode::throughput_field) {
    if (!(speedKmph > 0.)) throw ArgumentError("speed must be positive");
    if (!(slotDuration > 0.)) throw ArgumentError("slot duration must be positive");
    if (log.samples.size() < 2) throw ArgumentError("need at least two samples");
    if (!log.has_coordinates()) throw ArgumentError("log has no coordinates; slot it in time directly");

    struct Piece {
        double from_m, to_m, bits, throughput_bps;
    };
    std::vector<Piece> pieces;
    double distance = 0.;
    for (std::size_t i = 1; i < log.samples.size(); ++i) {
        const auto &a = log.samples[i - 1];
        const auto &b = log.samples[i];
        const auto d = haversine_m(*a.latitude, *a.longitude, *b.latitude, *b.longitude);
        const auto elapsed = (b.timestamp_ms - a.timestamp_ms) / 1000.;
        const auto bits = b.bytes_received * 8.;
        pieces.push_back({distance, distance + d, bits, bits / elapsed});
        distance += d;
    }
    if (!(distance > 0.)) throw ArgumentError("log covers no distance (stationary); slot it in time directly");

    const auto speed = speedKmph / 3.6;
    const auto cell = speed * slotDuration;
    const auto slots = static_cast<std::size_t>(std::ceil(distance / cell - 1e-9));
    std::vector<double> weighted(slots, 0.), covered(slots, 0.);
    for (const auto &piece : pieces) {
        const auto length = piece.to_m - piece.from_m;
        if (length <= 0.) {
            // Zero-length hop: its bits land on the cell holding that point.
            if (mode == MappingMode::bit_density) {
                const auto k = std::min(slots - 1, static_cast<std::size_t>(piece.from_m / cell));
                weighted[k] += piece.bits;
            }
            continue;
        }
        auto k = std::min(slots - 1, static_cast<std::size_t>(piece.from_m / cell));
        for (; k < slots; ++k) {
            const auto lo = std::max(piece.from_m, static_cast<double>(k) * cell);
            const auto hi = std::min(piece.to_m, static_cast<double>(k + 1) * cell);
            if (hi <= lo) {
                if (static_cast<double>(k) * cell >= piece.to_m) break;
                continue;
            }
            const auto overlap = hi - lo;
            covered[k] += overlap;
            weighted[k] += mode == MappingMode::bit_density ? piece.bits * overlap / length
                                                            : piece.throughput_bps * overlap;
        }
    }
    std::vector<double> capacities(slots, 0.);
    for (std::size_t k = 0; k < slots; ++k) {
        if (mode == MappingMode::bit_density)
            capacities[k] = weighted[k] / slotDuration;
        else
            capacities[k] = covered[k] > 0. ? weighted[k] / covered[k] : 0.;
    }
    return {slotDuration, std::move(capacities)};
}

/// Time-slotted trace straight from the log timestamps, for stationary logs.
inline CapacityTrace time_slotting(const RawBandwidthLog &log, double slotDuration) {
    if (!(slotDuration > 0.)) throw ArgumentError("slot duration must be positive");
    if (log.samples.size() < 2) throw ArgumentError("need at least two samples");
    const auto t0 = log.samples.front().timestamp_ms / 1000.;
    const auto span = log.samples.back().timestamp_ms / 1000. - t0;
    const auto slots = static_cast<std::size_t>(std::ceil(span / slotDuration - 1e-9));
    std::vector<double> bits(slots, 0.);
    for (std::size_t i = 1; i < log.samples.size(); ++i) {
        const auto from = log.samples[i - 1].timestamp_ms / 1000. - t0;
        const auto to = log.samples[i].timestamp_ms / 1000. - t0;
        const auto total = log.samples[i].bytes_received * 8.;
        for (auto k = static_cast<std::size_t>(from / slotDuration); k < slots; ++k) {
            const auto lo = std::max(from, static_cast<double>(k) * slotDuration);
            const auto hi = std::min(to, static_cast<double>(k + 1) * slotDuration);
            if (hi <= lo) break;
            bits[k] += total * (hi - lo) / (to - from);
        }
    }
    for (auto &b : bits) b /= slotDuration;
    return {slotDuration, std::move(bits)};
}

} // namespace newcast
