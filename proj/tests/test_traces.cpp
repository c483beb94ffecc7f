#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <newcast/newcast.hpp>

#include "support/instances.hpp"

using namespace newcast;

namespace {

double bits_in(const CapacityTrace &t) {
    double s = 0.;
    for (std::size_t k = 0; k < t.size(); ++k) s += t.slot_volume(k);
    return s;
}

double bits_in(const RawBandwidthLog &log) {
    double s = 0.;
    for (std::size_t i = 1; i < log.samples.size(); ++i) s += log.samples[i].bytes_received * 8.;
    return s;
}

constexpr double kMetresPerDegree = 6'371'008.8 * std::numbers::pi / 180.;

/// Log of a drive along a meridian at `speedMps`, one sample per second.
RawBandwidthLog straight_drive(std::size_t samples, double speedMps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    RawBandwidthLog log;
    for (std::size_t i = 0; i < samples; ++i) {
        const double lat = 59.9 + double(i) * speedMps / kMetresPerDegree;
        log.samples.push_back({1000. * double(i), lat, 10.75, i ? fixtures::uniform(rng, 1e5, 5e5) : 0.});
    }
    log.data_rows = samples;
    return log;
}

} // namespace

TEST(Synthetic, ZeroSpreadIsConstant) {
    SyntheticTraceConfig cfg;
    cfg.spread_fraction = 0.;
    const auto t = generate_synthetic(cfg);
    for (const auto c : t.capacities()) EXPECT_EQ(c, cfg.mean_bps);
}

TEST(Synthetic, SeedDeterminesTrace) {
    SyntheticTraceConfig cfg;
    cfg.seed = 42;
    EXPECT_EQ(generate_synthetic(cfg), generate_synthetic(cfg));
    auto other = cfg;
    other.seed = 43;
    EXPECT_FALSE(generate_synthetic(cfg) == generate_synthetic(other));
}

TEST(Synthetic, MeanAndBand) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto t = fixtures::reference_trace(seed);
        EXPECT_EQ(t.size(), 190u);
        const auto mean = std::accumulate(t.capacities().begin(), t.capacities().end(), 0.) / double(t.size());
        EXPECT_NEAR(mean, 2e6, 0.1 * 2e6);
        EXPECT_GE(t.min_capacity(), 1e6);
        EXPECT_LE(t.max_capacity(), 3e6);
    }
}

TEST(Synthetic, RejectsBadConfig) {
    SyntheticTraceConfig cfg;
    cfg.spread_fraction = 1.5;
    EXPECT_THROW(generate_synthetic(cfg), ArgumentError);
    cfg = {};
    cfg.window_slots = 0;
    EXPECT_THROW(generate_synthetic(cfg), ArgumentError);
}

TEST(MeanTrace, Examples) {
    const std::vector<CapacityTrace> same{CapacityTrace(1., {1., 2.}), CapacityTrace(1., {1., 2.})};
    EXPECT_EQ(mean_trace(same), same[0]);
    const std::vector<CapacityTrace> swapped{CapacityTrace(1., {1., 3.}), CapacityTrace(1., {3., 1.})};
    EXPECT_EQ(mean_trace(swapped), CapacityTrace(1., {2., 2.}));
    const std::vector<CapacityTrace> mismatched{CapacityTrace(1., {1., 3.}), CapacityTrace(2., {3., 1.})};
    EXPECT_THROW(mean_trace(mismatched), ArgumentError);
    EXPECT_THROW(mean_trace(std::vector<CapacityTrace>{}), ArgumentError);
}

TEST(MeanTrace, TwentyRealizations) {
    std::vector<CapacityTrace> traces;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) traces.push_back(fixtures::reference_trace(seed));
    const auto mean = mean_trace(traces);
    for (std::size_t k = 0; k < mean.size(); ++k) {
        double sum = 0.;
        for (const auto &t : traces) sum += t[k];
        EXPECT_NEAR(mean[k], sum / 20., 1e-15 * sum);
    }
}

TEST(Resample, AveragesGroups) {
    const CapacityTrace t(1., {1., 3., 5., 7., 9.});
    EXPECT_EQ(resample(t, 2.), CapacityTrace(2., {2., 6.}));
    EXPECT_EQ(resample(t, 1.), t);
    EXPECT_THROW(resample(t, 1.5), ArgumentError);
}

TEST(TraceCsv, RoundTripIsBitExact) {
    std::mt19937_64 rng(9);
    std::vector<double> c{0., 0.1 + 0.2, 1e-300, 4.9e-324, 1.7976931348623157e308, 2e6};
    for (int i = 0; i < 500; ++i) c.push_back(fixtures::uniform(rng, 0., 1e7));
    const CapacityTrace t(0.1 + 0.2, c, 1. / 3.);
    std::stringstream io;
    write_trace_csv(io, t);
    const auto back = read_trace_csv(io);
    EXPECT_EQ(back.slot_duration(), t.slot_duration());
    EXPECT_EQ(back.origin_time(), t.origin_time());
    ASSERT_EQ(back.size(), t.size());
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_EQ(std::bit_cast<std::uint64_t>(back[k]), std::bit_cast<std::uint64_t>(t[k]));
}

TEST(TraceCsv, Errors) {
    std::istringstream noMeta("slot_index,capacity_bps\n0,1\n");
    EXPECT_THROW(read_trace_csv(noMeta), ParseError);
    std::istringstream gap("# slot_duration=1\nslot_index,capacity_bps\n0,1\n2,1\n");
    try {
        read_trace_csv(gap);
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_EQ(e.line(), 4u);
    }
    std::istringstream text("# slot_duration=1\nslot_index,capacity_bps\n0,fast\n");
    EXPECT_THROW(read_trace_csv(text), ParseError);
    EXPECT_THROW(load_trace("/nonexistent/trace.csv"), IoError);
}

TEST(Ingest, ThreeRows) {
    std::istringstream in("timestamp_ms,latitude,longitude,bytes\n0,59.9,10.7,0\n1000,59.90001,10.7,1200\n"
                          "2000,59.90002,10.7,1500\n");
    const auto log = parse_bandwidth_log(in, {});
    EXPECT_EQ(log.samples.size(), 3u);
    EXPECT_TRUE(log.has_coordinates());
    EXPECT_DOUBLE_EQ(log.samples[2].bytes_received, 1500.);
}

TEST(Ingest, DuplicateTimestampNamesLine) {
    std::istringstream in("timestamp_ms,latitude,longitude,bytes\n0,59.9,10.7,0\n1000,59.9,10.7,1\n1000,59.9,10.7,2\n");
    try {
        parse_bandwidth_log(in, {});
        FAIL();
    } catch (const NonMonotoneTimestampError &e) {
        EXPECT_EQ(e.line(), 4u);
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
    }
}

TEST(Ingest, HalfHourLogConservesBytes) {
    std::mt19937_64 rng(5);
    std::ostringstream file;
    file << "ts;lat;lon;rx\n";
    double checksum = 0.;
    for (int i = 0; i < 1800; ++i) {
        const auto bytes = static_cast<long>(fixtures::uniform(rng, 0., 4e5));
        checksum += double(bytes);
        file << 1'700'000'000LL + i << ';' << 59.9 + i * 1e-4 << ';' << 10.7 << ';' << bytes << '\n';
    }
    ColumnMap map;
    map.timestamp = std::string("ts");
    map.latitude = ColumnMap::Column(std::string("lat"));
    map.longitude = ColumnMap::Column(std::string("lon"));
    map.bytes = std::string("rx");
    map.delimiter = ';';
    map.timestamp_scale_to_ms = 1000.;
    std::istringstream in(file.str());
    const auto log = parse_bandwidth_log(in, map);
    EXPECT_EQ(log.samples.size(), 1800u);
    double sum = 0.;
    for (const auto &s : log.samples) sum += s.bytes_received;
    EXPECT_EQ(sum, checksum);
}

TEST(Ingest, IndexColumnsAndBlankDelimiter) {
    std::istringstream in("0  59.9 10.7   0\n1000 59.91\t10.7 50\n");
    ColumnMap map;
    map.timestamp = std::size_t{0};
    map.latitude = ColumnMap::Column(std::size_t{1});
    map.longitude = ColumnMap::Column(std::size_t{2});
    map.bytes = std::size_t{3};
    map.delimiter = ' ';
    map.has_header = false;
    const auto log = parse_bandwidth_log(in, map);
    ASSERT_EQ(log.samples.size(), 2u);
    EXPECT_DOUBLE_EQ(*log.samples[1].latitude, 59.91);
}

TEST(Ingest, MalformedRowsAreCountedNotLost) {
    const std::string text = "timestamp_ms,latitude,longitude,bytes\n0,59.9,10.7,0\n500,x,10.7,3\n1000,59.9,10.7,1\n"
                             "1500,59.9,10.7\n2000,59.9,10.7,-4\n3000,59.9,10.7,7\n";
    std::istringstream strict(text);
    EXPECT_THROW(parse_bandwidth_log(strict, {}), ParseError);
    ColumnMap map;
    map.skip_malformed = true;
    std::istringstream lenient(text);
    const auto log = parse_bandwidth_log(lenient, map);
    EXPECT_EQ(log.samples.size(), 3u);
    EXPECT_EQ(log.rejected.size(), 3u);
    EXPECT_EQ(log.data_rows, log.samples.size() + log.rejected.size());
    EXPECT_EQ(log.rejected[0].line, 3u);
}

TEST(Ingest, MissingColumn) {
    std::istringstream in("time,bytes\n0,1\n");
    EXPECT_THROW(parse_bandwidth_log(in, {}), MissingColumnError);
}

TEST(Mapping, FiftyKmphCoversOneSlot) {
    RawBandwidthLog log;
    const double metres = 50. / 3.6;
    log.samples.push_back({0., 59.9, 10.7, 0.});
    log.samples.push_back({1000., 59.9 + metres / kMetresPerDegree, 10.7, 1e5});
    EXPECT_NEAR(haversine_m(59.9, 10.7, 59.9 + metres / kMetresPerDegree, 10.7), metres, 1e-6);
    const auto t = temporal_mapping(log, 50., 1.);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_NEAR(t[0], 8e5, 1e-3);
}

TEST(Mapping, DoublingSpeedHalvesDuration) {
    const auto log = straight_drive(601, 50. / 3.6, 2);
    const auto slow = temporal_mapping(log, 50., 1., MappingMode::bit_density);
    const auto fast = temporal_mapping(log, 100., 1., MappingMode::bit_density);
    EXPECT_EQ(slow.size(), 600u);
    EXPECT_EQ(fast.size(), 300u);
    EXPECT_NEAR(bits_in(slow), bits_in(log), 1e-9 * bits_in(log));
    EXPECT_NEAR(bits_in(fast), bits_in(log), 1e-9 * bits_in(log));
}

TEST(Mapping, ThroughputFieldConservesBitsAtDriveSpeed) {
    const auto log = straight_drive(601, 50. / 3.6, 3);
    const auto t = temporal_mapping(log, 50., 1.);
    EXPECT_NEAR(bits_in(t), bits_in(log), 0.01 * bits_in(log));
}

TEST(Mapping, CircularPathMatchesFineResampling) {
    // Loop of radius 400 m sampled at uneven angular steps.
    std::mt19937_64 rng(4);
    RawBandwidthLog log;
    const double lat0 = 59.9, lon0 = 10.7, radius = 400.;
    const double lonScale = kMetresPerDegree * std::cos(lat0 * std::numbers::pi / 180.);
    double angle = 0., time = 0.;
    while (angle < 2. * std::numbers::pi) {
        log.samples.push_back({time, lat0 + radius * std::sin(angle) / kMetresPerDegree,
                               lon0 + radius * std::cos(angle) / lonScale,
                               log.samples.empty() ? 0. : fixtures::uniform(rng, 5e4, 4e5)});
        angle += fixtures::uniform(rng, 0.01, 0.05);
        time += fixtures::uniform(rng, 800., 1200.);
    }
    const auto t = temporal_mapping(log, 50., 2.);

    // Independent pass: march along the path in 1 cm steps and average throughput per cell.
    std::vector<double> cum{0.}, rate;
    for (std::size_t i = 1; i < log.samples.size(); ++i) {
        const auto &a = log.samples[i - 1];
        const auto &b = log.samples[i];
        cum.push_back(cum.back() + haversine_m(*a.latitude, *a.longitude, *b.latitude, *b.longitude));
        rate.push_back(b.bytes_received * 8. / ((b.timestamp_ms - a.timestamp_ms) / 1000.));
    }
    const double cell = 50. / 3.6 * 2., step = 0.01;
    std::vector<double> sum(t.size(), 0.), count(t.size(), 0.);
    std::size_t piece = 0;
    for (double d = step / 2; d < cum.back(); d += step) {
        while (cum[piece + 1] < d) ++piece;
        const auto k = std::min(t.size() - 1, static_cast<std::size_t>(d / cell));
        sum[k] += rate[piece];
        count[k] += 1.;
    }
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(t[k], sum[k] / count[k], 0.01 * t[k]) << "cell " << k;
}

TEST(Mapping, StationaryLogNeedsTimeSlotting) {
    RawBandwidthLog log;
    for (int i = 0; i < 5; ++i) log.samples.push_back({1000. * i, 59.9, 10.7, i ? 1e5 : 0.});
    EXPECT_THROW(temporal_mapping(log, 50., 1.), ArgumentError);
    const auto t = time_slotting(log, 1.);
    EXPECT_EQ(t.size(), 4u);
    EXPECT_NEAR(bits_in(t), 4 * 8e5, 1e-6);
}
