#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace newcast {

/// Future capacity window, piecewise constant over equal-length slots.
class CapacityTrace {
public:
    CapacityTrace() = default;

    /// @param slotDuration Length of one slot in seconds (> 0).
    /// @param capacities Average capacity of each slot in bits/second (finite, >= 0).
    /// @param originTime Absolute time of the first slot boundary in seconds.
    CapacityTrace(double slotDuration, std::vector<double> capacities, double originTime = 0.)
        : slot_duration_(slotDuration), capacities_(std::move(capacities)), origin_time_(originTime) {
        if (!(slot_duration_ > 0.) || !std::isfinite(slot_duration_))
            throw ArgumentError("slot duration must be positive and finite");
        if (!std::isfinite(origin_time_))
            throw ArgumentError("origin time must be finite");
        for (std::size_t k = 0; k < capacities_.size(); ++k)
            if (!std::isfinite(capacities_[k]) || capacities_[k] < 0.)
                throw ArgumentError("capacity of slot " + std::to_string(k) + " must be finite and >= 0");
    }

    [[nodiscard]] double slot_duration() const noexcept { return slot_duration_; }
    [[nodiscard]] double origin_time() const noexcept { return origin_time_; }
    [[nodiscard]] std::span<const double> capacities() const noexcept { return capacities_; }
    [[nodiscard]] std::size_t size() const noexcept { return capacities_.size(); }
    [[nodiscard]] bool empty() const noexcept { return capacities_.empty(); }
    [[nodiscard]] double operator[](std::size_t k) const { return capacities_[k]; }

    /// Window length in seconds.
    [[nodiscard]] double window_length() const noexcept {
        return slot_duration_ * static_cast<double>(capacities_.size());
    }

    /// Bits the slot can carry when fully used.
    [[nodiscard]] double slot_volume(std::size_t k) const { return capacities_[k] * slot_duration_; }

    [[nodiscard]] double min_capacity() const {
        if (empty()) throw ArgumentError("empty capacity trace");
        return *std::ranges::min_element(capacities_);
    }

    [[nodiscard]] double max_capacity() const {
        if (empty()) throw ArgumentError("empty capacity trace");
        return *std::ranges::max_element(capacities_);
    }

    /// Sub-window of `count` slots starting at `first` (clamped to the end).
    [[nodiscard]] CapacityTrace slice(std::size_t first, std::size_t count = static_cast<std::size_t>(-1)) const {
        first = std::min(first, capacities_.size());
        const auto last = count > capacities_.size() - first ? capacities_.size() : first + count;
        return {slot_duration_,
                std::vector<double>(capacities_.begin() + static_cast<std::ptrdiff_t>(first),
                                    capacities_.begin() + static_cast<std::ptrdiff_t>(last)),
                origin_time_ + slot_duration_ * static_cast<double>(first)};
    }

    friend bool operator==(const CapacityTrace &, const CapacityTrace &) = default;

private:
    double slot_duration_ = 1.;
    std::vector<double> capacities_;
    double origin_time_ = 0.;
};

/// One encoding of the video.
struct QualityLevel {
    double bitrate_bps = 0.;
    double weight = 0.;

    friend bool operator==(const QualityLevel &, const QualityLevel &) = default;
};

/// Level indices are 1-based: level 1 is the lowest bitrate, level L the highest.
using LevelIndex = int;

/// A segmented video encoded at L levels.
class VideoSpec {
public:
    VideoSpec() = default;

    VideoSpec(std::size_t segments, std::size_t framesPerSegment, double frameRate,
              std::vector<QualityLevel> levels, std::size_t prefetchFrames)
        : n_segments_(segments), frames_per_segment_(framesPerSegment), frame_rate_(frameRate),
          levels_(std::move(levels)), prefetch_frames_(prefetchFrames) {
        if (n_segments_ == 0) throw ArgumentError("video needs at least one segment");
        if (frames_per_segment_ == 0) throw ArgumentError("segments need at least one frame");
        if (!(frame_rate_ > 0.) || !std::isfinite(frame_rate_)) throw ArgumentError("frame rate must be positive");
        if (levels_.empty()) throw ArgumentError("video needs at least one quality level");
        for (std::size_t j = 0; j < levels_.size(); ++j) {
            const auto &level = levels_[j];
            if (!(level.bitrate_bps > 0.) || !std::isfinite(level.bitrate_bps))
                throw ArgumentError("bitrates must be positive");
            if (!(level.weight > 0.) || level.weight > 1.)
                throw ArgumentError("weights must lie in (0, 1]");
            if (j > 0 && !(levels_[j - 1].bitrate_bps < level.bitrate_bps && levels_[j - 1].weight < level.weight))
                throw ArgumentError("bitrates and weights must be strictly increasing");
        }
        if (prefetch_frames_ < 1 || prefetch_frames_ > total_frames())
            throw ArgumentError("prefetch threshold must lie in [1, total frames]");
    }

    [[nodiscard]] std::size_t n_segments() const noexcept { return n_segments_; }
    [[nodiscard]] std::size_t frames_per_segment() const noexcept { return frames_per_segment_; }
    [[nodiscard]] double frame_rate() const noexcept { return frame_rate_; }
    [[nodiscard]] std::span<const QualityLevel> levels() const noexcept { return levels_; }
    [[nodiscard]] std::size_t prefetch_frames() const noexcept { return prefetch_frames_; }

    [[nodiscard]] LevelIndex level_count() const noexcept { return static_cast<LevelIndex>(levels_.size()); }
    [[nodiscard]] std::size_t total_frames() const noexcept { return n_segments_ * frames_per_segment_; }

    [[nodiscard]] const QualityLevel &level(LevelIndex j) const {
        if (j < 1 || j > level_count()) throw ArgumentError("level index out of range");
        return levels_[static_cast<std::size_t>(j - 1)];
    }

    /// Bits needed to deliver one frame at level j.
    [[nodiscard]] double frame_bits(LevelIndex j) const { return level(j).bitrate_bps / frame_rate_; }

    /// Size of the whole video at the top level (S_L).
    [[nodiscard]] double full_quality_bits() const {
        return levels_.back().bitrate_bps * static_cast<double>(total_frames()) / frame_rate_;
    }

    /// Segments that hold the start-up cache (ceil(Q0 / S)).
    [[nodiscard]] std::size_t cache_segments() const noexcept {
        return (prefetch_frames_ + frames_per_segment_ - 1) / frames_per_segment_;
    }

    /// Playback duration in seconds.
    [[nodiscard]] double playback_seconds() const noexcept {
        return static_cast<double>(total_frames()) / frame_rate_;
    }

    /// Same encoding and cache rule, different segment count.
    [[nodiscard]] VideoSpec with_segments(std::size_t segments) const {
        return {segments, frames_per_segment_, frame_rate_, levels_, prefetch_frames_};
    }

    friend bool operator==(const VideoSpec &, const VideoSpec &) = default;

private:
    std::size_t n_segments_ = 0;
    std::size_t frames_per_segment_ = 0;
    double frame_rate_ = 0.;
    std::vector<QualityLevel> levels_;
    std::size_t prefetch_frames_ = 0;
};

/// Weights w_i = b_i / b_L.
inline std::vector<double> weights_relative_to_top(std::span<const double> bitrates) {
    if (bitrates.empty()) throw ArgumentError("no bitrates");
    std::vector<double> weights;
    for (const auto b : bitrates) weights.push_back(b / bitrates.back());
    return weights;
}

/// Weights w_i = b_i / sum(b).
inline std::vector<double> weights_relative_to_sum(std::span<const double> bitrates) {
    if (bitrates.empty()) throw ArgumentError("no bitrates");
    const auto total = std::accumulate(bitrates.begin(), bitrates.end(), 0.);
    std::vector<double> weights;
    for (const auto b : bitrates) weights.push_back(b / total);
    return weights;
}

/// Reference session: 180 one-second segments at 30 fps, 4 s cache, five levels.
inline VideoSpec reference_video() {
    return {180, 30, 30.,
            {{400e3, 0.09}, {750e3, 0.17}, {1e6, 0.22}, {2.5e6, 0.55}, {4.5e6, 1.}},
            120};
}

/// Reference window: 190 one-second slots around a 2 Mbps mean.
struct ReferenceWindow {
    static constexpr std::size_t slots = 190;
    static constexpr double slot_duration = 1.;
    static constexpr double mean_bps = 2e6;
};

/// Per-segment level assignment.
struct QualityPlan {
    std::vector<LevelIndex> segment_levels;

    [[nodiscard]] std::size_t size() const noexcept { return segment_levels.size(); }
    [[nodiscard]] LevelIndex operator[](std::size_t s) const { return segment_levels[s]; }

    /// Every segment at one level.
    static QualityPlan uniform(const VideoSpec &spec, LevelIndex level) {
        return {std::vector<LevelIndex>(spec.n_segments(), level)};
    }

    /// Throws unless the plan has one in-range level per segment.
    void validate(const VideoSpec &spec) const {
        if (segment_levels.size() != spec.n_segments())
            throw ArgumentError("plan length " + std::to_string(segment_levels.size()) + " differs from "
                                + std::to_string(spec.n_segments()) + " segments");
        for (const auto level : segment_levels)
            if (level < 1 || level > spec.level_count()) throw ArgumentError("plan level out of range");
    }

    /// Cache segments at level 1 and non-decreasing levels afterwards.
    [[nodiscard]] bool is_ascending_after_cache(const VideoSpec &spec) const {
        const auto cache = std::min(spec.cache_segments(), segment_levels.size());
        for (std::size_t s = 0; s < cache; ++s)
            if (segment_levels[s] != 1) return false;
        for (std::size_t s = cache + 1; s < segment_levels.size(); ++s)
            if (segment_levels[s] < segment_levels[s - 1]) return false;
        return true;
    }

    friend auto operator<=>(const QualityPlan &, const QualityPlan &) = default;
};

/// Trade-off weight of quality against utilization.
class TradeoffParam {
public:
    constexpr TradeoffParam() = default;

    explicit TradeoffParam(double a) : a_(a) {
        if (!(a >= 0.) || !std::isfinite(a)) throw ArgumentError("trade-off parameter a must be finite and >= 0");
    }

    [[nodiscard]] constexpr double value() const noexcept { return a_; }

private:
    double a_ = 0.;
};

/// Transmit at full capacity in slots whose capacity reaches alpha, idle elsewhere.
struct ThresholdSchedule {
    double alpha = 0.;
    std::vector<bool> active_slots;
    std::vector<double> per_slot_rate;

    [[nodiscard]] bool active(std::size_t k) const { return active_slots[k]; }
};

inline ThresholdSchedule make_threshold_schedule(const CapacityTrace &trace, double alpha) {
    if (!(alpha >= 0.)) throw ArgumentError("threshold must be >= 0");
    ThresholdSchedule schedule{alpha, {}, {}};
    schedule.active_slots.reserve(trace.size());
    schedule.per_slot_rate.reserve(trace.size());
    for (const auto c : trace.capacities()) {
        const bool on = c >= alpha;
        schedule.active_slots.push_back(on);
        schedule.per_slot_rate.push_back(on ? c : 0.);
    }
    return schedule;
}

struct StallEvent {
    std::size_t slot = 0;    ///< Slot in which playback first froze.
    double duration_s = 0.;  ///< Total frozen time of this event.

    friend bool operator==(const StallEvent &, const StallEvent &) = default;
};

/// Everything observed about one simulated session.
struct SessionOutcome {
    std::vector<std::size_t> arrived_frames;  ///< u at the end of each slot.
    std::vector<double> watched_frames;       ///< l at the end of each slot.
    std::optional<std::size_t> startup_slot;  ///< First slot during which frames are played.
    std::vector<StallEvent> stall_events;
    std::vector<double> bits_used_per_slot;
    std::vector<LevelIndex> level_per_slot;   ///< Level streamed in each slot, 0 when idle.
    bool completed = false;                   ///< All frames delivered inside the window.
    double session_length_s = 0.;             ///< T: startup delay + playback + stalls.
    double utilization = 0.;
    double quality = 0.;
    double cost = 0.;

    [[nodiscard]] bool feasible() const noexcept { return completed && stall_events.empty(); }
};

/// sigma = (1/T) * sum_k bits_k / c_k.
inline double compute_utilization(const CapacityTrace &trace, std::span<const double> bitsUsedPerSlot,
                                  double sessionLength) {
    if (!(sessionLength > 0.)) throw ArgumentError("session length must be positive");
    if (bitsUsedPerSlot.size() > trace.size())
        throw ArgumentError("more bit counts than trace slots");
    double usedSeconds = 0.;
    for (std::size_t k = 0; k < bitsUsedPerSlot.size(); ++k) {
        const auto bits = bitsUsedPerSlot[k];
        if (bits < 0.) throw InvalidScheduleError("negative bits in slot " + std::to_string(k));
        if (bits == 0.) continue;
        const auto c = trace[k];
        if (c == 0.) throw InvalidScheduleError("bits sent on zero-capacity slot " + std::to_string(k));
        const auto volume = trace.slot_volume(k);
        if (bits > volume * (1. + 1e-9) + 1e-6)
            throw InvalidScheduleError("slot " + std::to_string(k) + " exceeds its capacity");
        usedSeconds += std::min(bits, volume) / c;
    }
    return usedSeconds / sessionLength;
}

/// Weighted fraction of frames per level.
inline double compute_quality(const VideoSpec &spec, const QualityPlan &plan) {
    plan.validate(spec);
    double weighted = 0.;
    for (const auto level : plan.segment_levels) weighted += spec.level(level).weight;
    return weighted / static_cast<double>(spec.n_segments());
}

/// Quality when only the first `framesDelivered` frames reached the client.
inline double compute_delivered_quality(const VideoSpec &spec, const QualityPlan &plan, std::size_t framesDelivered) {
    plan.validate(spec);
    const auto perSegment = spec.frames_per_segment();
    framesDelivered = std::min(framesDelivered, spec.total_frames());
    double weighted = 0.;
    for (std::size_t s = 0; s * perSegment < framesDelivered; ++s) {
        const auto frames = std::min(perSegment, framesDelivered - s * perSegment);
        weighted += spec.level(plan[s]).weight * static_cast<double>(frames);
    }
    return weighted / static_cast<double>(spec.total_frames());
}

constexpr double compute_cost(double utilization, double quality, TradeoffParam a) noexcept {
    return utilization - a.value() * quality;
}

} // namespace newcast
