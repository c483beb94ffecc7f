#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "core_model.hpp"
#include "errors.hpp"

namespace newcast {

struct SimConfig {
    /// Send the start-up cache at full capacity regardless of the threshold.
    bool prefetch_greedy = true;
    /// Stall checks per slot; 1 checks only at slot boundaries.
    std::size_t checkpoints_per_slot = 1;
    /// Keep the arrival time of every frame in the transmission result.
    bool record_frame_arrivals = false;
};

/// Raw output of pushing a plan through a schedule.
struct Transmission {
    std::vector<double> bits_per_slot;
    std::vector<std::size_t> arrived_per_slot;  ///< Cumulative complete frames at each slot end.
    std::vector<LevelIndex> level_per_slot;     ///< 0 for idle slots.
    std::vector<double> frame_arrival_times;    ///< Absolute seconds, only when recorded.
    std::size_t frames_delivered = 0;
    bool completed = false;
};

namespace detail {

constexpr double kRelTol = 1e-9;

/// First frame after `frame` whose segment has a different level.
class LevelRuns {
public:
    LevelRuns(const VideoSpec &spec, const QualityPlan &plan) : perSegment_(spec.frames_per_segment()) {
        const auto n = plan.size();
        runEndSegment_.assign(n, n);
        for (std::size_t s = n; s-- > 0;)
            runEndSegment_[s] = (s + 1 < n && plan[s + 1] == plan[s]) ? runEndSegment_[s + 1] : s + 1;
    }

    [[nodiscard]] std::size_t run_end(std::size_t frame) const {
        return runEndSegment_[frame / perSegment_] * perSegment_;
    }

private:
    std::size_t perSegment_;
    std::vector<std::size_t> runEndSegment_;
};

/// Transmit the first `frameLimit` frames of the plan.
inline Transmission transmit(const CapacityTrace &trace, const ThresholdSchedule &schedule, const VideoSpec &spec,
                             const QualityPlan &plan, const SimConfig &config, std::size_t frameLimit) {
    const auto slots = trace.size();
    const auto perSegment = spec.frames_per_segment();
    const auto prefetch = spec.prefetch_frames();
    const auto dt = trace.slot_duration();
    const LevelRuns runs(spec, plan);

    Transmission out;
    out.bits_per_slot.assign(slots, 0.);
    out.arrived_per_slot.assign(slots, 0);
    out.level_per_slot.assign(slots, 0);
    if (config.record_frame_arrivals) out.frame_arrival_times.reserve(frameLimit);

    std::size_t frame = 0;
    double partial = 0.;  // bits of `frame` already sent
    for (std::size_t k = 0; k < slots; ++k) {
        const bool greedy = config.prefetch_greedy && frame < prefetch;
        const bool active = schedule.active(k);
        if (frame < frameLimit && (greedy || active)) {
            const auto capacity = trace[k];
            const auto budget = capacity * dt;
            const auto slotStart = trace.origin_time() + static_cast<double>(k) * dt;
            double used = 0.;
            LevelIndex slotLevel = 0;
            const auto deliver = [&](double usedAfter) {
                ++frame;
                if (config.record_frame_arrivals) out.frame_arrival_times.push_back(slotStart + usedAfter / capacity);
            };
            while (frame < frameLimit && used < budget) {
                const auto level = plan[frame / perSegment];
                if (slotLevel != 0 && level != slotLevel) break;
                auto limit = std::min(runs.run_end(frame), frameLimit);
                if (!active) {
                    if (frame >= prefetch) break;
                    limit = std::min(limit, prefetch);
                }
                slotLevel = level;
                const auto frameBits = spec.frame_bits(level);
                if (partial > 0.) {
                    const auto need = frameBits - partial;
                    if (used + need <= budget * (1. + kRelTol)) {
                        used = std::min(used + need, budget);
                        partial = 0.;
                        deliver(used);
                        continue;
                    }
                    partial += budget - used;
                    used = budget;
                    break;
                }
                const auto room = (budget - used) / frameBits;
                const auto whole = std::min(limit - frame, static_cast<std::size_t>(std::floor(room + kRelTol)));
                if (config.record_frame_arrivals)
                    for (std::size_t i = 1; i <= whole; ++i)
                        out.frame_arrival_times.push_back(
                            slotStart + std::min(used + static_cast<double>(i) * frameBits, budget) / capacity);
                frame += whole;
                used = std::min(used + static_cast<double>(whole) * frameBits, budget);
                if (frame < limit) {
                    // Not enough room for another whole frame: start it and carry the rest over.
                    partial = budget - used;
                    used = budget;
                    break;
                }
            }
            out.bits_per_slot[k] = used;
            out.level_per_slot[k] = used > 0. ? slotLevel : 0;
        }
        out.arrived_per_slot[k] = frame;
    }
    out.frames_delivered = frame;
    out.completed = frame == frameLimit;
    return out;
}

} // namespace detail

/// Deliver frames in order under the schedule; one level per slot, partial frames carry over.
inline Transmission transmit_video(const CapacityTrace &trace, const ThresholdSchedule &schedule,
                                   const VideoSpec &spec, const QualityPlan &plan, const SimConfig &config = {}) {
    plan.validate(spec);
    if (schedule.active_slots.size() != trace.size())
        throw ArgumentError("schedule was built on a different trace");
    return detail::transmit(trace, schedule, spec, plan, config, spec.total_frames());
}

/// Buffer evolution seen by the player.
struct PlaybackTrajectory {
    std::vector<std::size_t> arrived_frames;  ///< u per slot.
    std::vector<double> watched_frames;       ///< l per slot.
    std::optional<std::size_t> startup_slot;
    std::vector<StallEvent> stall_events;
    double session_length_s = 0.;  ///< Startup delay + playback + stalls; the window length if unfinished.
};

namespace detail {

/// Playback over a uniform checkpoint grid; `arrived[i]` counts frames in by the end of checkpoint i.
inline PlaybackTrajectory play(std::span<const std::size_t> arrived, std::size_t checkpointsPerSlot, double slotDuration,
                               std::size_t totalFrames, std::size_t prefetchFrames, double frameRate) {
    const auto step = slotDuration / static_cast<double>(checkpointsPerSlot);
    const auto perStep = frameRate * step;
    const auto slots = arrived.size() / checkpointsPerSlot;
    const auto total = static_cast<double>(totalFrames);

    PlaybackTrajectory out;
    out.arrived_frames.assign(slots, 0);
    out.watched_frames.assign(slots, 0.);

    std::optional<std::size_t> firstPlaying;  // checkpoint index
    double watched = 0.;
    double stalled = 0.;
    bool inStall = false;
    for (std::size_t i = 0; i < arrived.size(); ++i) {
        const auto have = static_cast<double>(arrived[i]);
        if (firstPlaying && i >= *firstPlaying) {
            const auto wanted = std::min(total, watched + perStep);
            if (wanted > have + kRelTol * total) {
                const auto frozen = std::min(step, (wanted - have) / frameRate);
                const auto slot = i / checkpointsPerSlot;
                if (!inStall) out.stall_events.push_back({slot, 0.});
                out.stall_events.back().duration_s += frozen;
                stalled += frozen;
                inStall = true;
                watched = std::max(watched, have);
            } else {
                inStall = false;
                watched = wanted;
            }
        }
        if (!firstPlaying && arrived[i] >= prefetchFrames) firstPlaying = i + 1;
        if ((i + 1) % checkpointsPerSlot == 0) {
            out.arrived_frames[i / checkpointsPerSlot] = arrived[i];
            out.watched_frames[i / checkpointsPerSlot] = watched;
        }
    }
    if (firstPlaying) out.startup_slot = *firstPlaying / checkpointsPerSlot;
    const bool complete = !arrived.empty() && arrived.back() >= totalFrames;
    if (complete && firstPlaying)
        out.session_length_s = static_cast<double>(*firstPlaying) * step + total / frameRate + stalled;
    else
        out.session_length_s = static_cast<double>(slots) * slotDuration;
    return out;
}

} // namespace detail

/// Playback from per-slot cumulative arrivals (checks at slot boundaries).
inline PlaybackTrajectory playback_trajectory(std::span<const std::size_t> arrivedPerSlot, const VideoSpec &spec,
                                              double slotDuration) {
    if (!(slotDuration > 0.)) throw ArgumentError("slot duration must be positive");
    if (!std::ranges::is_sorted(arrivedPerSlot)) throw ArgumentError("cumulative arrivals must be non-decreasing");
    return detail::play(arrivedPerSlot, 1, slotDuration, spec.total_frames(), spec.prefetch_frames(),
                        spec.frame_rate());
}

/// Playback from individual frame arrival times over `slots` slots starting at `originTime`.
inline PlaybackTrajectory playback_trajectory(std::span<const double> frameArrivalTimes, const VideoSpec &spec,
                                              double slotDuration, std::size_t slots, double originTime = 0.,
                                              std::size_t checkpointsPerSlot = 1) {
    if (!(slotDuration > 0.)) throw ArgumentError("slot duration must be positive");
    if (checkpointsPerSlot == 0) throw ArgumentError("need at least one checkpoint per slot");
    if (!std::ranges::is_sorted(frameArrivalTimes)) throw ArgumentError("arrival times must be non-decreasing");
    const auto step = slotDuration / static_cast<double>(checkpointsPerSlot);
    std::vector<std::size_t> arrived(slots * checkpointsPerSlot);
    std::size_t next = 0;
    for (std::size_t i = 0; i < arrived.size(); ++i) {
        const auto end = originTime + static_cast<double>(i + 1) * step;
        while (next < frameArrivalTimes.size() && frameArrivalTimes[next] <= end + detail::kRelTol * std::abs(end))
            ++next;
        arrived[i] = next;
    }
    return detail::play(arrived, checkpointsPerSlot, slotDuration, spec.total_frames(), spec.prefetch_frames(),
                        spec.frame_rate());
}

/// Transmission plus playback, without objective values.
inline SessionOutcome simulate_session(const CapacityTrace &trace, const ThresholdSchedule &schedule,
                                       const VideoSpec &spec, const QualityPlan &plan, const SimConfig &config = {}) {
    auto cfg = config;
    if (cfg.checkpoints_per_slot == 0) throw ArgumentError("need at least one checkpoint per slot");
    if (cfg.checkpoints_per_slot > 1) cfg.record_frame_arrivals = true;
    auto sent = transmit_video(trace, schedule, spec, plan, cfg);
    auto played = cfg.checkpoints_per_slot > 1
                      ? playback_trajectory(sent.frame_arrival_times, spec, trace.slot_duration(), trace.size(),
                                            trace.origin_time(), cfg.checkpoints_per_slot)
                      : playback_trajectory(sent.arrived_per_slot, spec, trace.slot_duration());
    SessionOutcome outcome;
    outcome.arrived_frames = std::move(played.arrived_frames);
    outcome.watched_frames = std::move(played.watched_frames);
    outcome.startup_slot = played.startup_slot;
    outcome.stall_events = std::move(played.stall_events);
    outcome.bits_used_per_slot = std::move(sent.bits_per_slot);
    outcome.level_per_slot = std::move(sent.level_per_slot);
    outcome.completed = sent.completed && outcome.startup_slot.has_value();
    outcome.session_length_s = played.session_length_s;
    return outcome;
}

/// True when the plan stalls or does not finish inside the window.
inline bool exist_violation(const CapacityTrace &trace, double alpha, const VideoSpec &spec, const QualityPlan &plan,
                            const SimConfig &config = {}) {
    return !simulate_session(trace, make_threshold_schedule(trace, alpha), spec, plan, config).feasible();
}

enum class EvalMode {
    strict,   ///< Any stall or unfinished delivery is an error.
    lenient,  ///< Stalls are recorded; metrics cover what was delivered.
};

/// Simulate and score a (threshold, plan) pair.
inline SessionOutcome evaluate(const CapacityTrace &trace, double alpha, const VideoSpec &spec, const QualityPlan &plan,
                               TradeoffParam a, EvalMode mode = EvalMode::strict, const SimConfig &config = {}) {
    auto outcome = simulate_session(trace, make_threshold_schedule(trace, alpha), spec, plan, config);
    if (mode == EvalMode::strict && !outcome.feasible())
        throw InfeasiblePlanError(outcome.completed ? "plan stalls under this threshold"
                                                    : "plan does not finish inside the window");
    const auto delivered = outcome.arrived_frames.empty() ? std::size_t{0} : outcome.arrived_frames.back();
    outcome.utilization = compute_utilization(trace, outcome.bits_used_per_slot, outcome.session_length_s);
    outcome.quality = compute_delivered_quality(spec, plan, delivered);
    outcome.cost = compute_cost(outcome.utilization, outcome.quality, a);
    return outcome;
}

} // namespace newcast
