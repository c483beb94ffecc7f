#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core_model.hpp"
#include "errors.hpp"
#include "session_sim.hpp"

namespace newcast {

// ---------------------------------------------------------------------------
// Thresholds
// ---------------------------------------------------------------------------

/// How NEWCAST walks the threshold axis.
struct ThresholdMode {
    enum class Kind { optimal, invest };

    Kind kind = Kind::optimal;
    double quantum_bits = 0.;  ///< Data abandoned per INVEST step (Q); unused in optimal mode.

    static ThresholdMode optimal() { return {}; }

    static ThresholdMode invest(double quantumBits) {
        if (!(quantumBits > 0.) || !std::isfinite(quantumBits)) throw ArgumentError("INVEST quantum must be positive");
        return {Kind::invest, quantumBits};
    }
};

/// Threshold after abandoning i*Q bits of the weakest slots.
///
/// Capacities are sorted ascending and their slot volumes accumulated; the result is the
/// capacity at the last position whose running volume stays within i*Q, or the smallest
/// capacity when even the weakest slot exceeds it.
inline double invest_threshold(const CapacityTrace &trace, std::size_t step, double quantumBits) {
    if (trace.empty()) throw ArgumentError("empty capacity trace");
    if (step < 1) throw ArgumentError("INVEST step index starts at 1");
    if (!(quantumBits > 0.)) throw ArgumentError("INVEST quantum must be positive");
    std::vector<double> sorted(trace.capacities().begin(), trace.capacities().end());
    std::ranges::sort(sorted);
    const auto budget = static_cast<double>(step) * quantumBits;
    double cumulative = 0.;
    std::optional<std::size_t> last;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cumulative += sorted[k] * trace.slot_duration();
        if (cumulative > budget * (1. + detail::kRelTol)) break;
        last = k;
    }
    return sorted[last.value_or(0)];
}

/// Distinct capacities in ascending order.
inline std::vector<double> optimal_threshold_candidates(const CapacityTrace &trace) {
    std::vector<double> values(trace.capacities().begin(), trace.capacities().end());
    std::ranges::sort(values);
    const auto [first, last] = std::ranges::unique(values);
    values.erase(first, last);
    return values;
}

// ---------------------------------------------------------------------------
// AWARE
// ---------------------------------------------------------------------------

struct AwareResult {
    bool feasible = false;
    QualityPlan plan;
    SessionOutcome outcome;  ///< Trajectories of the final plan; objective fields unset.
    std::size_t simulations = 0;
};

/// Ascending level assignment for a fixed threshold.
///
/// Starts from level 1 everywhere and, one level at a time, binary-searches the earliest
/// segment from which the whole tail can move up without a violation. Cache segments stay
/// at level 1.
inline AwareResult aware(const CapacityTrace &trace, double alpha, const VideoSpec &spec, const SimConfig &config = {}) {
    const auto schedule = make_threshold_schedule(trace, alpha);
    const auto segments = spec.n_segments();
    const auto cache = std::min(spec.cache_segments(), segments);

    AwareResult result;
    result.plan = QualityPlan::uniform(spec, 1);
    const auto violates = [&](const QualityPlan &plan) {
        ++result.simulations;
        return !simulate_session(trace, schedule, spec, plan, config).feasible();
    };

    if (!violates(result.plan)) {
        for (LevelIndex level = 2; level <= spec.level_count(); ++level) {
            const auto &levels = result.plan.segment_levels;
            const auto previous = std::ranges::find(levels.begin() + static_cast<std::ptrdiff_t>(cache), levels.end(),
                                                    level - 1);
            if (previous == levels.end()) break;
            auto lo = static_cast<std::size_t>(previous - levels.begin());
            auto hi = segments;
            while (lo < hi) {
                const auto mid = lo + (hi - lo) / 2;
                auto trial = result.plan;
                std::fill(trial.segment_levels.begin() + static_cast<std::ptrdiff_t>(mid), trial.segment_levels.end(),
                          level);
                if (violates(trial))
                    lo = mid + 1;
                else
                    hi = mid;
            }
            if (hi == segments) break;
            std::fill(result.plan.segment_levels.begin() + static_cast<std::ptrdiff_t>(hi),
                      result.plan.segment_levels.end(), level);
        }
    }

    result.outcome = simulate_session(trace, schedule, spec, result.plan, config);
    ++result.simulations;
    result.feasible = result.outcome.feasible();
    return result;
}

/// Scores an outcome in place.
inline void score_outcome(SessionOutcome &outcome, const CapacityTrace &trace, const VideoSpec &spec,
                          const QualityPlan &plan, TradeoffParam a) {
    const auto delivered = outcome.arrived_frames.empty() ? std::size_t{0} : outcome.arrived_frames.back();
    outcome.utilization = compute_utilization(trace, outcome.bits_used_per_slot, outcome.session_length_s);
    outcome.quality = compute_delivered_quality(spec, plan, delivered);
    outcome.cost = compute_cost(outcome.utilization, outcome.quality, a);
}

// ---------------------------------------------------------------------------
// NEWCAST
// ---------------------------------------------------------------------------

/// One feasible threshold with its AWARE plan, scored without the trade-off term.
struct Candidate {
    double alpha = 0.;
    QualityPlan plan;
    SessionOutcome outcome;
};

struct CandidateSet {
    std::vector<Candidate> feasible;  ///< Ascending alpha.
    std::size_t evaluated = 0;        ///< Includes the infeasible threshold that ended the walk.
};

struct PlanResult {
    double alpha_th = 0.;
    QualityPlan plan;
    SessionOutcome outcome;
    std::size_t candidates_evaluated = 0;
};

inline void require_window_covers(const CapacityTrace &trace, const VideoSpec &spec) {
    if (trace.empty()) throw ArgumentError("empty capacity trace");
    if (trace.window_length() < spec.playback_seconds())
        throw ArgumentError("capacity window (" + std::to_string(trace.window_length())
                            + " s) is shorter than the video (" + std::to_string(spec.playback_seconds()) + " s)");
}

/// Walks thresholds upward from c_min, running AWARE at each, until the first infeasible one.
inline CandidateSet enumerate_candidates(const CapacityTrace &trace, const VideoSpec &spec,
                                         const ThresholdMode &mode = ThresholdMode::optimal(),
                                         const SimConfig &config = {}) {
    require_window_covers(trace, spec);
    CandidateSet set;
    // Returns false once the walk must stop.
    const auto tryAlpha = [&](double alpha) {
        ++set.evaluated;
        auto run = aware(trace, alpha, spec, config);
        if (!run.feasible) return false;
        score_outcome(run.outcome, trace, spec, run.plan, TradeoffParam{});
        set.feasible.push_back({alpha, std::move(run.plan), std::move(run.outcome)});
        return true;
    };

    if (mode.kind == ThresholdMode::Kind::optimal) {
        for (const auto alpha : optimal_threshold_candidates(trace))
            if (!tryAlpha(alpha)) break;
    } else {
        double totalVolume = 0.;
        for (std::size_t k = 0; k < trace.size(); ++k) totalVolume += trace.slot_volume(k);
        auto alpha = trace.min_capacity();
        bool ok = tryAlpha(alpha);
        for (std::size_t step = 2; ok; ++step) {
            const auto next = invest_threshold(trace, step, mode.quantum_bits);
            if (next > alpha) {
                alpha = next;
                ok = tryAlpha(alpha);
            } else if (static_cast<double>(step) * mode.quantum_bits >= totalVolume) {
                break;
            }
        }
    }
    if (set.feasible.empty())
        throw NoFeasibleSessionError("the lowest level cannot be streamed without stalls even at full utilization");
    return set;
}

/// Lowest-cost candidate; ties go to the smaller threshold (candidates are sorted by alpha).
inline PlanResult select_candidate(const CandidateSet &set, TradeoffParam a) {
    if (set.feasible.empty()) throw NoFeasibleSessionError("no feasible threshold");
    const Candidate *best = nullptr;
    double bestCost = 0.;
    for (const auto &candidate : set.feasible) {
        const auto cost = compute_cost(candidate.outcome.utilization, candidate.outcome.quality, a);
        const auto tol = 1e-12 * std::max(1., std::abs(bestCost));
        if (!best || cost < bestCost - tol) {
            best = &candidate;
            bestCost = cost;
        }
    }
    PlanResult result{best->alpha, best->plan, best->outcome, set.evaluated};
    result.outcome.cost = bestCost;
    return result;
}

/// Threshold and ascending plan minimizing sigma - a * rho.
inline PlanResult plan_newcast(const CapacityTrace &trace, const VideoSpec &spec, TradeoffParam a,
                          const ThresholdMode &mode = ThresholdMode::optimal(), const SimConfig &config = {}) {
    return select_candidate(enumerate_candidates(trace, spec, mode, config), a);
}

/// The alpha = c_min reference: every slot used, AWARE plan at that threshold.
inline PlanResult benchmark(const CandidateSet &set, TradeoffParam a) {
    if (set.feasible.empty()) throw NoFeasibleSessionError("no feasible threshold");
    const auto &base = set.feasible.front();
    PlanResult result{base.alpha, base.plan, base.outcome, 1};
    result.outcome.cost = compute_cost(base.outcome.utilization, base.outcome.quality, a);
    return result;
}

// ---------------------------------------------------------------------------
// Exhaustive tree of ascending plans
// ---------------------------------------------------------------------------

struct OracleResult {
    bool feasible = false;
    QualityPlan plan;
    double utilization = 0.;
    double quality = 0.;
    double cost = 0.;
    std::size_t nodes = 0;
};

inline constexpr std::size_t kDefaultOracleBudget = 2'000'000;

/// Best ascending plan at a fixed threshold by depth-first enumeration with prefix pruning.
///
/// Maximizes quality; ties go to lower utilization, then the lexicographically smaller plan.
/// Refuses instances whose (L+1)^N bound exceeds the node budget.
inline OracleResult tree_oracle(const CapacityTrace &trace, double alpha, const VideoSpec &spec, TradeoffParam a,
                                std::size_t nodeBudget = kDefaultOracleBudget, const SimConfig &config = {}) {
    const auto segments = spec.n_segments();
    const auto bound = std::pow(static_cast<double>(spec.level_count() + 1), static_cast<double>(segments));
    if (bound > static_cast<double>(nodeBudget))
        throw BudgetExceededError("tree search bound (L+1)^N = " + std::to_string(bound) + " exceeds budget "
                                  + std::to_string(nodeBudget));

    const auto schedule = make_threshold_schedule(trace, alpha);
    const auto perSegment = spec.frames_per_segment();
    const auto cache = std::min(spec.cache_segments(), segments);

    OracleResult best;
    std::size_t nodes = 0;
    auto plan = QualityPlan::uniform(spec, 1);

    const auto prefixFeasible = [&](std::size_t prefixSegments) {
        if (++nodes > nodeBudget) throw BudgetExceededError("tree search exceeded its node budget");
        const auto frames = prefixSegments * perSegment;
        if (frames < spec.prefetch_frames()) return true;
        const auto sent = detail::transmit(trace, schedule, spec, plan, config, frames);
        if (!sent.completed) return false;
        const auto played = detail::play(sent.arrived_per_slot, 1, trace.slot_duration(), frames,
                                         spec.prefetch_frames(), spec.frame_rate());
        return played.startup_slot.has_value() && played.stall_events.empty();
    };

    const auto consider = [&] {
        auto outcome = simulate_session(trace, schedule, spec, plan, config);
        if (!outcome.feasible()) return;
        score_outcome(outcome, trace, spec, plan, a);
        const auto tol = 1e-12;
        const bool better = !best.feasible || outcome.quality > best.quality + tol
                            || (std::abs(outcome.quality - best.quality) <= tol
                                && (outcome.utilization < best.utilization - tol
                                    || (std::abs(outcome.utilization - best.utilization) <= tol && plan < best.plan)));
        if (better) {
            best.feasible = true;
            best.plan = plan;
            best.utilization = outcome.utilization;
            best.quality = outcome.quality;
            best.cost = outcome.cost;
        }
    };

    const std::function<void(std::size_t)> descend = [&](std::size_t segment) {
        if (segment == segments) {
            consider();
            return;
        }
        const LevelIndex floor = segment > cache ? plan[segment - 1] : 1;
        for (LevelIndex level = floor; level <= spec.level_count(); ++level) {
            plan.segment_levels[segment] = level;
            if (prefixFeasible(segment + 1)) descend(segment + 1);
        }
        plan.segment_levels[segment] = 1;
    };

    if (prefixFeasible(cache)) descend(cache);
    best.nodes = nodes;
    return best;
}

// ---------------------------------------------------------------------------
// Sessions with enforced stalls
// ---------------------------------------------------------------------------

struct StallPolicy {
    std::size_t k_stalls = 0;
    std::vector<std::size_t> stall_segments;  ///< Segment indices starting each new part; empty to auto-detect.
};

/// A session split into independently planned parts separated by re-buffering.
struct StalledPlanResult {
    std::vector<PlanResult> parts;
    std::vector<std::size_t> cut_segments;
    std::vector<std::size_t> part_offsets;  ///< First slot of each part's sub-window.
    QualityPlan plan;                       ///< Concatenated levels of all parts.
    SessionOutcome outcome;                 ///< Whole-session trajectories and objective.
};

/// Segments where all-level-1 greedy streaming first stalls, usable as cut points.
inline std::vector<std::size_t> detect_stall_segments(const CapacityTrace &trace, const VideoSpec &spec,
                                                      std::size_t count, const SimConfig &config = {}) {
    const auto plan = QualityPlan::uniform(spec, 1);
    const auto outcome = simulate_session(trace, make_threshold_schedule(trace, 0.), spec, plan, config);
    const auto minPart = spec.cache_segments();
    std::vector<std::size_t> cuts;
    for (const auto &stall : outcome.stall_events) {
        if (cuts.size() == count) break;
        const auto watched = outcome.watched_frames[stall.slot];
        const auto segment = static_cast<std::size_t>(watched) / spec.frames_per_segment();
        const auto floor = cuts.empty() ? minPart : cuts.back() + minPart;
        const auto cut = std::max(segment, floor);
        if (cut + minPart > spec.n_segments()) break;
        cuts.push_back(cut);
    }
    if (cuts.size() < count)
        throw ArgumentError("only " + std::to_string(cuts.size()) + " stall positions detected, " + std::to_string(count)
                            + " requested");
    return cuts;
}

/// Plans each part between enforced stalls on its own, then scores the whole session.
///
/// Part p+1 starts its own window at the first slot boundary after part p finishes playing,
/// re-fills the start-up cache there and resumes playback once the cache is full.
inline StalledPlanResult plan_with_stalls(const CapacityTrace &trace, const VideoSpec &spec, TradeoffParam a,
                                             const StallPolicy &policy,
                                             const ThresholdMode &mode = ThresholdMode::optimal(),
                                             const SimConfig &config = {}) {
    auto cuts = policy.stall_segments;
    if (cuts.empty() && policy.k_stalls > 0) cuts = detect_stall_segments(trace, spec, policy.k_stalls, config);
    if (cuts.size() != policy.k_stalls) throw ArgumentError("number of stall segments differs from K");
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        if (cuts[i] < 1 || cuts[i] >= spec.n_segments()) throw ArgumentError("stall segment out of range");
        if (i > 0 && cuts[i] <= cuts[i - 1]) throw ArgumentError("stall segments must be strictly increasing");
    }

    StalledPlanResult result;
    result.cut_segments = cuts;
    const auto dt = trace.slot_duration();
    const auto slots = trace.size();

    std::vector<std::size_t> bounds{0};
    bounds.insert(bounds.end(), cuts.begin(), cuts.end());
    bounds.push_back(spec.n_segments());

    SessionOutcome &total = result.outcome;
    total.arrived_frames.assign(slots, 0);
    total.watched_frames.assign(slots, 0.);
    total.bits_used_per_slot.assign(slots, 0.);
    total.level_per_slot.assign(slots, 0);
    total.completed = true;

    std::size_t offset = 0;
    std::size_t framesBefore = 0;
    double previousEnd = 0.;  // end of playback of the previous part, relative to trace origin
    for (std::size_t p = 0; p + 1 < bounds.size(); ++p) {
        const auto partSegments = bounds[p + 1] - bounds[p];
        if (offset >= slots) throw PartInfeasibleError(p, "no capacity window left");
        PlanResult part;
        try {
            const auto partSpec = spec.with_segments(partSegments);
            part = plan_newcast(trace.slice(offset), partSpec, a, mode, config);
        } catch (const Error &e) {
            throw PartInfeasibleError(p, e.what());
        }

        const auto &o = part.outcome;
        for (std::size_t k = 0; k < o.bits_used_per_slot.size(); ++k) {
            total.bits_used_per_slot[offset + k] = o.bits_used_per_slot[k];
            total.level_per_slot[offset + k] = o.level_per_slot[k];
        }
        for (std::size_t k = offset; k < slots; ++k) {
            total.arrived_frames[k] = framesBefore + o.arrived_frames[k - offset];
            total.watched_frames[k] = static_cast<double>(framesBefore) + o.watched_frames[k - offset];
        }
        const auto start = static_cast<double>(offset) * dt;
        const auto resume = start + static_cast<double>(*o.startup_slot) * dt;
        if (p == 0)
            total.startup_slot = o.startup_slot;
        else
            total.stall_events.push_back({offset, resume - previousEnd});
        previousEnd = start + o.session_length_s;

        result.plan.segment_levels.insert(result.plan.segment_levels.end(), part.plan.segment_levels.begin(),
                                          part.plan.segment_levels.end());
        result.part_offsets.push_back(offset);
        result.parts.push_back(std::move(part));
        framesBefore += partSegments * spec.frames_per_segment();
        offset = static_cast<std::size_t>(std::ceil(previousEnd / dt - detail::kRelTol));
    }

    total.session_length_s = previousEnd;
    total.utilization = compute_utilization(trace, total.bits_used_per_slot, total.session_length_s);
    total.quality = compute_quality(spec, result.plan);
    total.cost = compute_cost(total.utilization, total.quality, a);
    return result;
}

struct StallScanRow {
    std::size_t cut_segment = 0;
    std::size_t stall_slot = 0;  ///< Slot where the enforced stall begins.
    double cost_before = 0.;
    double cost_after = 0.;
    bool feasible = false;
};

/// Every admissible single-stall position and its effect on the objective.
inline std::vector<StallScanRow> scan_stall_positions(const CapacityTrace &trace, const VideoSpec &spec,
                                                      TradeoffParam a,
                                                      const ThresholdMode &mode = ThresholdMode::optimal(),
                                                      const SimConfig &config = {}) {
    const auto before = plan_newcast(trace, spec, a, mode, config).outcome.cost;
    const auto minPart = spec.cache_segments();
    std::vector<StallScanRow> rows;
    for (auto cut = std::max<std::size_t>(minPart, 1); cut + minPart <= spec.n_segments(); ++cut) {
        StallScanRow row{cut, 0, before, 0., false};
        try {
            const auto run = plan_with_stalls(trace, spec, a, {1, {cut}}, mode, config);
            row.stall_slot = run.part_offsets[1];
            row.cost_after = run.outcome.cost;
            row.feasible = true;
        } catch (const PartInfeasibleError &) {
        }
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Robustness
// ---------------------------------------------------------------------------

/// |(real - mean) / mean|; empty when the reference is zero.
inline std::optional<double> robustness_error(double perfReal, double perfMean) {
    if (perfMean == 0. || !std::isfinite(perfMean) || !std::isfinite(perfReal)) return std::nullopt;
    return std::abs((perfReal - perfMean) / perfMean);
}

} // namespace newcast
