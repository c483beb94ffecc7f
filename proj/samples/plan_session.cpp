// Plans the reference session on a synthetic trace for a few trade-off values.

#include <cstdio>

#include <newcast/newcast.hpp>

int main() {
    using namespace newcast;
    const auto spec = reference_video();
    const auto trace = generate_synthetic(SyntheticTraceConfig{.seed = 7});
    const auto candidates = enumerate_candidates(trace, spec, ThresholdMode::optimal());
    std::printf("%zu feasible thresholds\n", candidates.feasible.size());
    for (const double a : {0., 0.5, 4.5, 10.}) {
        const auto r = select_candidate(candidates, TradeoffParam(a));
        std::printf("a=%-5.1f alpha=%.0f bps  sigma=%.4f  rho=%.4f  F=%.4f\n", a, r.alpha_th, r.outcome.utilization,
                    r.outcome.quality, r.outcome.cost);
    }
    const auto stalled = plan_with_stalls(trace, spec, TradeoffParam(0.5), {1, {90}}, ThresholdMode::optimal());
    std::printf("with a stall at segment 90: F=%.4f\n", stalled.outcome.cost);
}
