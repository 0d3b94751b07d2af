#include "aoii/sim.hpp"

namespace aoii {

StepResult slot_step(const WorldState& world, const Belief& prev_belief, Estimator& est,
                     const std::function<Action(const Belief&, long long)>& decide,
                     const TransitionMatrix& p, RandomSource& rng) {
    WorldState w = world;

    // (1) deliver the observation generated at t-1
    Observation o = w.inflight ? Observation::delivered(*w.inflight) : Observation::empty();
    w.inflight.reset();
    if (o.is_delivered() && est.kind == EstimatorKind::Martingale)
        est.last_received = o.delivered_state;

    // (2) belief update, then one-slot propagation
    auto [belief, xhat] = propagate(observe(prev_belief, o), p, est);

    // (3) act on the fresh belief; a pull samples the current source state
    const Action a = decide(belief, w.t);
    if (a.value == 1)
        w.inflight = w.x;

    SlotRecord rec{w.t, w.x, xhat, w.aoii, a, expected_aoii(belief)};

    // (4) true age for the next slot: grows on mismatch, resets on match
    w.aoii = (w.x == xhat) ? 0 : w.aoii + 1;

    // (5) source transition
    w.x = step(p, w.x, rng);
    w.t += 1;

    return {std::move(w), std::move(belief), rec};
}

RunMetrics run(Policy& policy, const TransitionMatrix& p, Estimator est,
               const SimConfig& cfg, std::uint64_t seed, const TraceSink& sink) {
    RandomSource rng(seed);
    policy.reset();
    if (est.kind == EstimatorKind::Martingale && !est.last_received)
        est.last_received = cfg.start; // the warm start is the first "delivery"

    WorldState w{0, cfg.start, 0, std::nullopt};
    Belief b = init_belief(p, cfg.delta_max, cfg.start);

    RunMetrics metrics;
    const auto account = [&](const SlotRecord& rec, const Belief& belief) {
        if (!cfg.exclude_warmup || rec.t >= cfg.warmup_slots)
            metrics.add(rec);
        if (sink)
            sink(rec, belief);
    };

    // Slot 0: the belief is the known-start point mass, no delivery possible.
    {
        const Action a = policy.decide(b, 0, rng);
        if (a.value == 1)
            w.inflight = w.x;
        SlotRecord rec{0, w.x, cfg.start, 0, a, expected_aoii(b)};
        account(rec, b);
        w.aoii = (w.x == cfg.start) ? 0 : w.aoii + 1;
        w.x = step(p, w.x, rng);
        w.t = 1;
    }

    const auto decide = [&](const Belief& belief, long long t) {
        return policy.decide(belief, t, rng);
    };
    for (long long t = 1; t < cfg.slots; ++t) {
        StepResult r = slot_step(w, b, est, decide, p, rng);
        w = std::move(r.world);
        b = std::move(r.belief);
        account(r.record, b);
    }
    return metrics;
}

} // namespace aoii
