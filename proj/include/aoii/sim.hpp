#pragma once

#include <functional>
#include <optional>

#include "aoii/belief.hpp"
#include "aoii/policy.hpp"

namespace aoii {

// Ground truth owned by a run: the true source state, the true (uncapped)
// age, and the sample in flight on the one-slot channel. The run also owns a
// RandomSource, passed alongside. inflight holds the sample taken at t-1
// exactly when a pull was issued then.
struct WorldState {
    long long t = 0;
    StateIndex x{1};
    long long aoii = 0;
    std::optional<StateIndex> inflight;
};

struct SlotRecord {
    long long t;
    StateIndex x;
    StateIndex x_hat;
    long long aoii;
    Action action;
    double expected_aoii; // r(b_t, 0)
};

struct RunMetrics {
    long long sum_aoii = 0;
    long long sum_actions = 0;
    double sum_expected_aoii = 0.0;
    long long slots = 0;

    double maoii() const { return static_cast<double>(sum_aoii) / slots; }
    double rate() const { return static_cast<double>(sum_actions) / slots; }
    double maoii_hat() const { return sum_expected_aoii / slots; }

    void add(const SlotRecord& r) {
        sum_aoii += r.aoii;
        sum_actions += r.action.value;
        sum_expected_aoii += r.expected_aoii;
        slots += 1;
    }
};

struct SimConfig {
    long long slots = 100000;
    int delta_max = 15;
    StateIndex start{1};
    bool exclude_warmup = false;       // drop the first warmup_slots from metrics
    long long warmup_slots = 1000;
};

struct StepResult {
    WorldState world;
    Belief belief;
    SlotRecord record;
};

// Advances one slot (t >= 1) in the fixed order: deliver the in-flight
// observation, update the belief (observe then propagate), execute the
// action decided on the fresh belief, account the true age for the next
// slot, and step the source. `est` picks up delivered states for the
// martingale rule. `decide` sees the post-update belief of this slot.
StepResult slot_step(const WorldState& world, const Belief& prev_belief, Estimator& est,
                     const std::function<Action(const Belief&, long long)>& decide,
                     const TransitionMatrix& p, RandomSource& rng);

using TraceSink = std::function<void(const SlotRecord&, const Belief&)>;

// Runs `policy` for cfg.slots slots from a warm start (the monitor knows
// X_0, so slot 0 uses the point-mass belief directly). Returns the metric
// accumulators; `sink`, when set, sees every slot's record and belief.
RunMetrics run(Policy& policy, const TransitionMatrix& p, Estimator est,
               const SimConfig& cfg, std::uint64_t seed, const TraceSink& sink = {});

} // namespace aoii
