#pragma once

#include <span>
#include <vector>

#include "aoii/belief.hpp"

namespace aoii::oracle {

// One source trajectory consistent with a branch's observations. Ages are
// tracked uncapped per slot; they are clipped at delta_max only when binned
// into a joint distribution (clipping commutes with the increment-or-reset
// recurrence).
struct TrajectoryEntry {
    std::vector<StateIndex> states; // x_0 .. x_h
    double probability;             // conditional on the branch
    std::vector<long> ages;         // age_0 .. age_h, uncapped
};

struct TrajectoryTable {
    int horizon = 0;
    std::vector<StateIndex> estimates; // branch estimate sequence, slots 0..h
    std::vector<TrajectoryEntry> entries;
};

// All per-slot quantities of one observation branch.
struct BranchResult {
    std::vector<Observation> observations;  // o_1 .. o_h
    double probability = 1.0;               // unconditional law of this observation sequence
    std::vector<Belief> beliefs;            // exact joint (state, clipped age), slots 0..h
    std::vector<double> expected_age;       // exact uncapped expected age, slots 0..h
    TrajectoryTable table;
};

// Exhaustive enumeration of every source trajectory of length `actions.size()`
// from a known start, split into observation branches by the pull pattern.
// The exact conditional joint distribution of (state, age) is computed per
// slot by definition: estimates use the same rule and tie-breaking as the
// recursive belief but are derived from enumerated marginals, never from the
// recursion. Requires horizon <= 12 and N <= 4 (throws HorizonTooLarge).
std::vector<BranchResult> enumerate(const TransitionMatrix& p, StateIndex start,
                                    std::span<const Action> actions,
                                    const Estimator& est, int delta_max);

// Max absolute entry deviation between two per-slot belief sequences.
double compare(std::span<const Belief> exact, std::span<const Belief> recursive);

// Walks every observation branch of the action sequence with the recursive
// belief advancing in lockstep with the enumeration, without materializing
// branch tables. Returns the max absolute entry deviation over all slots and
// branches. This is the certification entry point for the belief recursion.
double certify(const TransitionMatrix& p, StateIndex start,
               std::span<const Action> actions, const Estimator& est, int delta_max);

} // namespace aoii::oracle
