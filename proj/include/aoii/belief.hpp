#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "aoii/chain.hpp"

namespace aoii {

// Delivered sample or nothing. A delivered value can only follow a slot in
// which a pull was issued.
struct Observation {
    std::optional<StateIndex> delivered_state;

    static Observation empty() { return {}; }
    static Observation delivered(StateIndex s) { return {s}; }
    bool is_delivered() const { return delivered_state.has_value(); }

    friend bool operator==(const Observation&, const Observation&) = default;
};

enum class EstimatorKind { Map, Martingale };

// Estimation rule applied to the belief. The martingale variant repeats the
// most recently delivered state and must see at least one delivery (or a
// known start) before it can produce an estimate.
struct Estimator {
    EstimatorKind kind = EstimatorKind::Map;
    std::optional<StateIndex> last_received;

    static Estimator map() { return {EstimatorKind::Map, std::nullopt}; }
    static Estimator martingale(std::optional<StateIndex> last = std::nullopt) {
        return {EstimatorKind::Martingale, last};
    }
};

// Joint distribution of (source state, age of incorrect information) given
// the observation history: entry (i, d) is the probability that the source
// is in state i with age d. Ages are truncated at delta_max; the last age
// column saturates. Stored row-major with the state as the major index,
// which is also the flattening the value network consumes.
class Belief {
public:
    Belief(int n, int delta_max);

    int states() const { return n_; }
    int delta_max() const { return delta_max_; }
    int cols() const { return delta_max_ + 1; }

    double at(StateIndex s, int delta) const { return m_[(s.value - 1) * cols() + delta]; }
    double at0(int state0, int delta) const { return m_[state0 * cols() + delta]; }
    void set(StateIndex s, int delta, double v) { m_[(s.value - 1) * cols() + delta] = v; }
    void set0(int state0, int delta, double v) { m_[state0 * cols() + delta] = v; }

    std::span<const double> flat() const { return m_; }
    std::span<double> flat_mut() { return m_; }

    double total_mass() const;

    // Largest entry-wise absolute difference; throws ShapeMismatch.
    double max_abs_diff(const Belief& other) const;

    friend bool operator==(const Belief&, const Belief&) = default;

private:
    int n_;
    int delta_max_;
    std::vector<double> m_;
};

// Point-mass belief at (start, 0): the monitor knows the source state.
Belief init_belief(const TransitionMatrix& p, int delta_max, StateIndex start);

struct StationaryStart {};

// Belief the no-observation recursion settles into when seeded from the
// stationary distribution: the stationary mass is laid out on the age-0
// column and propagated until the total-variation change drops below 1e-12.
Belief init_belief(const TransitionMatrix& p, int delta_max, StationaryStart,
                   const Estimator& est = Estimator::map());

// Marginal state distribution: pi(i) = sum over ages of b(i, .).
std::vector<double> marginal_pi(const Belief& b);

// Estimate from a marginal; argmax ties break toward the smallest state.
StateIndex estimate_from_pi(std::span<const double> pi, const Estimator& est);

// Estimate for a belief under the given rule.
StateIndex estimate(const Belief& b, const Estimator& est);

// Bayes update for an arriving observation. Empty leaves the belief
// untouched. A delivered state i zeroes every other state's row and rescales
// row i by 1/pi(i) so the result is again a distribution. (The conditioning
// denominator is pi(i), the total mass of state i across ages; dividing by a
// fixed-age column sum would not preserve normalization.)
Belief observe(const Belief& b, const Observation& o);

// One-slot advance of an updated belief through the source dynamics.
// The new estimate x is taken from pi_next = marginal_pi(b)*P (for the
// martingale rule, from last_received); cell (x, 0) receives pi_next[x] and
// every other state's age column shifts up by one with the last column
// saturating. Entries below 1e-15 are flushed and the mass renormalized,
// once per slot. Returns the new belief and the new estimate.
std::pair<Belief, StateIndex> propagate(const Belief& b, const TransitionMatrix& p,
                                        const Estimator& est);

// Expected age under the belief: sum over d of d * (column-d mass).
double expected_aoii(const Belief& b);

struct Action {
    int value = 0; // 0 = stay idle, 1 = send a pull request

    friend bool operator==(Action, Action) = default;
};

// Per-slot reward of the relaxed problem: expected age plus lambda per pull.
double reward(const Belief& b, Action a, double lambda);

struct SuccessorBranch {
    Observation observation;
    double probability;
    Belief belief;
    // Estimator consistent with the branch (martingale picks up the
    // delivered state); needed to continue the recursion along the branch.
    Estimator estimator;
};

// Distribution of next-slot beliefs for an action: idle yields the single
// propagated branch with probability 1; a pull yields one branch per state k
// with pi(k) > 1e-15, reached with probability pi(k).
std::vector<SuccessorBranch> successor_distribution(const Belief& b, Action a,
                                                    const TransitionMatrix& p,
                                                    const Estimator& est);

// Fixed point of propagate with no observations, from the stationary seed.
// Throws NoConvergence after 1e5 iterations (a periodic estimator orbit).
Belief steady_state_belief(const TransitionMatrix& p, int delta_max,
                           const Estimator& est = Estimator::map());

// Snapshot rows "state,delta,mass" for nonzero entries (1-based state).
void write_belief_csv(std::ostream& out, const Belief& b);

} // namespace aoii
