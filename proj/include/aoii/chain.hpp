#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aoii/errors.hpp"
#include "aoii/rng.hpp"

namespace aoii {

// Source state index, 1-based as used throughout the interfaces. Internal
// loops are 0-based and convert at the boundary.
struct StateIndex {
    int value = 1;

    friend bool operator==(StateIndex, StateIndex) = default;
    friend auto operator<=>(StateIndex, StateIndex) = default;
};

// Row-stochastic transition matrix of a finite discrete-time Markov chain.
// Construction does not validate; call validate() to check the invariants.
class TransitionMatrix {
public:
    TransitionMatrix(int n, std::vector<double> row_major);
    explicit TransitionMatrix(const std::vector<std::vector<double>>& rows);

    int states() const { return n_; }

    // 0-based accessors (internal layout), 1-based via StateIndex.
    double prob0(int from, int to) const { return p_[from * n_ + to]; }
    double prob(StateIndex from, StateIndex to) const {
        return prob0(from.value - 1, to.value - 1);
    }
    std::span<const double> row0(int from) const {
        return {p_.data() + from * n_, static_cast<size_t>(n_)};
    }

    friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;

private:
    int n_ = 0;
    std::vector<double> p_; // row-major n x n
};

struct ChainIssue {
    enum class Kind { RowNotStochastic, NegativeEntry, TooFewStates };
    Kind kind;
    int row = 0;          // 1-based row of the offending entry, where applicable
    double deviation = 0; // |row sum - 1| for RowNotStochastic
    std::string message() const;
};

// Checks the transition-matrix invariants: N >= 2, entries >= 0, every row
// sum within 1e-12 of 1. Returns the first issue found, or nullopt.
std::optional<ChainIssue> validate(const TransitionMatrix& m);

// Throwing wrapper around validate().
void require_valid(const TransitionMatrix& m);

// Draws the successor of `current`; consumes exactly one uniform draw.
StateIndex step(const TransitionMatrix& m, StateIndex current, RandomSource& rng);

// Stationary distribution by power iteration (successive iterates within
// 1e-12 in max norm). Throws NoConvergence after 1e6 iterations, which
// signals a non-ergodic chain.
std::vector<double> stationary(const TransitionMatrix& m);

// k-th matrix power; power(m, 0) is the identity.
TransitionMatrix power(const TransitionMatrix& m, int k);

} // namespace aoii
