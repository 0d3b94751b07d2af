#pragma once

#include <vector>

#include "aoii/chain.hpp"

namespace aoii::test {

// Binary and ternary study sources used across the test suites.
inline TransitionMatrix binary_source() {
    return TransitionMatrix{{{0.85, 0.15}, {0.25, 0.75}}};
}

inline TransitionMatrix ternary_source() {
    return TransitionMatrix{{{0.70, 0.25, 0.05}, {0.05, 0.90, 0.05}, {0.10, 0.30, 0.60}}};
}

inline TransitionMatrix identity2() {
    return TransitionMatrix{{{1.0, 0.0}, {0.0, 1.0}}};
}

inline TransitionMatrix near_frozen() {
    return TransitionMatrix{{{0.999, 0.001}, {0.001, 0.999}}};
}

} // namespace aoii::test
