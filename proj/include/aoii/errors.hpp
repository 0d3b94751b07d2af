#pragma once

#include <stdexcept>
#include <string>

namespace aoii {

// Base for all domain errors thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An iterative computation (power iteration, belief fixed point) failed to
// reach its tolerance within the iteration cap.
struct NoConvergence : Error {
    using Error::Error;
};

// A delivered observation has (numerically) zero probability under the
// current belief; the model and the ground truth disagree.
struct ImpossibleObservation : Error {
    using Error::Error;
};

// The martingale estimator was queried before any observation was delivered.
struct MartingaleUninitialized : Error {
    using Error::Error;
};

// A calibration search could not bracket the requested sampling budget.
struct BracketFailure : Error {
    using Error::Error;
};

// Training loss or parameters left the finite range.
struct NonFiniteLoss : Error {
    using Error::Error;
};

// Every training restart diverged or was rejected.
struct AllRestartsDiverged : Error {
    using Error::Error;
};

// Brute-force enumeration request exceeds the supported horizon/state count.
struct HorizonTooLarge : Error {
    using Error::Error;
};

// Two belief sequences cannot be compared entry-wise.
struct ShapeMismatch : Error {
    using Error::Error;
};

// Experiment configuration failed validation.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace aoii
