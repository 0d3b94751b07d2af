#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "aoii/sim.hpp"

namespace aoii {

struct ThresholdCalibration {
    double tau_minus = 0.0; // higher threshold, rate <= alpha
    double tau_plus = 0.0;  // lower threshold, rate >= alpha
    double rate_minus = 0.0;
    double rate_plus = 0.0;
};

// Bisection over tau in [0, expected_aoii(steady_state_belief)] against the
// seed-averaged simulated rate, which is nonincreasing in tau. Stops when
// the bracket width falls below 1e-3 or both bracket rates are within 1e-3
// of alpha. The same seeds are reused for every tau so the search sees a
// fixed rate curve. Throws BracketFailure when alpha lies outside the
// achievable range [R(tau_max), R(0)].
ThresholdCalibration calibrate_threshold(const TransitionMatrix& p, const Estimator& est,
                                         double alpha, int delta_max, long long slots,
                                         std::span<const std::uint64_t> seeds);

struct LambdaBracket {
    double lambda_minus = 0.0; // larger multiplier, rate <= alpha
    double lambda_plus = 0.0;  // smaller multiplier, rate >= alpha
    double rate_minus = 0.0;
    double rate_plus = 0.0;
    std::shared_ptr<Policy> policy_minus;
    std::shared_ptr<Policy> policy_plus;
    std::vector<double> grid;           // multipliers actually trained, ascending
    std::vector<double> measured_rates; // raw simulated rates per grid point
    std::vector<double> smoothed_rates; // after isotonic (nonincreasing) smoothing
};

using PolicyTrainer = std::function<std::shared_ptr<Policy>(double lambda)>;
using RateMeasurer = std::function<double(Policy&)>;

// Trains one policy per grid point, measures its rate, smooths the measured
// rates to a nonincreasing sequence (training noise can break monotonicity),
// and returns the adjacent pair bracketing alpha. With `refine`, one extra
// policy is trained at the bracket midpoint and the bracket recomputed.
LambdaBracket calibrate_lambda(const PolicyTrainer& trainer, const RateMeasurer& measure,
                               double alpha, std::vector<double> lambda_grid,
                               bool refine = true);

// Pool-adjacent-violators fit of a nonincreasing sequence (least squares).
std::vector<double> isotonic_nonincreasing(std::span<const double> values);

// Runs the steering mixture of a bracketing policy pair.
RunMetrics steering_run(std::shared_ptr<Policy> phi_minus, std::shared_ptr<Policy> phi_plus,
                        double alpha, const TransitionMatrix& p, const Estimator& est,
                        const SimConfig& cfg, std::uint64_t seed);

} // namespace aoii
