#include "aoii/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace aoii {

namespace {

double mean_rate(const TransitionMatrix& p, const Estimator& est, double tau,
                 const SimConfig& cfg, std::span<const std::uint64_t> seeds) {
    double sum = 0.0;
    for (std::uint64_t s : seeds) {
        ThresholdPolicy phi(tau);
        sum += run(phi, p, est, cfg, s).rate();
    }
    return sum / static_cast<double>(seeds.size());
}

} // namespace

ThresholdCalibration calibrate_threshold(const TransitionMatrix& p, const Estimator& est,
                                         double alpha, int delta_max, long long slots,
                                         std::span<const std::uint64_t> seeds) {
    constexpr double kWidthTol = 1e-3;
    constexpr double kRateTol = 1e-3;
    // Returned thresholds must straddle alpha by more than the measurement
    // noise, otherwise a fresh-seed steering run can sit on the wrong side.
    constexpr double kMargin = 2e-3;
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("calibrate_threshold: alpha must be in (0,1)");

    SimConfig cfg;
    cfg.slots = slots;
    cfg.delta_max = delta_max;

    double lo = 0.0;
    double hi = expected_aoii(steady_state_belief(p, delta_max, est));
    double rate_lo = mean_rate(p, est, lo, cfg, seeds); // = 1: expected age >= 0 always
    double rate_hi = mean_rate(p, est, hi, cfg, seeds);
    if (alpha > rate_lo || alpha < rate_hi) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "alpha=%g outside achievable threshold rates [%g, %g]", alpha,
                      rate_hi, rate_lo);
        throw BracketFailure(buf);
    }

    std::vector<std::pair<double, double>> probes{{lo, rate_lo}, {hi, rate_hi}};
    while (hi - lo >= kWidthTol &&
           !(rate_lo - alpha <= kRateTol && alpha - rate_hi <= kRateTol)) {
        const double mid = 0.5 * (lo + hi);
        const double r = mean_rate(p, est, mid, cfg, seeds);
        probes.emplace_back(mid, r);
        if (r == alpha)
            return {mid, mid, r, r}; // degenerate bracket
        if (r > alpha) {
            lo = mid;
            rate_lo = r;
        } else {
            hi = mid;
            rate_hi = r;
        }
    }
    // Tightest probed pair with a noise margin on both sides; the plain
    // bisection endpoints remain the fallback.
    ThresholdCalibration out{hi, lo, rate_hi, rate_lo};
    for (const auto& [tau, r] : probes) {
        if (r <= alpha - kMargin && (out.rate_minus > alpha - kMargin || tau < out.tau_minus)) {
            out.tau_minus = tau;
            out.rate_minus = r;
        }
    }
    for (const auto& [tau, r] : probes) {
        if (r >= alpha + kMargin && (out.rate_plus < alpha + kMargin || tau > out.tau_plus)) {
            out.tau_plus = tau;
            out.rate_plus = r;
        }
    }
    return out;
}

std::vector<double> isotonic_nonincreasing(std::span<const double> values) {
    // PAV on the negated sequence gives the nondecreasing fit.
    struct Block {
        double sum;
        int count;
    };
    std::vector<Block> blocks;
    for (double v : values) {
        blocks.push_back({-v, 1});
        while (blocks.size() > 1) {
            auto& a = blocks[blocks.size() - 2];
            auto& b = blocks.back();
            if (a.sum / a.count <= b.sum / b.count)
                break;
            a.sum += b.sum;
            a.count += b.count;
            blocks.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& blk : blocks) {
        const double v = -(blk.sum / blk.count);
        for (int i = 0; i < blk.count; ++i)
            out.push_back(v);
    }
    return out;
}

namespace {

struct GridPoint {
    double lambda;
    std::shared_ptr<Policy> policy;
    double rate;
};

LambdaBracket bracket_from(std::vector<GridPoint>& points, double alpha) {
    // Skip grid points whose smoothed rate sits within the measurement-noise
    // band around alpha: steering needs the pair's true rates to straddle.
    constexpr double kMargin = 2e-3;
    std::sort(points.begin(), points.end(),
              [](const GridPoint& a, const GridPoint& b) { return a.lambda < b.lambda; });
    std::vector<double> raw;
    raw.reserve(points.size());
    for (const auto& gp : points)
        raw.push_back(gp.rate);
    const auto smooth = isotonic_nonincreasing(raw);

    if (alpha > smooth.front() || alpha < smooth.back()) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "alpha=%g outside achievable trained rates [%g, %g]", alpha,
                      smooth.back(), smooth.front());
        throw BracketFailure(buf);
    }
    size_t i = 0;
    for (size_t k = 0; k < points.size(); ++k)
        if (smooth[k] >= alpha + kMargin)
            i = k;
    size_t j = points.size() - 1;
    for (size_t k = i + 1; k < points.size(); ++k)
        if (smooth[k] <= alpha - kMargin) {
            j = k;
            break;
        }
    LambdaBracket br;
    br.lambda_plus = points[i].lambda;
    br.lambda_minus = points[j].lambda;
    br.rate_plus = smooth[i];
    br.rate_minus = smooth[j];
    br.policy_plus = points[i].policy;
    br.policy_minus = points[j].policy;
    for (const auto& gp : points)
        br.grid.push_back(gp.lambda);
    br.measured_rates = raw;
    br.smoothed_rates = smooth;
    return br;
}

} // namespace

LambdaBracket calibrate_lambda(const PolicyTrainer& trainer, const RateMeasurer& measure,
                               double alpha, std::vector<double> lambda_grid, bool refine) {
    if (lambda_grid.empty())
        throw std::invalid_argument("calibrate_lambda: empty grid");
    std::sort(lambda_grid.begin(), lambda_grid.end());

    std::vector<GridPoint> points;
    for (double lam : lambda_grid) {
        auto pol = trainer(lam);
        const double r = measure(*pol);
        points.push_back({lam, std::move(pol), r});
    }
    LambdaBracket br = bracket_from(points, alpha);

    if (refine && br.lambda_plus != br.lambda_minus) {
        const double mid = 0.5 * (br.lambda_plus + br.lambda_minus);
        auto pol = trainer(mid);
        const double r = measure(*pol);
        points.push_back({mid, std::move(pol), r});
        br = bracket_from(points, alpha);
    }
    return br;
}

RunMetrics steering_run(std::shared_ptr<Policy> phi_minus, std::shared_ptr<Policy> phi_plus,
                        double alpha, const TransitionMatrix& p, const Estimator& est,
                        const SimConfig& cfg, std::uint64_t seed) {
    SteeredPolicy steered(std::move(phi_minus), std::move(phi_plus), alpha);
    return run(steered, p, est, cfg, seed);
}

} // namespace aoii
