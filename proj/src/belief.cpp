#include "aoii/belief.hpp"

#include "aoii/format.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace aoii {

namespace {
constexpr double kFlushEps = 1e-15;
constexpr double kPiFloor = 1e-15;
} // namespace

Belief::Belief(int n, int delta_max)
    : n_(n), delta_max_(delta_max),
      m_(static_cast<size_t>(n) * (delta_max + 1), 0.0) {
    if (n < 1 || delta_max < 1)
        throw std::invalid_argument("Belief: need n >= 1 and delta_max >= 1");
}

double Belief::total_mass() const {
    double s = 0.0;
    for (double v : m_)
        s += v;
    return s;
}

double Belief::max_abs_diff(const Belief& other) const {
    if (n_ != other.n_ || delta_max_ != other.delta_max_)
        throw ShapeMismatch("beliefs have different shapes");
    double d = 0.0;
    for (size_t k = 0; k < m_.size(); ++k)
        d = std::max(d, std::abs(m_[k] - other.m_[k]));
    return d;
}

Belief init_belief(const TransitionMatrix& p, int delta_max, StateIndex start) {
    Belief b(p.states(), delta_max);
    b.set(start, 0, 1.0);
    return b;
}

Belief init_belief(const TransitionMatrix& p, int delta_max, StationaryStart,
                   const Estimator& est) {
    constexpr double kTvTol = 1e-12;
    constexpr int kMaxIter = 100000;
    const auto pi_st = stationary(p);
    Belief b(p.states(), delta_max);
    for (int i = 0; i < p.states(); ++i)
        b.set0(i, 0, pi_st[i]);
    for (int it = 0; it < kMaxIter; ++it) {
        Belief next = propagate(b, p, est).first;
        double tv = 0.0;
        for (size_t k = 0; k < next.flat().size(); ++k)
            tv += std::abs(next.flat()[k] - b.flat()[k]);
        b = std::move(next);
        if (0.5 * tv < kTvTol)
            return b;
    }
    throw NoConvergence("init_belief: stationary burn-in did not settle");
}

std::vector<double> marginal_pi(const Belief& b) {
    std::vector<double> pi(b.states(), 0.0);
    const int cols = b.cols();
    for (int i = 0; i < b.states(); ++i) {
        double s = 0.0;
        for (int d = 0; d < cols; ++d)
            s += b.at0(i, d);
        pi[i] = s;
    }
    return pi;
}

StateIndex estimate_from_pi(std::span<const double> pi, const Estimator& est) {
    if (est.kind == EstimatorKind::Martingale) {
        if (!est.last_received)
            throw MartingaleUninitialized("martingale estimator has no delivered state");
        return *est.last_received;
    }
    int best = 0;
    for (int i = 1; i < static_cast<int>(pi.size()); ++i)
        if (pi[i] > pi[best])
            best = i; // strict >: ties keep the smallest index
    return StateIndex{best + 1};
}

StateIndex estimate(const Belief& b, const Estimator& est) {
    const auto pi = marginal_pi(b);
    return estimate_from_pi(pi, est);
}

Belief observe(const Belief& b, const Observation& o) {
    if (!o.is_delivered())
        return b;
    const int i = o.delivered_state->value - 1;
    const auto pi = marginal_pi(b);
    if (pi[i] <= kPiFloor)
        throw ImpossibleObservation("delivered state has zero probability under the belief");
    Belief out(b.states(), b.delta_max());
    const double inv = 1.0 / pi[i];
    for (int d = 0; d < b.cols(); ++d)
        out.set0(i, d, b.at0(i, d) * inv);
    return out;
}

std::pair<Belief, StateIndex> propagate(const Belief& b, const TransitionMatrix& p,
                                        const Estimator& est) {
    const int n = b.states();
    const int cols = b.cols();
    const int dmax = b.delta_max();

    const auto pi = marginal_pi(b);
    std::vector<double> pi_next(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            s += pi[i] * p.prob0(i, j);
        pi_next[j] = s;
    }
    const StateIndex xhat = estimate_from_pi(pi_next, est);
    const int xh = xhat.value - 1;

    Belief out(n, dmax);
    out.set0(xh, 0, pi_next[xh]);
    for (int i = 0; i < n; ++i) {
        if (i == xh)
            continue;
        for (int d = 1; d < cols; ++d) {
            double s = 0.0;
            for (int m = 0; m < n; ++m)
                s += b.at0(m, d - 1) * p.prob0(m, i);
            if (d == dmax) // saturating age column
                for (int m = 0; m < n; ++m)
                    s += b.at0(m, dmax) * p.prob0(m, i);
            out.set0(i, d, s);
        }
    }

    // Flush denormal-range residue and renormalize (once per slot).
    double total = 0.0;
    for (double& v : out.flat_mut()) {
        if (v < kFlushEps)
            v = 0.0;
        total += v;
    }
    if (total > 0.0 && total != 1.0) {
        const double inv = 1.0 / total;
        for (double& v : out.flat_mut())
            v *= inv;
    }
    return {std::move(out), xhat};
}

double expected_aoii(const Belief& b) {
    double s = 0.0;
    for (int d = 1; d < b.cols(); ++d) {
        double col = 0.0;
        for (int i = 0; i < b.states(); ++i)
            col += b.at0(i, d);
        s += d * col;
    }
    return s;
}

double reward(const Belief& b, Action a, double lambda) {
    return expected_aoii(b) + (a.value ? lambda : 0.0);
}

std::vector<SuccessorBranch> successor_distribution(const Belief& b, Action a,
                                                    const TransitionMatrix& p,
                                                    const Estimator& est) {
    std::vector<SuccessorBranch> branches;
    if (a.value == 0) {
        auto [nb, xh] = propagate(b, p, est);
        (void)xh;
        branches.push_back({Observation::empty(), 1.0, std::move(nb), est});
        return branches;
    }
    const auto pi = marginal_pi(b);
    for (int k = 0; k < b.states(); ++k) {
        if (pi[k] <= kPiFloor)
            continue;
        const StateIndex sk{k + 1};
        Estimator branch_est = est;
        if (branch_est.kind == EstimatorKind::Martingale)
            branch_est.last_received = sk;
        auto [nb, xh] = propagate(observe(b, Observation::delivered(sk)), p, branch_est);
        (void)xh;
        branches.push_back({Observation::delivered(sk), pi[k], std::move(nb), branch_est});
    }
    return branches;
}

Belief steady_state_belief(const TransitionMatrix& p, int delta_max, const Estimator& est) {
    constexpr double kTol = 1e-12;
    constexpr int kMaxIter = 100000;
    const auto pi_st = stationary(p);
    Belief b(p.states(), delta_max);
    for (int i = 0; i < p.states(); ++i)
        b.set0(i, 0, pi_st[i]);
    for (int it = 0; it < kMaxIter; ++it) {
        Belief next = propagate(b, p, est).first;
        const double diff = next.max_abs_diff(b);
        b = std::move(next);
        if (diff < kTol)
            return b;
    }
    throw NoConvergence("steady_state_belief: no fixed point within iteration cap");
}

void write_belief_csv(std::ostream& out, const Belief& b) {
    for (int i = 0; i < b.states(); ++i)
        for (int d = 0; d < b.cols(); ++d) {
            const double v = b.at0(i, d);
            if (v == 0.0)
                continue;
            out << i + 1 << ',' << d << ',' << format_double(v) << '\n';
        }
}

} // namespace aoii
