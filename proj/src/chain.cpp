#include "aoii/chain.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace aoii {

TransitionMatrix::TransitionMatrix(int n, std::vector<double> row_major)
    : n_(n), p_(std::move(row_major)) {
    if (n < 0 || p_.size() != static_cast<size_t>(n) * static_cast<size_t>(n))
        throw std::invalid_argument("TransitionMatrix: entry count does not match n*n");
}

TransitionMatrix::TransitionMatrix(const std::vector<std::vector<double>>& rows)
    : n_(static_cast<int>(rows.size())) {
    p_.reserve(static_cast<size_t>(n_) * n_);
    for (const auto& r : rows) {
        if (r.size() != rows.size())
            throw std::invalid_argument("TransitionMatrix: ragged rows");
        p_.insert(p_.end(), r.begin(), r.end());
    }
}

std::string ChainIssue::message() const {
    char buf[96];
    switch (kind) {
    case Kind::RowNotStochastic:
        std::snprintf(buf, sizeof buf, "row %d sums to 1%+.3g", row, deviation);
        return std::string("RowNotStochastic: ") + buf;
    case Kind::NegativeEntry:
        std::snprintf(buf, sizeof buf, "negative entry in row %d", row);
        return std::string("NegativeEntry: ") + buf;
    case Kind::TooFewStates:
        return "TooFewStates: need N >= 2";
    }
    return "unknown issue";
}

std::optional<ChainIssue> validate(const TransitionMatrix& m) {
    constexpr double kRowSumTol = 1e-12;
    const int n = m.states();
    if (n < 2)
        return ChainIssue{ChainIssue::Kind::TooFewStates, 0, 0.0};
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            const double v = m.prob0(i, j);
            if (v < 0.0)
                return ChainIssue{ChainIssue::Kind::NegativeEntry, i + 1, v};
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTol)
            return ChainIssue{ChainIssue::Kind::RowNotStochastic, i + 1, sum - 1.0};
    }
    return std::nullopt;
}

void require_valid(const TransitionMatrix& m) {
    if (auto issue = validate(m))
        throw std::invalid_argument("invalid transition matrix: " + issue->message());
}

StateIndex step(const TransitionMatrix& m, StateIndex current, RandomSource& rng) {
    const int i = current.value - 1;
    const double u = rng.uniform();
    double cum = 0.0;
    const int n = m.states();
    for (int j = 0; j < n; ++j) {
        cum += m.prob0(i, j);
        if (u < cum)
            return StateIndex{j + 1};
    }
    // u landed in the residual left by row-sum rounding; take the last state.
    return StateIndex{n};
}

namespace {

std::vector<double> power_iterate(const TransitionMatrix& m, std::vector<double> p) {
    constexpr double kTol = 1e-12;
    constexpr long kMaxIter = 1000000;
    const int n = m.states();
    std::vector<double> next(n, 0.0);
    for (long it = 0; it < kMaxIter; ++it) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                s += p[i] * m.prob0(i, j);
            next[j] = s;
        }
        double diff = 0.0;
        for (int j = 0; j < n; ++j)
            diff = std::max(diff, std::abs(next[j] - p[j]));
        p.swap(next);
        if (diff < kTol)
            return p;
    }
    throw NoConvergence("stationary: power iteration did not converge (chain not ergodic?)");
}

} // namespace

std::vector<double> stationary(const TransitionMatrix& m) {
    const int n = m.states();
    // Two starts: a reducible chain (several stationary distributions) makes
    // them disagree even though each run settles, a periodic one never
    // settles. Either way non-ergodicity surfaces as NoConvergence.
    std::vector<double> uniform(n, 1.0 / n);
    std::vector<double> vertex(n, 0.0);
    vertex[0] = 1.0;
    const auto a = power_iterate(m, std::move(uniform));
    const auto b = power_iterate(m, std::move(vertex));
    for (int j = 0; j < n; ++j)
        if (std::abs(a[j] - b[j]) > 1e-8)
            throw NoConvergence("stationary: limit depends on the start (chain not ergodic)");
    return a;
}

TransitionMatrix power(const TransitionMatrix& m, int k) {
    if (k < 0)
        throw std::invalid_argument("power: k must be >= 0");
    const int n = m.states();
    std::vector<double> acc(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        acc[i * n + i] = 1.0;
    std::vector<double> tmp(acc.size());
    for (int s = 0; s < k; ++s) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double v = 0.0;
                for (int l = 0; l < n; ++l)
                    v += acc[i * n + l] * m.prob0(l, j);
                tmp[i * n + j] = v;
            }
        acc.swap(tmp);
    }
    return TransitionMatrix(n, std::move(acc));
}

} // namespace aoii
