#include <doctest.h>

#include <array>
#include <cmath>

#include "aoii/chain.hpp"
#include "test_support.hpp"

using namespace aoii;
using namespace aoii::test;

TEST_CASE("validate accepts the study matrices and the identity") {
    CHECK_FALSE(validate(binary_source()));
    CHECK_FALSE(validate(ternary_source()));
    CHECK_FALSE(validate(identity2()));
}

TEST_CASE("validate flags a non-stochastic row with its deviation") {
    TransitionMatrix bad{{{0.9, 0.2}, {0.25, 0.75}}};
    auto issue = validate(bad);
    REQUIRE(issue);
    CHECK(issue->kind == ChainIssue::Kind::RowNotStochastic);
    CHECK(issue->row == 1);
    CHECK(issue->deviation == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("validate flags negative entries and too few states") {
    TransitionMatrix neg{{{1.2, -0.2}, {0.5, 0.5}}};
    auto issue = validate(neg);
    REQUIRE(issue);
    CHECK(issue->kind == ChainIssue::Kind::NegativeEntry);

    TransitionMatrix tiny(1, {1.0});
    auto small = validate(tiny);
    REQUIRE(small);
    CHECK(small->kind == ChainIssue::Kind::TooFewStates);
}

TEST_CASE("step is absorbing under the identity") {
    RandomSource rng(7);
    const auto id = identity2();
    StateIndex s{2};
    for (int i = 0; i < 100; ++i) {
        s = step(id, s, rng);
        CHECK(s.value == 2);
    }
}

TEST_CASE("step frequencies match the matrix rows") {
    const long N = 1000000;
    {
        RandomSource rng(42);
        const auto p1 = binary_source();
        long to2 = 0;
        for (long i = 0; i < N; ++i)
            to2 += step(p1, StateIndex{1}, rng).value == 2;
        CHECK(std::abs(to2 / double(N) - 0.15) < 0.002);
    }
    {
        RandomSource rng(43);
        const auto p2 = ternary_source();
        long to2 = 0;
        for (long i = 0; i < N; ++i)
            to2 += step(p2, StateIndex{3}, rng).value == 2;
        CHECK(std::abs(to2 / double(N) - 0.30) < 0.003);
    }
}

TEST_CASE("step chi-square sanity at one million samples") {
    const auto p2 = ternary_source();
    RandomSource rng(99);
    const long N = 1000000;
    std::array<long, 3> counts{};
    for (long i = 0; i < N; ++i)
        counts[step(p2, StateIndex{1}, rng).value - 1]++;
    const std::array<double, 3> expected{0.70 * N, 0.25 * N, 0.05 * N};
    double chi2 = 0;
    for (int j = 0; j < 3; ++j)
        chi2 += (counts[j] - expected[j]) * (counts[j] - expected[j]) / expected[j];
    // 2 degrees of freedom; 13.8 is the 0.1% tail
    CHECK(chi2 < 13.8);
}

TEST_CASE("stationary solves the binary source by hand") {
    const auto pi = stationary(binary_source());
    // 0.15 p1 = 0.25 p2 with p1 + p2 = 1
    CHECK(pi[0] == doctest::Approx(0.625).epsilon(1e-10));
    CHECK(pi[1] == doctest::Approx(0.375).epsilon(1e-10));
}

TEST_CASE("stationary matches the repeated-squaring eigenvector oracle") {
    const auto p2 = ternary_source();
    // Independent oracle: P^(2^20) has every row equal to the stationary vector.
    TransitionMatrix acc = p2;
    for (int s = 0; s < 20; ++s) {
        std::vector<double> sq(9, 0.0);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double v = 0;
                for (int l = 0; l < 3; ++l)
                    v += acc.prob0(i, l) * acc.prob0(l, j);
                sq[i * 3 + j] = v;
            }
        acc = TransitionMatrix(3, std::move(sq));
    }
    const auto pi = stationary(p2);
    for (int j = 0; j < 3; ++j)
        CHECK(pi[j] == doctest::Approx(acc.prob0(0, j)).epsilon(1e-10));
}

TEST_CASE("stationary reports non-ergodic chains") {
    CHECK_THROWS_AS(stationary(identity2()), NoConvergence);
}

TEST_CASE("stationary is a fixed point of the chain") {
    for (const auto& m : {binary_source(), ternary_source()}) {
        const auto pi = stationary(m);
        double sum = 0;
        for (int j = 0; j < m.states(); ++j) {
            double v = 0;
            for (int i = 0; i < m.states(); ++i)
                v += pi[i] * m.prob0(i, j);
            CHECK(std::abs(v - pi[j]) < 1e-10);
            sum += pi[j];
        }
        CHECK(std::abs(sum - 1.0) < 1e-10);
    }
}

TEST_CASE("power: zeroth and first powers") {
    const auto p1 = binary_source();
    const auto p0 = power(p1, 0);
    CHECK(p0.prob0(0, 0) == 1.0);
    CHECK(p0.prob0(0, 1) == 0.0);
    CHECK(p0.prob0(1, 1) == 1.0);
    CHECK(power(p1, 1) == p1);
}

TEST_CASE("power: second power against hand multiplication") {
    const auto sq = power(binary_source(), 2);
    CHECK(sq.prob0(0, 0) == doctest::Approx(0.76).epsilon(1e-12));
    CHECK(sq.prob0(0, 1) == doctest::Approx(0.24).epsilon(1e-12));
    CHECK(sq.prob0(1, 0) == doctest::Approx(0.40).epsilon(1e-12));
    CHECK(sq.prob0(1, 1) == doctest::Approx(0.60).epsilon(1e-12));
}

TEST_CASE("power keeps rows stochastic with bounded error growth") {
    RandomSource rng(5);
    // random 4-state stochastic matrix
    std::vector<double> rows;
    for (int i = 0; i < 4; ++i) {
        std::array<double, 4> r{};
        double s = 0;
        for (auto& v : r)
            s += (v = rng.uniform() + 0.01);
        for (auto& v : r)
            rows.push_back(v / s);
    }
    const TransitionMatrix rand4(4, rows);
    for (const auto& m : {binary_source(), ternary_source(), rand4}) {
        for (int k : {0, 1, 2, 5, 10, 25, 50}) {
            const auto pk = power(m, k);
            for (int i = 0; i < m.states(); ++i) {
                double sum = 0;
                for (int j = 0; j < m.states(); ++j)
                    sum += pk.prob0(i, j);
                CHECK(std::abs(sum - 1.0) <= 1e-10 * std::max(k, 1));
            }
        }
    }
}
