#pragma once

#include <cmath>
#include <memory>
#include <set>
#include <string>

#include "aoii/belief.hpp"
#include "aoii/rng.hpp"

namespace aoii {

// Pull-decision rule. decide() may consult the belief, the slot index and the
// run's random source only; stateful policies (steering) keep their own
// counters and are reset per run.
class Policy {
public:
    virtual ~Policy() = default;
    virtual Action decide(const Belief& b, long long t, RandomSource& rng) = 0;
    virtual void reset() {}
    virtual std::string name() const = 0;
};

// Pulls with probability alpha each slot.
class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(double alpha) : alpha_(alpha) {}
    Action decide(const Belief&, long long, RandomSource& rng) override {
        return Action{rng.bernoulli(alpha_) ? 1 : 0};
    }
    std::string name() const override { return "random"; }
    double alpha() const { return alpha_; }

private:
    double alpha_;
};

// The m-th pull lands at slot round(m/alpha), rounding halves up. Pulling at
// slot t is a pure membership test so the decision stream cannot depend on
// observations.
class UniformPolicy final : public Policy {
public:
    explicit UniformPolicy(double alpha) : alpha_(alpha) {}
    Action decide(const Belief&, long long t, RandomSource&) override {
        return Action{pulls_at(t) ? 1 : 0};
    }
    bool pulls_at(long long t) const {
        if (alpha_ <= 0.0 || t < 1)
            return false;
        const long long anchor = static_cast<long long>(std::floor(alpha_ * t));
        for (long long m = std::max<long long>(1, anchor - 2); m <= anchor + 2; ++m)
            if (static_cast<long long>(std::floor(m / alpha_ + 0.5)) == t)
                return true;
        return false;
    }
    std::string name() const override { return "uniform"; }

private:
    double alpha_;
};

// Pulls whenever the expected age reaches tau (inclusive).
class ThresholdPolicy final : public Policy {
public:
    explicit ThresholdPolicy(double tau) : tau_(tau) {}
    Action decide(const Belief& b, long long, RandomSource&) override {
        return Action{expected_aoii(b) >= tau_ ? 1 : 0};
    }
    std::string name() const override { return "threshold"; }
    double tau() const { return tau_; }

private:
    double tau_;
};

class NeverPullPolicy final : public Policy {
public:
    Action decide(const Belief&, long long, RandomSource&) override { return Action{0}; }
    std::string name() const override { return "never"; }
};

class AlwaysPullPolicy final : public Policy {
public:
    Action decide(const Belief&, long long, RandomSource&) override { return Action{1}; }
    std::string name() const override { return "always"; }
};

// Pulls exactly at the listed slots; used for traces and tests.
class ScheduledPolicy final : public Policy {
public:
    explicit ScheduledPolicy(std::set<long long> pull_slots)
        : pulls_(std::move(pull_slots)) {}
    Action decide(const Belief&, long long t, RandomSource&) override {
        return Action{pulls_.count(t) ? 1 : 0};
    }
    std::string name() const override { return "scheduled"; }

private:
    std::set<long long> pulls_;
};

// Running tally of the realized sampling rate.
struct SteeringState {
    long long pulls_so_far = 0;
    long long slots_so_far = 0;
    double running_rate() const {
        return slots_so_far == 0 ? 0.0
                                 : static_cast<double>(pulls_so_far) / slots_so_far;
    }
};

// Past-dependent mixture of two policies bracketing the budget: while the
// running rate is below alpha the higher-rate policy acts, otherwise the
// lower-rate one (ties go to the lower-rate policy). Drives the realized
// rate to alpha without randomization.
class SteeredPolicy final : public Policy {
public:
    SteeredPolicy(std::shared_ptr<Policy> minus, std::shared_ptr<Policy> plus, double alpha)
        : minus_(std::move(minus)), plus_(std::move(plus)), alpha_(alpha) {}

    Action decide(const Belief& b, long long t, RandomSource& rng) override {
        Policy& inner = state_.running_rate() < alpha_ ? *plus_ : *minus_;
        const Action a = inner.decide(b, t, rng);
        state_.pulls_so_far += a.value;
        state_.slots_so_far += 1;
        return a;
    }
    void reset() override {
        state_ = {};
        minus_->reset();
        plus_->reset();
    }
    std::string name() const override { return "steered"; }
    const SteeringState& state() const { return state_; }

private:
    std::shared_ptr<Policy> minus_;
    std::shared_ptr<Policy> plus_;
    double alpha_;
    SteeringState state_;
};

} // namespace aoii
