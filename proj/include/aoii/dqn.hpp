#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "aoii/calibrate.hpp"
#include "aoii/sim.hpp"

namespace aoii {

// Action-value approximator: flattened belief -> (Q(b,0), Q(b,1)) through
// two rectified hidden layers and a linear output head. Parameters live in
// one flat vector (tensor order W0, b0, W1, b1, W2, b2, row-major) so tests
// and the optimizer can walk them uniformly.
class ValueNetwork {
public:
    ValueNetwork(int input_dim, int hidden);

    // Zero biases, weights uniform in [-s, s] with s = sqrt(6/(fan_in+fan_out)).
    static ValueNetwork glorot_init(int input_dim, int hidden, RandomSource& rng);

    int input_dim() const { return in_; }
    int hidden() const { return h_; }
    std::array<int, 4> layer_sizes() const { return {in_, h_, h_, 2}; }

    std::size_t param_count() const { return params_.size(); }
    double param(std::size_t k) const { return params_[k]; }
    void set_param(std::size_t k, double v) { params_[k] = v; }
    std::span<const double> params() const { return params_; }
    std::span<double> params_mut() { return params_; }

    std::array<double, 2> forward(std::span<const double> x) const;
    bool finite() const;

    // Text format: header line with the layer sizes, then one line per
    // parameter tensor in row-major decimal.
    void save(std::ostream& out) const;
    static ValueNetwork load(std::istream& in);

    // Offsets of the six tensors inside the flat parameter vector.
    struct Layout {
        std::size_t w0, b0, w1, b1, w2, b2, total;
    };
    Layout layout() const;

private:
    int in_;
    int h_;
    std::vector<double> params_;
};

// Snapshot of the main network, refreshed every L-th training step.
struct TargetNetwork {
    ValueNetwork net;
    int staleness = 0;
};

struct TrainConfig {
    double gamma = 0.95;
    double learning_rate = 1e-3;
    int target_sync = 50; // L
    int max_epochs = 50;  // e_max
    double nu = 0.9;
    double delta_explore = 0.25;
    int restarts = 3;
    int epoch_length = 2000;
    double lambda = 0.0;
    bool adam = false; // adaptive-moment updates instead of plain gradient descent
    long long eval_slots = 100000;
    int hidden = 60;
    int delta_max = 15;
    StateIndex start{1};
    double converge_rel_tol = 1e-4;
    int converge_patience = 5;
};

// Persistent state of the parameter updates (Adam moments; unused for SGD).
struct OptimizerState {
    std::vector<double> m, v;
    long long step = 0;
};

// Exact-expectation target: r(b,a) + gamma * sum over successor branches of
// branch probability times min_a' Q_target(b', a'). No observation is
// sampled; the branch distribution is computed in closed form.
double td_target(const ValueNetwork& target, const Belief& b, Action a,
                 const TransitionMatrix& p, const Estimator& est, const TrainConfig& cfg);

// Squared error of Q(x)[action] against a fixed target plus its gradient in
// the flat parameter order. Exposed for the finite-difference checks.
double squared_error_and_gradient(const ValueNetwork& net, std::span<const double> x,
                                  int action, double target, std::vector<double>& grad);

// One update of the main network toward the frozen-target value: returns the
// pre-update squared error. Throws NonFiniteLoss when the loss or any
// parameter leaves the finite range.
double train_step(ValueNetwork& main, const ValueNetwork& target, const Belief& b, Action a,
                  const TransitionMatrix& p, const Estimator& est, const TrainConfig& cfg,
                  OptimizerState* opt = nullptr);

struct EpochRow {
    int epoch;
    double avg_loss;
    double avg_cost; // average immediate reward over the epoch's slots
    double exploration_prob;
    double forced_frequency; // realized share of forced (exploratory) actions
};

struct TrainResult {
    ValueNetwork net;
    std::vector<EpochRow> report;
    bool converged_early = false;
};

// Runs up to max_epochs of epoch_length slots on the belief-MDP: actions come
// from the epsilon schedule delta*nu^(e-1) (forced actions split evenly),
// every visited (belief, action) gets one exact-target update, and the target
// network syncs every target_sync steps. Observations along the trajectory
// are drawn from the belief's own marginal, which is their conditional law
// given the history. Stops early once the epoch-average loss is flat.
TrainResult train(const TransitionMatrix& p, Estimator est, const TrainConfig& cfg,
                  std::uint64_t seed);

// Greedy policy of a trained network: pull iff Q(b,1) < Q(b,0).
class GreedyQPolicy final : public Policy {
public:
    explicit GreedyQPolicy(std::shared_ptr<const ValueNetwork> net) : net_(std::move(net)) {}
    Action decide(const Belief& b, long long, RandomSource&) override {
        const auto q = net_->forward(b.flat());
        return Action{q[1] < q[0] ? 1 : 0};
    }
    std::string name() const override { return "dqn"; }
    const ValueNetwork& network() const { return *net_; }
    std::shared_ptr<const ValueNetwork> network_ptr() const { return net_; }

private:
    std::shared_ptr<const ValueNetwork> net_;
};

struct RestartCandidate {
    std::uint64_t seed = 0;
    double eval_cost = 0.0; // MAoII + lambda * R on a fresh simulation
    bool diverged = false;
    bool rejected_by_envelope = false;
};

struct BestResult {
    std::shared_ptr<const ValueNetwork> net;
    double eval_cost = 0.0;
    std::vector<RestartCandidate> candidates;
    std::vector<EpochRow> report; // report of the selected restart
};

// Unconstrained cost MAoII + lambda * R of a policy on a fresh simulation.
double evaluate_cost(Policy& policy, const TransitionMatrix& p, const Estimator& est,
                     const TrainConfig& cfg, std::uint64_t eval_seed);

// Trains once per seed, evaluates every greedy policy on a common fresh
// simulation, drops diverged restarts and any whose cost exceeds the
// never/always-pull envelope by more than 5%, and returns the cheapest.
// Throws AllRestartsDiverged if nothing survives.
BestResult train_best(const TransitionMatrix& p, const Estimator& est, const TrainConfig& cfg,
                      std::span<const std::uint64_t> seeds);

} // namespace aoii
