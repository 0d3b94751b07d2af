#include "aoii/dqn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace aoii {

ValueNetwork::ValueNetwork(int input_dim, int hidden) : in_(input_dim), h_(hidden) {
    if (input_dim < 1 || hidden < 1)
        throw std::invalid_argument("ValueNetwork: dimensions must be positive");
    params_.assign(layout().total, 0.0);
}

ValueNetwork::Layout ValueNetwork::layout() const {
    Layout l;
    const auto in = static_cast<std::size_t>(in_);
    const auto h = static_cast<std::size_t>(h_);
    l.w0 = 0;
    l.b0 = l.w0 + h * in;
    l.w1 = l.b0 + h;
    l.b1 = l.w1 + h * h;
    l.w2 = l.b1 + h;
    l.b2 = l.w2 + 2 * h;
    l.total = l.b2 + 2;
    return l;
}

ValueNetwork ValueNetwork::glorot_init(int input_dim, int hidden, RandomSource& rng) {
    ValueNetwork net(input_dim, hidden);
    const auto l = net.layout();
    const auto fill = [&](std::size_t off, std::size_t count, int fan_in, int fan_out) {
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t k = 0; k < count; ++k)
            net.params_[off + k] = (2.0 * rng.uniform() - 1.0) * s;
    };
    fill(l.w0, l.b0 - l.w0, input_dim, hidden);
    fill(l.w1, l.b1 - l.w1, hidden, hidden);
    fill(l.w2, l.b2 - l.w2, hidden, 2);
    return net; // biases stay zero
}

namespace {

struct ForwardCache {
    std::vector<double> z0, h0, z1, h1;
    std::array<double, 2> q;
};

void forward_into(const ValueNetwork& net, std::span<const double> x, ForwardCache& c) {
    const auto l = net.layout();
    const auto p = net.params();
    const int in = net.input_dim();
    const int h = net.hidden();
    c.z0.resize(h);
    c.h0.resize(h);
    c.z1.resize(h);
    c.h1.resize(h);
    for (int u = 0; u < h; ++u) {
        double z = p[l.b0 + u];
        const double* w = &p[l.w0 + static_cast<std::size_t>(u) * in];
        for (int i = 0; i < in; ++i)
            z += w[i] * x[i];
        c.z0[u] = z;
        c.h0[u] = z > 0.0 ? z : 0.0;
    }
    for (int v = 0; v < h; ++v) {
        double z = p[l.b1 + v];
        const double* w = &p[l.w1 + static_cast<std::size_t>(v) * h];
        for (int u = 0; u < h; ++u)
            z += w[u] * c.h0[u];
        c.z1[v] = z;
        c.h1[v] = z > 0.0 ? z : 0.0;
    }
    for (int k = 0; k < 2; ++k) {
        double z = p[l.b2 + k];
        const double* w = &p[l.w2 + static_cast<std::size_t>(k) * h];
        for (int v = 0; v < h; ++v)
            z += w[v] * c.h1[v];
        c.q[k] = z;
    }
}

} // namespace

std::array<double, 2> ValueNetwork::forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != in_)
        throw std::invalid_argument("ValueNetwork::forward: input size mismatch");
    thread_local ForwardCache cache;
    forward_into(*this, x, cache);
    return cache.q;
}

bool ValueNetwork::finite() const {
    for (double v : params_)
        if (!std::isfinite(v))
            return false;
    return true;
}

namespace {

void write_number(std::ostream& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

} // namespace

void ValueNetwork::save(std::ostream& out) const {
    const auto sizes = layer_sizes();
    out << sizes[0] << ' ' << sizes[1] << ' ' << sizes[2] << ' ' << sizes[3] << '\n';
    const auto l = layout();
    const std::size_t bounds[] = {l.w0, l.b0, l.w1, l.b1, l.w2, l.b2, l.total};
    for (int tensor = 0; tensor < 6; ++tensor) {
        for (std::size_t k = bounds[tensor]; k < bounds[tensor + 1]; ++k) {
            if (k > bounds[tensor])
                out << ' ';
            write_number(out, params_[k]);
        }
        out << '\n';
    }
}

ValueNetwork ValueNetwork::load(std::istream& in) {
    int d_in = 0, h1 = 0, h2 = 0, d_out = 0;
    if (!(in >> d_in >> h1 >> h2 >> d_out) || h1 != h2 || d_out != 2)
        throw std::runtime_error("ValueNetwork::load: bad header");
    ValueNetwork net(d_in, h1);
    for (auto& v : net.params_)
        if (!(in >> v))
            throw std::runtime_error("ValueNetwork::load: truncated parameters");
    return net;
}

double td_target(const ValueNetwork& target, const Belief& b, Action a,
                 const TransitionMatrix& p, const Estimator& est, const TrainConfig& cfg) {
    double y = reward(b, a, cfg.lambda);
    if (cfg.gamma == 0.0)
        return y;
    for (const auto& branch : successor_distribution(b, a, p, est)) {
        const auto q = target.forward(branch.belief.flat());
        y += cfg.gamma * branch.probability * std::min(q[0], q[1]);
    }
    return y;
}

double squared_error_and_gradient(const ValueNetwork& net, std::span<const double> x,
                                  int action, double target, std::vector<double>& grad) {
    ForwardCache c;
    forward_into(net, x, c);
    const double err = c.q[action] - target;
    const double g = 2.0 * err; // dL/dq_a

    const auto l = net.layout();
    const auto p = net.params();
    const int in = net.input_dim();
    const int h = net.hidden();
    grad.assign(l.total, 0.0);

    grad[l.b2 + action] = g;
    for (int v = 0; v < h; ++v)
        grad[l.w2 + static_cast<std::size_t>(action) * h + v] = g * c.h1[v];

    std::vector<double> dz1(h);
    for (int v = 0; v < h; ++v)
        dz1[v] = c.z1[v] > 0.0 ? g * p[l.w2 + static_cast<std::size_t>(action) * h + v] : 0.0;
    for (int v = 0; v < h; ++v) {
        grad[l.b1 + v] = dz1[v];
        if (dz1[v] != 0.0) {
            double* gw = &grad[l.w1 + static_cast<std::size_t>(v) * h];
            for (int u = 0; u < h; ++u)
                gw[u] = dz1[v] * c.h0[u];
        }
    }

    std::vector<double> dz0(h, 0.0);
    for (int v = 0; v < h; ++v) {
        if (dz1[v] == 0.0)
            continue;
        const double* w = &p[l.w1 + static_cast<std::size_t>(v) * h];
        for (int u = 0; u < h; ++u)
            dz0[u] += dz1[v] * w[u];
    }
    for (int u = 0; u < h; ++u) {
        if (c.z0[u] <= 0.0)
            dz0[u] = 0.0;
        grad[l.b0 + u] = dz0[u];
        if (dz0[u] != 0.0) {
            double* gw = &grad[l.w0 + static_cast<std::size_t>(u) * in];
            for (int i = 0; i < in; ++i)
                gw[i] = dz0[u] * x[i];
        }
    }
    return err * err;
}

namespace {

void apply_update(ValueNetwork& net, const std::vector<double>& grad, const TrainConfig& cfg,
                  OptimizerState* opt) {
    auto params = net.params_mut();
    if (!cfg.adam) {
        for (std::size_t k = 0; k < params.size(); ++k)
            params[k] -= cfg.learning_rate * grad[k];
        return;
    }
    if (!opt)
        throw std::invalid_argument("adam updates need an OptimizerState");
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    if (opt->m.size() != params.size()) {
        opt->m.assign(params.size(), 0.0);
        opt->v.assign(params.size(), 0.0);
        opt->step = 0;
    }
    opt->step += 1;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(opt->step));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(opt->step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        opt->m[k] = kBeta1 * opt->m[k] + (1.0 - kBeta1) * grad[k];
        opt->v[k] = kBeta2 * opt->v[k] + (1.0 - kBeta2) * grad[k] * grad[k];
        params[k] -= cfg.learning_rate * (opt->m[k] / c1) / (std::sqrt(opt->v[k] / c2) + kEps);
    }
}

} // namespace

double train_step(ValueNetwork& main, const ValueNetwork& target, const Belief& b, Action a,
                  const TransitionMatrix& p, const Estimator& est, const TrainConfig& cfg,
                  OptimizerState* opt) {
    const double y = td_target(target, b, a, p, est, cfg);
    thread_local std::vector<double> grad;
    const double loss = squared_error_and_gradient(main, b.flat(), a.value, y, grad);
    if (!std::isfinite(loss))
        throw NonFiniteLoss("training loss left the finite range");
    apply_update(main, grad, cfg, opt);
    if (!main.finite())
        throw NonFiniteLoss("network parameters left the finite range");
    return loss;
}

TrainResult train(const TransitionMatrix& p, Estimator est, const TrainConfig& cfg,
                  std::uint64_t seed) {
    require_valid(p);
    RandomSource rng(seed);
    const int input = p.states() * (cfg.delta_max + 1);
    ValueNetwork main = ValueNetwork::glorot_init(input, cfg.hidden, rng);
    TargetNetwork target{main, 0};
    OptimizerState opt;
    if (est.kind == EstimatorKind::Martingale && !est.last_received)
        est.last_received = cfg.start;
    Belief b = init_belief(p, cfg.delta_max, cfg.start);

    TrainResult result{ValueNetwork(input, cfg.hidden), {}, false};
    double prev_loss = std::numeric_limits<double>::infinity();
    int flat_epochs = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double explore_p = cfg.delta_explore * std::pow(cfg.nu, epoch - 1);
        double loss_sum = 0.0, cost_sum = 0.0;
        long long forced = 0;
        for (int s = 0; s < cfg.epoch_length; ++s) {
            Action a;
            if (rng.bernoulli(explore_p)) {
                ++forced;
                a = Action{rng.bernoulli(0.5) ? 1 : 0};
            } else {
                const auto q = main.forward(b.flat());
                a = Action{q[1] < q[0] ? 1 : 0};
            }
            loss_sum += train_step(main, target.net, b, a, p, est, cfg, &opt);
            cost_sum += reward(b, a, cfg.lambda);
            if (++target.staleness >= cfg.target_sync) {
                target.net = main;
                target.staleness = 0;
            }
            // Advance along the belief-MDP: a pull reveals a state drawn from
            // the belief's marginal (its conditional law given the history).
            if (a.value == 1) {
                const auto pi = marginal_pi(b);
                const double u = rng.uniform();
                double cum = 0.0;
                int k = p.states() - 1;
                for (int i = 0; i < p.states(); ++i) {
                    cum += pi[i];
                    if (u < cum) {
                        k = i;
                        break;
                    }
                }
                const StateIndex sk{k + 1};
                if (est.kind == EstimatorKind::Martingale)
                    est.last_received = sk;
                b = propagate(observe(b, Observation::delivered(sk)), p, est).first;
            } else {
                b = propagate(b, p, est).first;
            }
        }
        const double avg_loss = loss_sum / cfg.epoch_length;
        result.report.push_back({epoch, avg_loss, cost_sum / cfg.epoch_length, explore_p,
                                 static_cast<double>(forced) / cfg.epoch_length});
        if (std::abs(avg_loss - prev_loss) <
            cfg.converge_rel_tol * std::max(std::abs(prev_loss), 1e-12))
            ++flat_epochs;
        else
            flat_epochs = 0;
        prev_loss = avg_loss;
        if (flat_epochs >= cfg.converge_patience) {
            result.converged_early = true;
            break;
        }
    }
    result.net = std::move(main);
    return result;
}

double evaluate_cost(Policy& policy, const TransitionMatrix& p, const Estimator& est,
                     const TrainConfig& cfg, std::uint64_t eval_seed) {
    SimConfig sc;
    sc.slots = cfg.eval_slots;
    sc.delta_max = cfg.delta_max;
    sc.start = cfg.start;
    const RunMetrics m = run(policy, p, est, sc, eval_seed);
    return m.maoii() + cfg.lambda * m.rate();
}

BestResult train_best(const TransitionMatrix& p, const Estimator& est, const TrainConfig& cfg,
                      std::span<const std::uint64_t> seeds) {
    if (seeds.empty())
        throw std::invalid_argument("train_best: need at least one seed");
    const std::uint64_t eval_seed = RandomSource::mix(seeds[0] ^ 0x45564153454544ULL);

    NeverPullPolicy never;
    AlwaysPullPolicy always;
    const double envelope =
        1.05 * std::min(evaluate_cost(never, p, est, cfg, eval_seed),
                        evaluate_cost(always, p, est, cfg, eval_seed)) +
        1e-9;

    BestResult best;
    best.eval_cost = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed : seeds) {
        RestartCandidate cand{seed, 0.0, false, false};
        TrainResult tr{ValueNetwork(1, 1), {}, false};
        try {
            tr = train(p, est, cfg, seed);
        } catch (const NonFiniteLoss&) {
            cand.diverged = true;
            best.candidates.push_back(cand);
            continue;
        }
        auto net = std::make_shared<const ValueNetwork>(std::move(tr.net));
        GreedyQPolicy greedy(net);
        cand.eval_cost = evaluate_cost(greedy, p, est, cfg, eval_seed);
        cand.rejected_by_envelope = cand.eval_cost > envelope;
        best.candidates.push_back(cand);
        if (!cand.rejected_by_envelope && cand.eval_cost < best.eval_cost) {
            best.eval_cost = cand.eval_cost;
            best.net = net;
            best.report = std::move(tr.report);
        }
    }
    if (!best.net)
        throw AllRestartsDiverged("no restart produced an acceptable policy");
    return best;
}

} // namespace aoii
