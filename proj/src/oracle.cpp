#include "aoii/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace aoii::oracle {

namespace {

constexpr int kMaxHorizon = 12;
constexpr int kMaxStates = 4;

struct Walk {
    std::vector<StateIndex> states;
    double probability; // unconditional within the branch
    long age;
};

// Branch-local enumeration state at one slot.
struct Node {
    std::vector<Walk> walks;
    std::optional<StateIndex> last_delivered;
};

std::vector<double> enumerated_pi(const std::vector<Walk>& walks, int n, double total) {
    std::vector<double> pi(n, 0.0);
    for (const auto& w : walks)
        pi[w.states.back().value - 1] += w.probability;
    for (double& v : pi)
        v /= total;
    return pi;
}

double total_probability(const std::vector<Walk>& walks) {
    double s = 0.0;
    for (const auto& w : walks)
        s += w.probability;
    return s;
}

Belief bin_joint(const std::vector<Walk>& walks, int n, int delta_max, double total) {
    Belief b(n, delta_max);
    for (const auto& w : walks) {
        const int i = w.states.back().value - 1;
        const int d = static_cast<int>(std::min<long>(w.age, delta_max));
        b.set0(i, d, b.at0(i, d) + w.probability / total);
    }
    return b;
}

// Applies the estimator and age update for slot t to a node whose walks have
// just been extended to x_t. Returns the slot estimate.
StateIndex settle_slot(Node& node, const Estimator& est, int n) {
    const double total = total_probability(node.walks);
    const auto pi = enumerated_pi(node.walks, n, total);
    Estimator slot_est = est;
    if (est.kind == EstimatorKind::Martingale)
        slot_est.last_received = node.last_delivered;
    const StateIndex xhat = estimate_from_pi(pi, slot_est);
    for (auto& w : node.walks)
        w.age = (w.states.back() == xhat) ? 0 : w.age + 1;
    return xhat;
}

void check_limits(const TransitionMatrix& p, size_t horizon) {
    if (horizon > kMaxHorizon || p.states() > kMaxStates)
        throw HorizonTooLarge("oracle enumeration supports horizon <= 12 and N <= 4");
}

} // namespace

std::vector<BranchResult> enumerate(const TransitionMatrix& p, StateIndex start,
                                    std::span<const Action> actions,
                                    const Estimator& est, int delta_max) {
    check_limits(p, actions.size());
    const int n = p.states();
    const int h = static_cast<int>(actions.size());

    struct Frame {
        Node node;
        std::vector<Observation> observations;
        std::vector<Belief> beliefs;
        std::vector<double> expected_age;
        std::vector<StateIndex> estimates;
        std::vector<std::vector<long>> age_history; // per walk, ages 0..t
    };

    Frame root;
    root.node.walks.push_back({{start}, 1.0, 0});
    root.node.last_delivered = start; // known start seeds the martingale
    root.beliefs.push_back(bin_joint(root.node.walks, n, delta_max, 1.0));
    root.expected_age.push_back(0.0);
    root.estimates.push_back(start);
    root.age_history.push_back({0});

    std::vector<Frame> frontier;
    frontier.push_back(std::move(root));

    for (int t = 1; t <= h; ++t) {
        const bool pulled = actions[t - 1].value == 1;
        std::vector<Frame> next;
        for (auto& fr : frontier) {
            // Partition by the revealed x_{t-1} when a pull was issued.
            std::vector<std::pair<Observation, std::vector<size_t>>> parts;
            if (pulled) {
                for (int k = 0; k < n; ++k) {
                    std::vector<size_t> idx;
                    for (size_t w = 0; w < fr.node.walks.size(); ++w)
                        if (fr.node.walks[w].states.back().value == k + 1)
                            idx.push_back(w);
                    if (!idx.empty())
                        parts.emplace_back(Observation::delivered(StateIndex{k + 1}),
                                           std::move(idx));
                }
            } else {
                std::vector<size_t> all(fr.node.walks.size());
                for (size_t w = 0; w < all.size(); ++w)
                    all[w] = w;
                parts.emplace_back(Observation::empty(), std::move(all));
            }

            for (auto& [obs, idx] : parts) {
                Frame child;
                child.observations = fr.observations;
                child.observations.push_back(obs);
                child.beliefs = fr.beliefs;
                child.expected_age = fr.expected_age;
                child.estimates = fr.estimates;
                child.node.last_delivered =
                    obs.is_delivered() ? obs.delivered_state : fr.node.last_delivered;
                for (size_t w : idx) {
                    const auto& base = fr.node.walks[w];
                    for (int j = 0; j < n; ++j) {
                        const double pr =
                            base.probability * p.prob0(base.states.back().value - 1, j);
                        if (pr == 0.0)
                            continue;
                        Walk ext = base;
                        ext.states.push_back(StateIndex{j + 1});
                        ext.probability = pr;
                        child.node.walks.push_back(std::move(ext));
                        child.age_history.push_back(fr.age_history[w]);
                    }
                }
                const StateIndex xhat = settle_slot(child.node, est, n);
                child.estimates.push_back(xhat);
                const double total = total_probability(child.node.walks);
                child.beliefs.push_back(bin_joint(child.node.walks, n, delta_max, total));
                double ea = 0.0;
                for (size_t w = 0; w < child.node.walks.size(); ++w) {
                    child.age_history[w].push_back(child.node.walks[w].age);
                    ea += child.node.walks[w].probability * child.node.walks[w].age;
                }
                child.expected_age.push_back(ea / total);
                next.push_back(std::move(child));
            }
        }
        frontier = std::move(next);
    }

    std::vector<BranchResult> out;
    out.reserve(frontier.size());
    for (auto& fr : frontier) {
        BranchResult br;
        br.observations = std::move(fr.observations);
        br.probability = total_probability(fr.node.walks);
        br.beliefs = std::move(fr.beliefs);
        br.expected_age = std::move(fr.expected_age);
        br.table.horizon = h;
        br.table.estimates = std::move(fr.estimates);
        const double total = total_probability(fr.node.walks);
        for (size_t w = 0; w < fr.node.walks.size(); ++w)
            br.table.entries.push_back({std::move(fr.node.walks[w].states),
                                        fr.node.walks[w].probability / total,
                                        std::move(fr.age_history[w])});
        out.push_back(std::move(br));
    }
    return out;
}

double compare(std::span<const Belief> exact, std::span<const Belief> recursive) {
    if (exact.size() != recursive.size())
        throw ShapeMismatch("belief sequences have different lengths");
    double dev = 0.0;
    for (size_t t = 0; t < exact.size(); ++t)
        dev = std::max(dev, exact[t].max_abs_diff(recursive[t]));
    return dev;
}

namespace {

double certify_node(const TransitionMatrix& p, std::span<const Action> actions, int t,
                    Node node, const Belief& belief, const Estimator& est, int delta_max) {
    const int n = p.states();
    const int h = static_cast<int>(actions.size());
    if (t > h)
        return 0.0;

    double dev = 0.0;
    const bool pulled = actions[t - 1].value == 1;

    std::vector<std::pair<Observation, std::vector<size_t>>> parts;
    if (pulled) {
        for (int k = 0; k < n; ++k) {
            std::vector<size_t> idx;
            for (size_t w = 0; w < node.walks.size(); ++w)
                if (node.walks[w].states.back().value == k + 1)
                    idx.push_back(w);
            if (!idx.empty())
                parts.emplace_back(Observation::delivered(StateIndex{k + 1}), std::move(idx));
        }
    } else {
        std::vector<size_t> all(node.walks.size());
        for (size_t w = 0; w < all.size(); ++w)
            all[w] = w;
        parts.emplace_back(Observation::empty(), std::move(all));
    }

    for (auto& [obs, idx] : parts) {
        Node child;
        child.last_delivered = obs.is_delivered() ? obs.delivered_state : node.last_delivered;
        for (size_t w : idx) {
            const auto& base = node.walks[w];
            for (int j = 0; j < n; ++j) {
                const double pr = base.probability * p.prob0(base.states.back().value - 1, j);
                if (pr == 0.0)
                    continue;
                Walk ext = base;
                ext.states.push_back(StateIndex{j + 1});
                ext.probability = pr;
                child.walks.push_back(std::move(ext));
            }
        }
        settle_slot(child, est, n);
        const double total = total_probability(child.walks);
        const Belief exact = bin_joint(child.walks, n, delta_max, total);

        Estimator branch_est = est;
        if (est.kind == EstimatorKind::Martingale)
            branch_est.last_received = child.last_delivered;
        const Belief recursive = propagate(observe(belief, obs), p, branch_est).first;

        dev = std::max(dev, exact.max_abs_diff(recursive));
        dev = std::max(dev, certify_node(p, actions, t + 1, std::move(child), recursive,
                                         branch_est, delta_max));
    }
    return dev;
}

} // namespace

double certify(const TransitionMatrix& p, StateIndex start,
               std::span<const Action> actions, const Estimator& est, int delta_max) {
    check_limits(p, actions.size());
    if (actions.empty())
        return 0.0;
    Node root;
    root.walks.push_back({{start}, 1.0, 0});
    root.last_delivered = start;
    Estimator root_est = est;
    if (est.kind == EstimatorKind::Martingale)
        root_est.last_received = start;
    const Belief b0 = init_belief(p, delta_max, start);
    return certify_node(p, actions, 1, std::move(root), b0, root_est, delta_max);
}

} // namespace aoii::oracle
