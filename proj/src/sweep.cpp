#include "aoii/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace aoii {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t label_seed(std::uint64_t config_seed, const std::string& policy,
                         const std::string& estimator, double alpha) {
    const std::uint64_t tag =
        fnv1a(policy) ^ RandomSource::mix(fnv1a(estimator)) ^ std::bit_cast<std::uint64_t>(alpha);
    return RandomSource::mix(tag ^ RandomSource::mix(config_seed));
}

// Index-sharded parallel loop; the work items write only their own slots, so
// the outcome is independent of thread scheduling.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
            fn(i);
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(workers, static_cast<int>(count));
    pool.reserve(n);
    for (int w = 0; w < n; ++w)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
}

struct ThresholdCalEntry {
    bool ok = false;
    ThresholdCalibration cal;
    std::string error;
};

struct LambdaCalEntry {
    bool ok = false;
    LambdaBracket bracket;
    std::string error;
};

std::string threshold_meta(const ThresholdCalibration& c) {
    return "tau_minus=" + format_double(c.tau_minus) + ";tau_plus=" + format_double(c.tau_plus) +
           ";rate_minus=" + format_double(c.rate_minus) +
           ";rate_plus=" + format_double(c.rate_plus);
}

std::string lambda_meta(const LambdaBracket& b) {
    return "lambda_minus=" + format_double(b.lambda_minus) +
           ";lambda_plus=" + format_double(b.lambda_plus) +
           ";rate_minus=" + format_double(b.rate_minus) +
           ";rate_plus=" + format_double(b.rate_plus);
}

} // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
    SweepResult result;
    auto& report = result.calibration_report;
    report = nlohmann::ordered_json::object();

    SimConfig sim_cfg;
    sim_cfg.slots = cfg.slots;
    sim_cfg.delta_max = cfg.delta_max;
    sim_cfg.start = cfg.start;
    sim_cfg.exclude_warmup = cfg.exclude_warmup;

    const bool wants_threshold =
        std::count(cfg.policies.begin(), cfg.policies.end(), "threshold") > 0;
    const bool wants_dqn = std::count(cfg.policies.begin(), cfg.policies.end(), "dqn") > 0;

    // ---- calibration phase ----------------------------------------------
    // keyed by (estimator, alpha)
    std::map<std::pair<std::string, double>, ThresholdCalEntry> threshold_cal;
    std::map<std::pair<std::string, double>, LambdaCalEntry> lambda_cal;
    // greedy policies of the trained networks, keyed by (estimator, lambda bits)
    std::map<std::pair<std::string, std::uint64_t>, std::shared_ptr<Policy>> trained;

    for (EstimatorKind ek : cfg.estimators) {
        const std::string ename = estimator_name(ek);
        // the warm start stands in for the martingale's first delivery
        const Estimator est{ek, ek == EstimatorKind::Martingale
                                    ? std::optional<StateIndex>(cfg.start)
                                    : std::nullopt};

        if (wants_threshold) {
            std::vector<std::uint64_t> cal_seeds;
            for (int i = 0; i < cfg.threshold_cal.seeds; ++i)
                cal_seeds.push_back(
                    RandomSource::mix(cfg.seeds[0] ^ fnv1a("threshold-cal") ^ (std::uint64_t)i));
            for (double alpha : cfg.alphas) {
                ThresholdCalEntry entry;
                try {
                    entry.cal = calibrate_threshold(cfg.chain, est, alpha, cfg.delta_max,
                                                    cfg.threshold_cal.slots, cal_seeds);
                    entry.ok = true;
                    auto& node = report["threshold"][ename][format_double(alpha)];
                    node["tau_minus"] = entry.cal.tau_minus;
                    node["tau_plus"] = entry.cal.tau_plus;
                    node["rate_minus"] = entry.cal.rate_minus;
                    node["rate_plus"] = entry.cal.rate_plus;
                } catch (const BracketFailure& e) {
                    entry.error = e.what();
                    report["threshold"][ename][format_double(alpha)]["error"] = entry.error;
                    result.had_calibration_failure = true;
                }
                threshold_cal[{ename, alpha}] = std::move(entry);
            }
        }

        if (wants_dqn) {
            // One network per multiplier; the grid is shared across alphas.
            std::map<std::uint64_t, BestResult> trained_results;
            std::map<const Policy*, double> rate_cache;
            const std::uint64_t rate_seed =
                RandomSource::mix(cfg.seeds[0] ^ fnv1a("dqn-rate") ^ fnv1a(ename));

            const auto train_one = [&](double lambda) {
                TrainConfig tc = cfg.dqn.train;
                tc.lambda = lambda;
                const std::uint64_t bits = std::bit_cast<std::uint64_t>(lambda);
                std::vector<std::uint64_t> seeds;
                for (int r = 0; r < tc.restarts; ++r)
                    seeds.push_back(RandomSource::mix(cfg.seeds[0] ^ fnv1a("dqn-train") ^
                                                      fnv1a(ename) ^ bits ^ (std::uint64_t)r));
                return train_best(cfg.chain, est, tc, seeds);
            };
            std::map<std::uint64_t, std::string> failed_lambdas;
            const auto ensure_trained = [&](double lambda) -> std::shared_ptr<Policy> {
                const std::uint64_t bits = std::bit_cast<std::uint64_t>(lambda);
                if (auto it = failed_lambdas.find(bits); it != failed_lambdas.end())
                    throw AllRestartsDiverged(it->second);
                const auto key = std::make_pair(ename, bits);
                if (auto it = trained.find(key); it != trained.end())
                    return it->second;
                BestResult best = train_one(lambda);
                auto pol = std::make_shared<GreedyQPolicy>(best.net);
                trained_results[bits] = std::move(best);
                trained[key] = pol;
                return pol;
            };
            const auto measure = [&](Policy& pol) {
                if (auto it = rate_cache.find(&pol); it != rate_cache.end())
                    return it->second;
                SimConfig mc = sim_cfg;
                mc.slots = cfg.dqn.rate_slots;
                double r = 0.0;
                for (int s = 0; s < cfg.dqn.rate_seeds; ++s)
                    r += run(pol, cfg.chain, est, mc, RandomSource::mix(rate_seed ^ (std::uint64_t)s))
                             .rate() /
                         cfg.dqn.rate_seeds;
                rate_cache[&pol] = r;
                return r;
            };

            // Train the base grid up front; each worker fills only its own
            // slot, the caches are populated sequentially afterwards.
            std::vector<double> grid = cfg.dqn.lambda_grid;
            std::sort(grid.begin(), grid.end());
            std::vector<std::optional<BestResult>> grid_results(grid.size());
            std::vector<std::string> grid_errors(grid.size());
            parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
                try {
                    grid_results[i] = train_one(grid[i]);
                } catch (const Error& e) {
                    grid_errors[i] = e.what();
                }
            });
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const std::uint64_t bits = std::bit_cast<std::uint64_t>(grid[i]);
                if (!grid_results[i]) {
                    failed_lambdas[bits] = grid_errors[i];
                    continue;
                }
                trained[{ename, bits}] =
                    std::make_shared<GreedyQPolicy>(grid_results[i]->net);
                trained_results[bits] = std::move(*grid_results[i]);
            }

            for (double alpha : cfg.alphas) {
                LambdaCalEntry entry;
                try {
                    entry.bracket = calibrate_lambda(ensure_trained, measure, alpha, grid,
                                                     cfg.dqn.refine_bracket);
                    entry.ok = true;
                    auto& node = report["dqn"][ename][format_double(alpha)];
                    node["lambda_minus"] = entry.bracket.lambda_minus;
                    node["lambda_plus"] = entry.bracket.lambda_plus;
                    node["rate_minus"] = entry.bracket.rate_minus;
                    node["rate_plus"] = entry.bracket.rate_plus;
                    node["grid"] = entry.bracket.grid;
                    node["measured_rates"] = entry.bracket.measured_rates;
                    node["smoothed_rates"] = entry.bracket.smoothed_rates;
                } catch (const BracketFailure& e) {
                    entry.error = e.what();
                    report["dqn"][ename][format_double(alpha)]["error"] = entry.error;
                    result.had_calibration_failure = true;
                } catch (const AllRestartsDiverged& e) {
                    entry.error = e.what();
                    report["dqn"][ename][format_double(alpha)]["error"] = entry.error;
                    result.had_calibration_failure = true;
                }
                lambda_cal[{ename, alpha}] = std::move(entry);
            }

            for (const auto& [bits, best] : trained_results) {
                const double lambda = std::bit_cast<double>(bits);
                const std::string stem =
                    "networks/" + ename + "_lambda" + format_double(lambda);
                std::ostringstream net_text;
                best.net->save(net_text);
                result.artifacts[stem + ".txt"] = net_text.str();
                std::ostringstream rep;
                rep << "# aoii-lab v1\nepoch,avg_loss,eval_cost,exploration_prob\n";
                for (const auto& row : best.report)
                    rep << row.epoch << ',' << format_double(row.avg_loss) << ','
                        << format_double(row.avg_cost) << ','
                        << format_double(row.exploration_prob) << '\n';
                result.artifacts[stem + "_report.csv"] = rep.str();
            }
        }
    }

    // ---- run phase --------------------------------------------------------
    struct Cell {
        std::string policy;
        std::string estimator;
        EstimatorKind ekind;
        double alpha;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& pol : cfg.policies)
        for (EstimatorKind ek : cfg.estimators) {
            const std::string ename = estimator_name(ek);
            if (pol == "never" || pol == "always") {
                const double a = pol == "never" ? 0.0 : 1.0;
                for (std::uint64_t s : cfg.seeds)
                    cells.push_back({pol, ename, ek, a, s});
            } else {
                for (double alpha : cfg.alphas)
                    for (std::uint64_t s : cfg.seeds)
                        cells.push_back({pol, ename, ek, alpha, s});
            }
        }

    std::vector<SweepRow> rows(cells.size());
    parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
        const Cell& cell = cells[i];
        SweepRow row;
        row.policy = cell.policy;
        row.estimator = cell.estimator;
        row.alpha = cell.alpha;
        row.seed = cell.seed;

        std::shared_ptr<Policy> pol;
        if (cell.policy == "random") {
            pol = std::make_shared<RandomPolicy>(cell.alpha);
        } else if (cell.policy == "uniform") {
            pol = std::make_shared<UniformPolicy>(cell.alpha);
        } else if (cell.policy == "never") {
            pol = std::make_shared<NeverPullPolicy>();
        } else if (cell.policy == "always") {
            pol = std::make_shared<AlwaysPullPolicy>();
        } else if (cell.policy == "threshold") {
            const auto& entry = threshold_cal.at({cell.estimator, cell.alpha});
            if (!entry.ok) {
                row.failed = true;
                row.error = entry.error;
            } else {
                pol = std::make_shared<SteeredPolicy>(
                    std::make_shared<ThresholdPolicy>(entry.cal.tau_minus),
                    std::make_shared<ThresholdPolicy>(entry.cal.tau_plus), cell.alpha);
                row.calibration = threshold_meta(entry.cal);
            }
        } else if (cell.policy == "dqn") {
            const auto& entry = lambda_cal.at({cell.estimator, cell.alpha});
            if (!entry.ok) {
                row.failed = true;
                row.error = entry.error;
            } else {
                pol = std::make_shared<SteeredPolicy>(entry.bracket.policy_minus,
                                                      entry.bracket.policy_plus, cell.alpha);
                row.calibration = lambda_meta(entry.bracket);
            }
        }

        if (pol) {
            const Estimator est{cell.ekind, std::nullopt};
            const RunMetrics m = run(*pol, cfg.chain, est, sim_cfg,
                                     label_seed(cell.seed, cell.policy, cell.estimator,
                                                cell.alpha));
            row.maoii = m.maoii();
            row.rate = m.rate();
            row.maoii_hat = m.maoii_hat();
        }
        rows[i] = std::move(row);
    });

    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.policy, a.estimator, a.alpha, a.seed) <
               std::tie(b.policy, b.estimator, b.alpha, b.seed);
    });
    result.rows = std::move(rows);
    return result;
}

void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "# aoii-lab v1\n";
    out << "policy,estimator,alpha,seed,maoii,rate,maoii_hat,calibration,status\n";
    for (const auto& r : rows) {
        out << r.policy << ',' << r.estimator << ',' << format_double(r.alpha) << ','
            << r.seed << ',';
        if (r.failed)
            out << ",,," << r.calibration << ",bracket_failure\n";
        else
            out << format_double(r.maoii) << ',' << format_double(r.rate) << ','
                << format_double(r.maoii_hat) << ',' << r.calibration << ",ok\n";
    }
}

void write_aggregate_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "# aoii-lab v1\n";
    out << "policy,estimator,alpha,n,mean_maoii,se_maoii,mean_rate,mean_maoii_hat\n";
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        std::vector<const SweepRow*> group;
        while (j < rows.size() && rows[j].policy == rows[i].policy &&
               rows[j].estimator == rows[i].estimator && rows[j].alpha == rows[i].alpha) {
            if (!rows[j].failed)
                group.push_back(&rows[j]);
            ++j;
        }
        if (!group.empty()) {
            const double n = static_cast<double>(group.size());
            double m_maoii = 0, m_rate = 0, m_hat = 0;
            for (const auto* r : group) {
                m_maoii += r->maoii;
                m_rate += r->rate;
                m_hat += r->maoii_hat;
            }
            m_maoii /= n;
            m_rate /= n;
            m_hat /= n;
            double var = 0;
            for (const auto* r : group)
                var += (r->maoii - m_maoii) * (r->maoii - m_maoii);
            const double se = group.size() > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
            out << rows[i].policy << ',' << rows[i].estimator << ','
                << format_double(rows[i].alpha) << ',' << group.size() << ','
                << format_double(m_maoii) << ',' << format_double(se) << ','
                << format_double(m_rate) << ',' << format_double(m_hat) << '\n';
        }
        i = j;
    }
}

void write_sweep_outputs(const SweepResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / "results.csv", std::ios::binary);
        write_results_csv(f, result.rows);
    }
    {
        std::ofstream f(fs::path(out_dir) / "aggregate.csv", std::ios::binary);
        write_aggregate_csv(f, result.rows);
    }
    {
        std::ofstream f(fs::path(out_dir) / "calibration.json", std::ios::binary);
        f << result.calibration_report.dump(2) << '\n';
    }
    for (const auto& [name, text] : result.artifacts) {
        const fs::path path = fs::path(out_dir) / name;
        fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        f << text;
    }
}

void run_trace(const ExperimentConfig& cfg, std::ostream& trace_out,
               std::ostream& belief_out) {
    trace_out << "# aoii-lab v1\n";
    trace_out << "t,x,x_hat,aoii,action,expected_aoii\n";
    belief_out << "# aoii-lab v1\n";
    belief_out << "t,state,delta,mass\n";

    ScheduledPolicy pol(std::set<long long>(cfg.trace.pulls.begin(), cfg.trace.pulls.end()));
    SimConfig sc;
    sc.slots = cfg.trace.horizon;
    sc.delta_max = cfg.delta_max;
    sc.start = cfg.start;
    const Estimator est{cfg.estimators.front(), std::nullopt};
    const std::uint64_t seed = RandomSource::mix(cfg.seeds[0] ^ fnv1a("trace"));

    run(pol, cfg.chain, est, sc, seed, [&](const SlotRecord& rec, const Belief& b) {
        trace_out << rec.t << ',' << rec.x.value << ',' << rec.x_hat.value << ',' << rec.aoii
                  << ',' << rec.action.value << ',' << format_double(rec.expected_aoii) << '\n';
        for (int i = 0; i < b.states(); ++i)
            for (int d = 0; d < b.cols(); ++d)
                if (b.at0(i, d) != 0.0)
                    belief_out << rec.t << ',' << i + 1 << ',' << d << ','
                               << format_double(b.at0(i, d)) << '\n';
    });
}

void write_trace_outputs(const ExperimentConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream t(fs::path(out_dir) / "trace.csv", std::ios::binary);
    std::ofstream b(fs::path(out_dir) / "trace_belief.csv", std::ios::binary);
    run_trace(cfg, t, b);
}

} // namespace aoii
