#include "aoii/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace aoii {

namespace {

using nlohmann::json;

const std::set<std::string> kKnownPolicies = {"random", "uniform",   "threshold",
                                              "dqn",    "never", "always"};

EstimatorKind parse_estimator(const std::string& s) {
    if (s == "map")
        return EstimatorKind::Map;
    if (s == "martingale")
        return EstimatorKind::Martingale;
    throw ConfigError("unknown estimator '" + s + "' (expected map or martingale)");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

} // namespace

const char* estimator_name(EstimatorKind k) {
    return k == EstimatorKind::Map ? "map" : "martingale";
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config root must be a JSON object");

    ExperimentConfig cfg;

    if (!j.contains("chain"))
        throw ConfigError("missing field 'chain' (row-major matrix rows)");
    try {
        cfg.chain = TransitionMatrix(j.at("chain").get<std::vector<std::vector<double>>>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field 'chain': ") + e.what());
    }
    if (auto issue = validate(cfg.chain))
        throw ConfigError("field 'chain': " + issue->message());

    cfg.delta_max = get_or<int>(j, "delta_max", 15);
    if (cfg.delta_max < 1)
        throw ConfigError("field 'delta_max': must be >= 1");
    cfg.slots = get_or<long long>(j, "slots", 100000);
    if (cfg.slots < 1)
        throw ConfigError("field 'slots': must be >= 1");

    cfg.estimators.clear();
    if (j.contains("estimators"))
        for (const auto& s : get_or<std::vector<std::string>>(j, "estimators", {}))
            cfg.estimators.push_back(parse_estimator(s));
    else
        cfg.estimators.push_back(parse_estimator(get_or<std::string>(j, "estimator", "map")));
    if (cfg.estimators.empty())
        throw ConfigError("field 'estimators': must not be empty");

    cfg.policies = get_or<std::vector<std::string>>(j, "policies", {});
    if (cfg.policies.empty())
        throw ConfigError("field 'policies': must not be empty");
    for (const auto& p : cfg.policies)
        if (!kKnownPolicies.count(p))
            throw ConfigError("unknown policy '" + p + "'");

    cfg.alphas = get_or<std::vector<double>>(j, "alphas", {});
    const bool needs_alpha =
        std::any_of(cfg.policies.begin(), cfg.policies.end(),
                    [](const std::string& p) { return p != "never" && p != "always"; });
    if (needs_alpha && cfg.alphas.empty())
        throw ConfigError("field 'alphas': required for budgeted policies");
    for (double a : cfg.alphas)
        if (!(a >= 0.0 && a <= 1.0))
            throw ConfigError("field 'alphas': every entry must lie in [0,1]");

    cfg.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", {});
    if (cfg.seeds.empty())
        throw ConfigError("field 'seeds': must not be empty");

    const int start = get_or<int>(j, "start_state", 1);
    if (start < 1 || start > cfg.chain.states())
        throw ConfigError("field 'start_state': out of range");
    cfg.start = StateIndex{start};

    cfg.exclude_warmup = get_or<bool>(j, "exclude_warmup", false);
    cfg.workers = get_or<int>(j, "workers", 1);
    if (cfg.workers < 1)
        throw ConfigError("field 'workers': must be >= 1");
    cfg.out_dir = get_or<std::string>(j, "out_dir", "out");

    if (j.contains("threshold_calibration")) {
        const auto& t = j.at("threshold_calibration");
        cfg.threshold_cal.seeds = get_or<int>(t, "seeds", 3);
        cfg.threshold_cal.slots = get_or<long long>(t, "slots", 100000);
        if (cfg.threshold_cal.seeds < 1 || cfg.threshold_cal.slots < 1)
            throw ConfigError("field 'threshold_calibration': seeds and slots must be >= 1");
    }

    if (j.contains("dqn")) {
        const auto& d = j.at("dqn");
        auto& t = cfg.dqn.train;
        t.gamma = get_or<double>(d, "gamma", t.gamma);
        if (!(t.gamma >= 0.0 && t.gamma < 1.0))
            throw ConfigError("field 'dqn.gamma': must lie in [0,1)");
        t.learning_rate = get_or<double>(d, "learning_rate", t.learning_rate);
        t.target_sync = get_or<int>(d, "target_sync", t.target_sync);
        t.max_epochs = get_or<int>(d, "max_epochs", t.max_epochs);
        t.nu = get_or<double>(d, "nu", t.nu);
        if (!(t.nu > 0.0 && t.nu <= 1.0))
            throw ConfigError("field 'dqn.nu': must lie in (0,1]");
        t.delta_explore = get_or<double>(d, "delta_explore", t.delta_explore);
        if (!(t.delta_explore >= 0.0 && t.delta_explore < 1.0))
            throw ConfigError("field 'dqn.delta_explore': must lie in [0,1)");
        t.restarts = get_or<int>(d, "restarts", t.restarts);
        if (t.restarts < 1)
            throw ConfigError("field 'dqn.restarts': must be >= 1");
        t.epoch_length = get_or<int>(d, "epoch_length", t.epoch_length);
        t.adam = get_or<bool>(d, "adam", t.adam);
        t.eval_slots = get_or<long long>(d, "eval_slots", t.eval_slots);
        t.hidden = get_or<int>(d, "hidden", t.hidden);
        cfg.dqn.lambda_grid = get_or<std::vector<double>>(d, "lambda_grid", cfg.dqn.lambda_grid);
        if (cfg.dqn.lambda_grid.empty())
            throw ConfigError("field 'dqn.lambda_grid': must not be empty");
        cfg.dqn.refine_bracket = get_or<bool>(d, "refine_bracket", cfg.dqn.refine_bracket);
        cfg.dqn.rate_seeds = get_or<int>(d, "rate_seeds", cfg.dqn.rate_seeds);
        cfg.dqn.rate_slots = get_or<long long>(d, "rate_slots", cfg.dqn.rate_slots);
        if (cfg.dqn.rate_seeds < 1 || cfg.dqn.rate_slots < 1)
            throw ConfigError("field 'dqn': rate_seeds and rate_slots must be >= 1");
    }
    cfg.dqn.train.delta_max = cfg.delta_max;
    cfg.dqn.train.start = cfg.start;

    if (j.contains("trace")) {
        const auto& t = j.at("trace");
        cfg.trace.horizon = get_or<long long>(t, "horizon", cfg.trace.horizon);
        if (cfg.trace.horizon < 1 || cfg.trace.horizon > 1000)
            throw ConfigError("field 'trace.horizon': must lie in [1, 1000]");
        cfg.trace.pulls = get_or<std::vector<long long>>(t, "pulls", cfg.trace.pulls);
    }

    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace aoii
