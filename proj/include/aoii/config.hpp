#pragma once

#include <string>
#include <vector>

#include "aoii/dqn.hpp"

namespace aoii {

struct ThresholdCalConfig {
    int seeds = 3;
    long long slots = 100000;
};

struct DqnSweepConfig {
    TrainConfig train;
    std::vector<double> lambda_grid = {0, 0.5, 1, 2, 5, 10, 20, 50};
    bool refine_bracket = true;
    int rate_seeds = 2;            // seeds averaged when measuring a policy's rate
    long long rate_slots = 100000; // slots per rate-measurement run
};

struct TraceConfig {
    long long horizon = 40;
    std::vector<long long> pulls = {3};
};

// One experiment: a chain, a slot budget, the policies and budgets to sweep,
// and the seeds. Every field has the simulation defaults; the JSON document
// only needs to override what the experiment changes.
struct ExperimentConfig {
    TransitionMatrix chain{2, {1, 0, 0, 1}};
    int delta_max = 15;
    long long slots = 100000;
    std::vector<EstimatorKind> estimators = {EstimatorKind::Map};
    std::vector<std::string> policies;
    std::vector<double> alphas;
    std::vector<std::uint64_t> seeds;
    StateIndex start{1};
    bool exclude_warmup = false;
    int workers = 1;
    std::string out_dir = "out";
    ThresholdCalConfig threshold_cal;
    DqnSweepConfig dqn;
    TraceConfig trace;
};

// Parses and validates the JSON document; throws ConfigError with a message
// naming the offending field.
ExperimentConfig parse_config(const std::string& json_text);

// Reads the file and parses it.
ExperimentConfig load_config(const std::string& path);

const char* estimator_name(EstimatorKind k);

} // namespace aoii
