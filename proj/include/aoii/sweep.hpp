#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aoii/config.hpp"
#include "aoii/format.hpp"

namespace aoii {

struct SweepRow {
    std::string policy;
    std::string estimator;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    bool failed = false; // calibration failed for this cell
    double maoii = 0.0;
    double rate = 0.0;
    double maoii_hat = 0.0;
    std::string calibration; // key=value pairs joined by ';'
    std::string error;
};

struct SweepResult {
    std::vector<SweepRow> rows; // sorted by (policy, estimator, alpha, seed)
    nlohmann::ordered_json calibration_report;
    // serialized trained networks and their training reports, keyed by
    // relative file name under the output directory
    std::map<std::string, std::string> artifacts;
    bool had_calibration_failure = false;
};

// Calibrates whatever the policy list needs (threshold bisection, lambda
// bracket training), then runs every (policy, estimator, alpha, seed) cell
// for cfg.slots slots. Cells execute on cfg.workers threads; every cell
// derives its own random stream from its labels, so the result does not
// depend on scheduling. A calibration failure marks its rows and lets the
// sweep continue.
SweepResult run_sweep(const ExperimentConfig& cfg);

void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// Per-(policy, estimator, alpha) means and standard errors over seeds,
// computed from the same values the results file carries.
void write_aggregate_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// Writes results.csv, aggregate.csv, calibration.json and the trained
// network files under out_dir; creates the directory if needed.
void write_sweep_outputs(const SweepResult& result, const std::string& out_dir);

// Single seeded run under the scheduled pull pattern of cfg.trace: per-slot
// records to `trace_out`, per-slot belief snapshots to `belief_out`.
void run_trace(const ExperimentConfig& cfg, std::ostream& trace_out,
               std::ostream& belief_out);

// Convenience wrapper writing trace.csv and trace_belief.csv under out_dir.
void write_trace_outputs(const ExperimentConfig& cfg, const std::string& out_dir);

} // namespace aoii
