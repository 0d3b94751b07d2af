// Experiment runner: executes policy sweeps described by a JSON config and
// writes CSV results suitable for plotting rate/age trade-off curves.
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aoii/sweep.hpp"

int main(int argc, char** argv) {
    CLI::App app{"aoii-lab: pull-based remote estimation experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int workers = 0;
    bool trace = false;

    CLI::App* run_cmd = app.add_subcommand("run", "run the sweep described by a config file");
    run_cmd->add_option("config", config_path, "experiment config (JSON)")->required();
    run_cmd->add_option("--out", out_dir, "output directory (default: config out_dir)");
    run_cmd->add_option("--workers", workers, "number of worker threads");
    run_cmd->add_flag("--trace", trace, "also write a scheduled-pull trace");

    CLI11_PARSE(app, argc, argv);

    try {
        aoii::ExperimentConfig cfg = aoii::load_config(config_path);
        if (workers > 0)
            cfg.workers = workers;
        if (!out_dir.empty())
            cfg.out_dir = out_dir;

        const aoii::SweepResult result = aoii::run_sweep(cfg);
        aoii::write_sweep_outputs(result, cfg.out_dir);
        if (trace)
            aoii::write_trace_outputs(cfg, cfg.out_dir);

        std::size_t failed = 0;
        for (const auto& row : result.rows)
            failed += row.failed ? 1 : 0;
        std::cout << "wrote " << result.rows.size() << " rows to " << cfg.out_dir;
        if (failed > 0)
            std::cout << " (" << failed << " rows failed calibration)";
        std::cout << '\n';
        return result.had_calibration_failure ? 3 : 0;
    } catch (const aoii::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
