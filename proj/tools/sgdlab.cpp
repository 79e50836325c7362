#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sgdlab/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"simulation and verification laboratory for random rank-one "
                 "operator iterations in truncated Hilbert space"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    int replicas = 0;
    long long steps = 0;

    CLI::App* run = app.add_subcommand("run", "run an experiment described by a config file");
    run->add_option("config", config_path, "key = value experiment config")->required();
    CLI::Option* seed_opt = run->add_option("--seed", seed, "override the seed");
    CLI::Option* out_opt = run->add_option("--out", out_dir, "override the output directory");
    CLI::Option* replicas_opt = run->add_option("--replicas", replicas, "override n_replicas");
    CLI::Option* steps_opt = run->add_option("--steps", steps, "override n_steps");

    std::string csv_path;
    std::string plot_out;
    double beta_filter = 0.0;
    CLI::App* plot = app.add_subcommand("plotdata", "log10 plot columns from a results CSV");
    plot->add_option("csv", csv_path, "results CSV produced by run")->required();
    CLI::Option* beta_opt = plot->add_option("--beta", beta_filter, "select a beta series");
    CLI::Option* plot_out_opt = plot->add_option("--out", plot_out, "output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (run->parsed()) {
        sgdlab::CliOverrides overrides;
        if (seed_opt->count() > 0) overrides.seed = seed;
        if (out_opt->count() > 0) overrides.out_dir = out_dir;
        if (replicas_opt->count() > 0) overrides.replicas = replicas;
        if (steps_opt->count() > 0) overrides.steps = steps;

        try {
            const auto config = sgdlab::ExperimentConfig::from_file(config_path, overrides);
            const auto outcome = sgdlab::run_experiment(config);
            if (outcome.exit_code == 0) {
                std::cout << "ok: " << outcome.csv_path.string() << "\n";
            } else {
                std::cerr << "failed: " << outcome.message << "\n";
            }
            return outcome.exit_code;
        } catch (const sgdlab::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }

    std::string error;
    std::optional<double> beta;
    if (beta_opt->count() > 0) beta = beta_filter;
    std::optional<std::filesystem::path> target;
    if (plot_out_opt->count() > 0) target = plot_out;
    const int code = sgdlab::emit_plotdata(csv_path, beta, target, error);
    if (code != 0) std::cerr << "plotdata error: " << error << "\n";
    return code;
}
