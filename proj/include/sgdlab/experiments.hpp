#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sgdlab/analysis.hpp"
#include "sgdlab/config.hpp"
#include "sgdlab/dynamics.hpp"

namespace sgdlab {

inline constexpr const char* kArtifactVersion = "0.1.0";

// closed registry; adding an experiment is a code change
enum class ExperimentKind {
    kMeanRate,       // "mean-rate"
    kSgdRate,        // "sgd-rate"
    kRecursion,      // "recursion"
    kLemmas,         // "lemmas"
    kAsConvergence,  // "as-convergence"
    kCrossMoment,    // "assumption3"
};

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment(const std::string& tag);

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> replicas;
    std::optional<long long> steps;
};

// Fully resolved experiment parameters. Defaults depend on the experiment;
// file keys override defaults and CLI flags override file keys.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::kLemmas;
    std::uint64_t seed = 20240805;
    std::filesystem::path out_dir;

    // [spectrum]
    std::string family = "power-law";
    double c = 0.4;
    double p = 2.0;
    double geo_ratio = 0.5;
    long long dim = 100;
    std::vector<double> values;

    // [theta0]
    double s = 2.0;
    bool normalize = true;

    // [run]
    SamplerKind sampler_kind = SamplerKind::kGff;
    std::optional<double> gamma;
    std::optional<double> gamma_bound_fraction;
    bool gamma_from_c_beta = false;  // gamma = 1 / (K_beta_target + 1)
    long long n_steps = 10000;
    int n_replicas = 1;
    std::vector<double> betas;
    double record_ratio = 1.2;
    std::optional<std::vector<long long>> record_steps;
    long long n_samples = 100000;
    double beta = 0.0;         // recursion / assumption3 target
    double beta_target = 1.0;  // sgd-rate
    FitWindow window{100.0, 10000.0};
    double slack = 0.15;
    std::optional<double> expected_exponent;
    double exponent_tol = 0.15;
    double final_ratio_max = 1e-3;
    int threads = 0;

    static ExperimentConfig from_file(const std::filesystem::path& path,
                                      const CliOverrides& overrides);
    static ExperimentConfig from_config(const KeyValueConfig& raw, const CliOverrides& overrides);

    void validate() const;  // throws ConfigError naming the violated precondition
    Spectrum build_spectrum() const;
    HilbertVector build_theta0(const Spectrum& spectrum) const;
    double resolve_gamma(const Spectrum& spectrum) const;
};

struct RunOutcome {
    int exit_code = 0;  // 0 ok, 1 assertion/divergence, 2 validation
    std::string message;
    std::filesystem::path csv_path;
    std::filesystem::path manifest_path;
};

RunOutcome run_experiment(const ExperimentConfig& config);

// log10-transformed plot columns from a results CSV; returns 0/2 like the CLI
int emit_plotdata(const std::filesystem::path& csv_path, std::optional<double> beta_filter,
                  const std::optional<std::filesystem::path>& out_path, std::string& error);

std::string format_g17(double v);

}  // namespace sgdlab
