#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sgdlab/hilbert.hpp"
#include "sgdlab/sampler.hpp"

namespace sgdlab {

// Recording grid for trajectory functionals: strictly increasing, always
// containing 0 and the final step.
struct RecordSchedule {
    std::vector<long long> steps;

    static RecordSchedule geometric(long long n_steps, double ratio = 1.2);
    static RecordSchedule from_steps(std::vector<long long> steps, long long n_steps);
};

struct IterationConfig {
    SamplerSpec sampler;
    HilbertVector theta0;
    double gamma = 0.0;
    // Step size expressed as a fraction of the stability boundary 2/trace.
    // For the single-coordinate sampler the per-hit factor becomes
    // 1 - 2*fraction with no rounding, which keeps the boundary case exact.
    std::optional<double> gamma_bound_fraction;
    long long n_steps = 1;
    int n_replicas = 1;
    std::vector<double> record_betas;
    RecordSchedule schedule;
    bool record_coefficients = true;
    bool track_monotone = true;
    double divergence_threshold = 1e150;
    int max_threads = 0;  // 0 = hardware concurrency

    double resolved_gamma() const;
};

struct TrajectoryRecord {
    std::vector<long long> steps;             // prefix of the schedule actually reached
    std::vector<std::vector<double>> phi;     // [beta][record]
    std::vector<HilbertVector> coefficients;  // [record], when requested
    double final_sq_norm = 0.0;
    bool norm_nonincreasing = true;
    bool diverged = false;
    long long diverged_at = -1;
};

// One replica of theta(n+1) = theta(n) - gamma <theta(n), x(n)> x(n), recording
// phi_beta at scheduled steps without materializing the history.
TrajectoryRecord sgd_trajectory(const IterationConfig& config, int replica);

// closed-form mean dynamics: coefficients (1 - gamma lambda_i)^n theta_i
HilbertVector mean_iterate(const HilbertVector& theta0, const Spectrum& spec, double gamma,
                           long long n);

struct EnsembleStats {
    std::vector<long long> steps;
    std::vector<double> betas;
    std::vector<std::vector<double>> phi_mean;  // [beta][record]
    std::vector<std::vector<double>> phi_se;
    // paired per-replica differences between consecutive records, for
    // monotonicity-in-expectation checks
    std::vector<std::vector<double>> phi_diff_mean;  // [beta][record-1]
    std::vector<std::vector<double>> phi_diff_se;
    std::vector<long long> replicas_used;  // per record
    std::vector<HilbertVector> coeff_mean;  // [record][i]
    std::vector<HilbertVector> coeff_se;
    // replicas whose coordinate left its starting value; rare-event samplers
    // leave deep coordinates untouched for a long time, and the empirical
    // standard error says nothing there
    std::vector<std::vector<long long>> coeff_moved;  // [record][i]
    std::vector<unsigned char> monotone;   // per replica
    std::vector<double> final_sq_norm;     // per replica
    std::vector<int> diverged_replicas;
    int n_replicas = 0;
    double gamma = 0.0;
};

// Runs the replicas (possibly concurrently; replica k always uses stream k of
// the seed) and reduces in ascending replica order, so the output is
// bit-identical for a given config.
EnsembleStats ensemble(const IterationConfig& config);

struct RecursionCheck {
    double lhs = 0.0, lhs_se = 0.0;
    double rhs = 0.0, rhs_se = 0.0;
    double third_term = 0.0, third_se = 0.0;
    double se_units = 0.0;   // |lhs - rhs| in combined standard errors
    double rel_error = 0.0;  // |lhs - rhs| / max(|lhs|, |rhs|)
    bool exact = false;      // atoms enumerated instead of sampled
};

// Checks E[phi_beta(T_x theta)] = phi_beta(theta) - 2 gamma phi_{beta-1}(theta)
//        + gamma^2 E[<theta,x>^2 phi_beta(x)]
// with independent sample streams for the two sides; the single-coordinate
// sampler is enumerated exactly.
RecursionCheck recursion_check(const HilbertVector& theta, const SamplerSpec& spec,
                               double gamma, double beta, long long n_samples);

struct MartingaleStats {
    std::vector<long long> steps;
    std::vector<double> mean;
    std::vector<double> se;
    std::vector<long long> count;  // replicas where the value was defined
};

// Records M_n = <theta_n/|theta_n|, x_{n+1}>^2 - h(theta_n/|theta_n|) with
// h(z) = sum lambda_i z_i^2 at scheduled steps; M_n has zero conditional mean.
MartingaleStats martingale_diagnostic(const IterationConfig& config);

struct MeanEvolutionCheck {
    long long violations = 0;
    double worst_z = 0.0;  // largest |deviation| / se over coords and records
    long long compared = 0;
    long long unresolved = 0;  // pairs with too few moved replicas to score
};

// Ensemble mean of theta(n) versus the deterministic mean dynamics, coordinate
// by coordinate, within n_se standard errors. Pairs where fewer than 30
// replicas have moved are reported as unresolved instead of scored.
MeanEvolutionCheck mean_evolution_check(const EnsembleStats& stats, const Spectrum& spec,
                                        const HilbertVector& theta0, double n_se);

}  // namespace sgdlab
