#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sgdlab/dynamics.hpp"
#include "sgdlab/hilbert.hpp"
#include "sgdlab/sampler.hpp"
#include "sgdlab/spectrum.hpp"

namespace sgdlab {

struct FitWindow {
    double n_min = 0.0;
    double n_max = 0.0;
};

struct RateEstimate {
    double exponent = 0.0;   // slope of log value against log n
    double stderr_ = 0.0;
    double intercept = 0.0;
    double n_min = 0.0, n_max = 0.0;
    int points_used = 0;
};

// ordinary least squares on (log n, log value) restricted to the window
RateEstimate fit_decay_rate(std::span<const long long> ns, std::span<const double> values,
                            FitWindow window);

struct BoundCheck {
    std::string name;
    long long points = 0;
    long long violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();  // min(bound - value)
};

// Gamma function for z > 0, Lanczos approximation (g = 7, 9 terms)
double gamma_function(double z);

// bound exp(kappa - beta) ((beta-kappa)/(2 n gamma))^(beta-kappa) phi_beta(theta0)
// dominating phi_kappa of the mean iterate at step n, for 0 <= kappa < beta
double mean_iterate_upper_bound(const HilbertVector& theta0, const Spectrum& spec,
                                double gamma, double beta, double kappa, long long n);

// the bound above on a step grid, plus phi_kappa(T^n theta0) <= phi_kappa(theta0)
BoundCheck mean_iterate_bound_check(const HilbertVector& theta0, const Spectrum& spec,
                                    double gamma, double beta, double kappa,
                                    std::span<const long long> grid);

enum class SlowSequence { kPower, kLogPower };  // n^eps or (log n)^(1+eps)

struct GrowthVerdict {
    bool unbounded = false;
    double last_decade_ratio = 0.0;  // u(n_max) / u(n_max/10)
    std::vector<long long> ns;
    std::vector<double> u;
};

// u(n) = n^(beta-kappa) t_n phi_kappa(T^n theta0); growth by a factor >= 2
// over the last decade reads as "unbounded"
GrowthVerdict lower_bound_probe(const HilbertVector& theta0, const Spectrum& spec,
                                double gamma, double beta, double kappa,
                                SlowSequence t_choice, double eps, long long n_max);

struct PeakCheck {
    BoundCheck check;
    double lambda_star = 0.0;
    double f_star = 0.0;
    double lower = 0.0, upper = 0.0;
    double grid_gap = 0.0;  // |grid argmax - lambda_star|
};

// f(x) = |1-x|^m x^tau peaks at tau/(m+tau) with
// exp(-tau e/(e-1)) (tau/m)^tau <= f(peak) <= exp(-tau) (tau/m)^tau
PeakCheck decay_factor_peak_check(double m, double tau, long long grid_size);

// upper inequality extended to [0, 2-eps] for large m
BoundCheck decay_factor_range_check(double m, double tau, double eps, long long grid_size);

// sum over n >= 1 of (1-mu)^n (n mu)^kappa / n, truncated with a certified
// geometric tail below 1e-12 of the total
double decay_series(double mu, double kappa, long long n_terms);
double series_gamma_ratio(double mu, double kappa, long long n_terms);

struct SeriesEnvelope {
    double min_ratio = std::numeric_limits<double>::infinity();
    double max_ratio = 0.0;
    BoundCheck check;
};

// ratio of the series to Gamma(kappa) over a (mu, kappa) grid; a uniform
// envelope bounded away from 0 and infinity must exist
SeriesEnvelope series_gamma_envelope(std::span<const double> mu_grid,
                                     std::span<const double> kappa_grid, long long n_terms);

// iterates c_{n+1} = c_n - K c_n^(1+w) against c_0 (1 + n w K c_0^w)^(-1/w)
BoundCheck recursion_decay_check(double c0, double w, double scale_k, long long n_max);

struct HolderTriple {
    double beta = 0.0, kappa = 0.0, alpha = 0.0;  // beta < kappa < alpha
};

// phi_kappa <= phi_beta^p phi_alpha^(1-p) with p = (alpha-kappa)/(alpha-beta),
// and the rearranged lower-bound form, over random sign/power-law vectors
BoundCheck holder_check(const Spectrum& spec, long long n_random,
                        std::span<const HolderTriple> triples, std::uint64_t seed);

struct MomentChain {
    BoundCheck check;
    double m2 = 0.0, m2_se = 0.0;
    double m4 = 0.0, m4_se = 0.0;
    double c0 = 0.0, c0_se = 0.0;
    bool c0_analytic = false;
};

// E[|x|^2]^2 <= E[|x|^4] <= C0 E[|x|^2] <= C0^2 with 3 standard errors of
// slack per link
MomentChain moment_chain_check(const SamplerSpec& spec, long long n_samples);

struct SgdRateReport {
    RateEstimate rate;
    bool rate_ok = false;
    double required_exponent = 0.0;
    BoundCheck jensen;  // E[|theta(n)|^2] >= |T^n theta0|^2 within 4 SE
};

// fits the decay of the recorded E[|theta(n)|^2] and checks it reaches the
// target polynomial order up to the slack, plus the mean-iterate lower bound
SgdRateReport sgd_rate_report(const EnsembleStats& stats, const Spectrum& spec,
                              const HilbertVector& theta0, double beta_target,
                              FitWindow window, double slack = 0.15);

}  // namespace sgdlab
