#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgdlab/hilbert.hpp"
#include "sgdlab/rng.hpp"
#include "sgdlab/spectrum.hpp"

namespace sgdlab {

// gff:        independent Gaussian coordinates with variance lambda_i
// gamma-sym:  x_i = s_i * sqrt(y_i), y_i ~ Gamma(lambda_i, 1), s_i a fair
//             independent sign, so E[x_i^2] = lambda_i and
//             E[x_i^4] = lambda_i (1 + lambda_i)
// coordinate-bounded: a single coordinate I ~ lambda_I / trace scaled so that
//             every draw has squared norm exactly equal to the trace
enum class SamplerKind { kGff, kGammaSymmetric, kCoordinateBounded };

std::string to_string(SamplerKind kind);
std::optional<SamplerKind> parse_sampler_kind(const std::string& name);

struct SamplerSpec {
    SamplerKind kind = SamplerKind::kGff;
    Spectrum spectrum;
    std::uint64_t seed = 0;
};

// Per-draw machinery with precomputed tables; immutable after construction
// and shared freely across worker threads.
class Sampler {
public:
    explicit Sampler(const SamplerSpec& spec);

    const Spectrum& spectrum() const { return spec_.spectrum; }
    SamplerKind kind() const { return spec_.kind; }
    std::size_t dim() const { return spec_.spectrum.dim(); }

    void draw(RngStream& rng, HilbertVector& out) const;
    HilbertVector draw(RngStream& rng) const;

    // single-coordinate fast path for the bounded sampler
    bool single_coordinate() const { return spec_.kind == SamplerKind::kCoordinateBounded; }
    std::size_t draw_index(RngStream& rng) const { return rng.pick_index(cdf_); }
    double coordinate_value() const { return sqrt_trace_; }
    double norm_sq_constant() const { return trace_; }

private:
    SamplerSpec spec_;
    std::vector<double> sqrt_lambda_;
    std::vector<double> cdf_;
    double trace_ = 0.0;
    double sqrt_trace_ = 0.0;
};

HilbertVector sample(const SamplerSpec& spec, RngStream& rng);

struct MomentReport {
    std::vector<double> mean_sq;     // per-coordinate estimate of E[x_i^2]
    std::vector<double> mean_sq_se;
    double cross_corr = 0.0;         // max |mean x_i x_j| over probed pairs
    double cross_corr_se = 0.0;
    double m2 = 0.0, m2_se = 0.0;    // E[|x|^2]
    double m4 = 0.0, m4_se = 0.0;    // E[|x|^4]
    double delta = 0.0;              // inf over unit z of E[<z,x>^2] = min lambda
    long long n_samples = 0;
};

MomentReport moment_report(const SamplerSpec& spec, long long n_samples);

struct ProbeRatio {
    double mc_ratio = 0.0;
    double se = 0.0;
    double denom = 0.0;                 // phi_{beta-1}(probe)
    std::optional<double> analytic;     // closed-form per-probe ratio when known
    // effective sample size n mean^2 / E[v^2]; deep coordinates of a fast
    // decaying spectrum are rare-event estimators and need ess to be large
    // before their standard error means anything
    double ess = 0.0;
    bool skipped = false;
};

struct CrossMomentResult {
    double sup_ratio = 0.0;
    double sup_se = 0.0;
    std::size_t sup_probe = 0;
    std::optional<double> analytic_constant;  // trace + 1 form for gamma-sym, trace for bounded
    std::vector<ProbeRatio> probes;
    int skipped = 0;
};

// Empirical supremum over probes of E[<theta,x>^2 phi_beta(x)] / phi_{beta-1}(theta),
// the smallest constant that bounds the cross moment. For gamma-sym the
// analytic constant is K_beta + 1; for the bounded sampler every probe gives
// exactly the trace.
CrossMomentResult estimate_cross_moment_constant(const SamplerSpec& spec, double beta,
                                                 std::span<const HilbertVector> probes,
                                                 long long n_samples);

// all basis vectors plus `n_random` power-law-profiled random unit vectors
std::vector<HilbertVector> default_probe_set(const Spectrum& spectrum, std::size_t n_random,
                                             std::uint64_t seed);

}  // namespace sgdlab
