#include "sgdlab/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "sgdlab/numeric.hpp"

namespace sgdlab {

std::string to_string(SamplerKind kind) {
    switch (kind) {
        case SamplerKind::kGff: return "gff";
        case SamplerKind::kGammaSymmetric: return "gamma-sym";
        case SamplerKind::kCoordinateBounded: return "coordinate-bounded";
    }
    return "unknown";
}

std::optional<SamplerKind> parse_sampler_kind(const std::string& name) {
    if (name == "gff") return SamplerKind::kGff;
    if (name == "gamma-sym") return SamplerKind::kGammaSymmetric;
    if (name == "coordinate-bounded") return SamplerKind::kCoordinateBounded;
    return std::nullopt;
}

Sampler::Sampler(const SamplerSpec& spec) : spec_(spec) {
    const std::size_t d = spec_.spectrum.dim();
    sqrt_lambda_.resize(d);
    for (std::size_t i = 0; i < d; ++i) sqrt_lambda_[i] = std::sqrt(spec_.spectrum[i]);
    trace_ = spec_.spectrum.trace();
    sqrt_trace_ = std::sqrt(trace_);
    cdf_.resize(d);
    CompensatedSum acc;
    for (std::size_t i = 0; i < d; ++i) {
        acc.add(spec_.spectrum[i] / trace_);
        cdf_[i] = acc.value();
    }
    cdf_.back() = 1.0;
}

void Sampler::draw(RngStream& rng, HilbertVector& out) const {
    const std::size_t d = dim();
    out.resize(d);
    switch (spec_.kind) {
        case SamplerKind::kGff:
            for (std::size_t i = 0; i < d; ++i) out[i] = sqrt_lambda_[i] * rng.gaussian();
            break;
        case SamplerKind::kGammaSymmetric:
            for (std::size_t i = 0; i < d; ++i) {
                const double y = rng.gamma_small_shape(spec_.spectrum[i]);
                const double sign = (rng.next_u64() & 1u) ? 1.0 : -1.0;
                out[i] = sign * std::sqrt(y);
            }
            break;
        case SamplerKind::kCoordinateBounded: {
            std::fill(out.begin(), out.end(), 0.0);
            out[draw_index(rng)] = sqrt_trace_;
            break;
        }
    }
}

HilbertVector Sampler::draw(RngStream& rng) const {
    HilbertVector out;
    draw(rng, out);
    return out;
}

HilbertVector sample(const SamplerSpec& spec, RngStream& rng) {
    return Sampler(spec).draw(rng);
}

MomentReport moment_report(const SamplerSpec& spec, long long n_samples) {
    if (n_samples < 100) throw std::invalid_argument("moment_report: need n_samples >= 100");
    const Sampler sampler(spec);
    const std::size_t d = sampler.dim();

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i + 1 < d; ++i) pairs.emplace_back(i, i + 1);
    if (d >= 3) pairs.emplace_back(0, d / 2);

    std::vector<RunningStat> sq(d), cross(pairs.size());
    RunningStat m2, m4;

    RngStream rng(spec.seed, 0);
    HilbertVector x;
    for (long long n = 0; n < n_samples; ++n) {
        sampler.draw(rng, x);
        CompensatedSum norm;
        for (std::size_t i = 0; i < d; ++i) {
            sq[i].add(x[i] * x[i]);
            norm.add(x[i] * x[i]);
        }
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            cross[k].add(x[pairs[k].first] * x[pairs[k].second]);
        }
        const double nsq = norm.value();
        m2.add(nsq);
        m4.add(nsq * nsq);
    }

    MomentReport report;
    report.n_samples = n_samples;
    report.mean_sq.resize(d);
    report.mean_sq_se.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        report.mean_sq[i] = sq[i].mean();
        report.mean_sq_se[i] = sq[i].stderr_of_mean();
    }
    for (const auto& stat : cross) {
        if (std::abs(stat.mean()) >= report.cross_corr) {
            report.cross_corr = std::abs(stat.mean());
            report.cross_corr_se = stat.stderr_of_mean();
        }
    }
    report.m2 = m2.mean();
    report.m2_se = m2.stderr_of_mean();
    report.m4 = m4.mean();
    report.m4_se = m4.stderr_of_mean();
    report.delta = sampler.spectrum().min_eigenvalue();
    return report;
}

CrossMomentResult estimate_cross_moment_constant(const SamplerSpec& spec, double beta,
                                                 std::span<const HilbertVector> probes,
                                                 long long n_samples) {
    if (probes.empty()) throw std::invalid_argument("cross_moment: need at least one probe");
    const Sampler sampler(spec);
    const Spectrum& spectrum = sampler.spectrum();
    const std::size_t d = sampler.dim();

    std::vector<double> denom(probes.size());
    std::vector<bool> usable(probes.size());
    int skipped = 0;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        denom[k] = phi_norm(probes[k], spectrum, beta - 1.0);
        usable[k] = denom[k] > 0.0 && std::isfinite(denom[k]);
        if (!usable[k]) ++skipped;
    }
    if (skipped == static_cast<int>(probes.size())) {
        throw std::runtime_error("cross_moment: every probe has degenerate phi_{beta-1}");
    }

    std::vector<double> weight(d);
    for (std::size_t i = 0; i < d; ++i) weight[i] = std::pow(spectrum[i], -beta);

    std::vector<RunningStat> stats(probes.size());
    RngStream rng(spec.seed, 1);
    HilbertVector x;
    for (long long n = 0; n < n_samples; ++n) {
        sampler.draw(rng, x);
        CompensatedSum phix;
        for (std::size_t i = 0; i < d; ++i) {
            if (x[i] != 0.0) phix.add(weight[i] * x[i] * x[i]);
        }
        const double phi_beta_x = phix.value();
        for (std::size_t k = 0; k < probes.size(); ++k) {
            if (!usable[k]) continue;
            const double dot = inner_product(probes[k], x);
            stats[k].add(dot * dot * phi_beta_x);
        }
    }

    const double k_beta = spectrum.k_beta(beta);
    CrossMomentResult result;
    result.skipped = skipped;
    result.probes.resize(probes.size());
    for (std::size_t k = 0; k < probes.size(); ++k) {
        ProbeRatio& pr = result.probes[k];
        pr.denom = denom[k];
        pr.skipped = !usable[k];
        if (pr.skipped) continue;
        pr.mc_ratio = stats[k].mean() / denom[k];
        pr.se = stats[k].stderr_of_mean() / denom[k];
        const double second = stats[k].second_moment();
        pr.ess = second > 0.0 ? static_cast<double>(n_samples) * stats[k].mean() *
                                    stats[k].mean() / second
                              : 0.0;
        switch (spec.kind) {
            case SamplerKind::kGammaSymmetric:
                pr.analytic = k_beta * phi_norm(probes[k], spectrum, -1.0) / denom[k] + 1.0;
                break;
            case SamplerKind::kCoordinateBounded:
                pr.analytic = sampler.norm_sq_constant();
                break;
            case SamplerKind::kGff: {
                CompensatedSum extra;
                for (std::size_t i = 0; i < d; ++i) {
                    extra.add(std::pow(spectrum[i], 2.0 - beta) * probes[k][i] * probes[k][i]);
                }
                pr.analytic = (k_beta * phi_norm(probes[k], spectrum, -1.0) +
                               2.0 * extra.value()) / denom[k];
                break;
            }
        }
        if (pr.mc_ratio >= result.sup_ratio) {
            result.sup_ratio = pr.mc_ratio;
            result.sup_se = pr.se;
            result.sup_probe = k;
        }
    }
    if (spec.kind == SamplerKind::kGammaSymmetric) {
        result.analytic_constant = k_beta + 1.0;
    } else if (spec.kind == SamplerKind::kCoordinateBounded) {
        result.analytic_constant = sampler.norm_sq_constant();
    }
    return result;
}

std::vector<HilbertVector> default_probe_set(const Spectrum& spectrum, std::size_t n_random,
                                             std::uint64_t seed) {
    const std::size_t d = spectrum.dim();
    std::vector<HilbertVector> probes;
    probes.reserve(d + n_random);
    for (std::size_t i = 0; i < d; ++i) {
        HilbertVector e(d, 0.0);
        e[i] = 1.0;
        probes.push_back(std::move(e));
    }
    RngStream rng(seed, 0x70b5);
    for (std::size_t k = 0; k < n_random; ++k) {
        const double decay = 0.6 + 1.9 * rng.uniform();
        HilbertVector v(d);
        for (std::size_t i = 0; i < d; ++i) {
            const double sign = (rng.next_u64() & 1u) ? 1.0 : -1.0;
            v[i] = sign * std::pow(static_cast<double>(i + 1), -decay);
        }
        const double norm = std::sqrt(squared_norm(v));
        for (double& c : v) c /= norm;
        probes.push_back(std::move(v));
    }
    return probes;
}

}  // namespace sgdlab
