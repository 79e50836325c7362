#include "sgdlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sgdlab/numeric.hpp"

namespace sgdlab {

namespace {

constexpr double kRelSlack = 1e-12;  // absorbs rounding in exact inequalities

void note_margin(BoundCheck& check, double bound, double value) {
    ++check.points;
    check.worst_margin = std::min(check.worst_margin, bound - value);
    if (value > bound + kRelSlack * std::max(std::abs(bound), std::abs(value))) {
        ++check.violations;
    }
}

std::vector<long long> geometric_grid(long long lo, long long hi, double ratio) {
    std::vector<long long> grid;
    for (double v = static_cast<double>(lo); v < static_cast<double>(hi); v *= ratio) {
        const long long s = static_cast<long long>(std::ceil(v));
        if (grid.empty() || s > grid.back()) grid.push_back(s);
    }
    if (grid.empty() || grid.back() != hi) grid.push_back(hi);
    return grid;
}

double slow_sequence(SlowSequence choice, double eps, double n) {
    return choice == SlowSequence::kPower ? std::pow(n, eps)
                                          : std::pow(std::log(n), 1.0 + eps);
}

}  // namespace

RateEstimate fit_decay_rate(std::span<const long long> ns, std::span<const double> values,
                            FitWindow window) {
    if (ns.size() != values.size()) {
        throw std::invalid_argument("fit_decay_rate: series length mismatch");
    }
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        const double n = static_cast<double>(ns[k]);
        if (n < window.n_min || n > window.n_max) continue;
        if (!(n > 0.0)) throw std::invalid_argument("fit_decay_rate: steps must be positive");
        if (!(values[k] > 0.0)) {
            throw std::invalid_argument("fit_decay_rate: nonpositive value in window");
        }
        xs.push_back(std::log(n));
        ys.push_back(std::log(values[k]));
    }
    const int k = static_cast<int>(xs.size());
    if (k < 3) throw std::invalid_argument("fit_decay_rate: need at least 3 points in window");

    CompensatedSum sx, sy;
    for (int i = 0; i < k; ++i) {
        sx.add(xs[i]);
        sy.add(ys[i]);
    }
    const double mx = sx.value() / k;
    const double my = sy.value() / k;
    CompensatedSum sxx, sxy;
    for (int i = 0; i < k; ++i) {
        sxx.add((xs[i] - mx) * (xs[i] - mx));
        sxy.add((xs[i] - mx) * (ys[i] - my));
    }
    if (!(sxx.value() > 0.0)) {
        throw std::invalid_argument("fit_decay_rate: need at least 3 distinct steps");
    }
    RateEstimate est;
    est.exponent = sxy.value() / sxx.value();
    est.intercept = my - est.exponent * mx;
    CompensatedSum rss;
    for (int i = 0; i < k; ++i) {
        const double r = ys[i] - est.intercept - est.exponent * xs[i];
        rss.add(r * r);
    }
    est.stderr_ = k > 2 ? std::sqrt(rss.value() / (k - 2) / sxx.value()) : 0.0;
    est.n_min = window.n_min;
    est.n_max = window.n_max;
    est.points_used = k;
    return est;
}

double gamma_function(double z) {
    if (!(z > 0.0)) throw std::domain_error("gamma_function: z must be > 0");
    if (z < 0.5) return gamma_function(z + 1.0) / z;
    static const double coef[9] = {
        0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
        771.32342877765313,      -176.61502916214059,   12.507343278686905,
        -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
    const double x = z - 1.0;
    double a = coef[0];
    for (int i = 1; i < 9; ++i) a += coef[i] / (x + i);
    const double t = x + 7.5;
    return 2.5066282746310002 * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

double mean_iterate_upper_bound(const HilbertVector& theta0, const Spectrum& spec,
                                double gamma, double beta, double kappa, long long n) {
    if (!(kappa >= 0.0) || !(kappa < beta)) {
        throw std::invalid_argument("mean_iterate_upper_bound: need 0 <= kappa < beta");
    }
    if (!(gamma > 0.0)) throw std::invalid_argument("mean_iterate_upper_bound: gamma must be > 0");
    if (n < 1) throw std::invalid_argument("mean_iterate_upper_bound: n must be >= 1");
    const double tau = beta - kappa;
    return std::exp(-tau) * std::pow(tau / (2.0 * static_cast<double>(n) * gamma), tau) *
           phi_norm(theta0, spec, beta);
}

BoundCheck mean_iterate_bound_check(const HilbertVector& theta0, const Spectrum& spec,
                                    double gamma, double beta, double kappa,
                                    std::span<const long long> grid) {
    BoundCheck check;
    check.name = "mean-iterate-upper-bound";
    const double phi_kappa_0 = phi_norm(theta0, spec, kappa);
    for (long long n : grid) {
        const double value = phi_norm(mean_iterate(theta0, spec, gamma, n), spec, kappa);
        note_margin(check, mean_iterate_upper_bound(theta0, spec, gamma, beta, kappa, n), value);
        note_margin(check, phi_kappa_0, value);
    }
    return check;
}

GrowthVerdict lower_bound_probe(const HilbertVector& theta0, const Spectrum& spec,
                                double gamma, double beta, double kappa,
                                SlowSequence t_choice, double eps, long long n_max) {
    if (!(kappa < beta)) throw std::invalid_argument("lower_bound_probe: need kappa < beta");
    if (n_max < 100) throw std::invalid_argument("lower_bound_probe: n_max too small");
    const long long start = t_choice == SlowSequence::kLogPower ? 2 : 1;

    const auto u_at = [&](long long n) {
        const double nn = static_cast<double>(n);
        return std::pow(nn, beta - kappa) * slow_sequence(t_choice, eps, nn) *
               phi_norm(mean_iterate(theta0, spec, gamma, n), spec, kappa);
    };

    GrowthVerdict verdict;
    for (long long n : geometric_grid(start, n_max, 1.2)) {
        verdict.ns.push_back(n);
        verdict.u.push_back(u_at(n));
    }
    const double u_end = u_at(n_max);
    const double u_dec = u_at(n_max / 10);
    verdict.last_decade_ratio = u_dec > 0.0 ? u_end / u_dec : 0.0;
    verdict.unbounded = u_dec > 0.0 && u_end / u_dec >= 2.0;
    return verdict;
}

namespace {

double decay_factor(double lambda, double m, double tau) {
    return std::pow(std::abs(1.0 - lambda), m) * std::pow(lambda, tau);
}

}  // namespace

PeakCheck decay_factor_peak_check(double m, double tau, long long grid_size) {
    if (!(m > 0.0) || !(tau > 0.0)) {
        throw std::invalid_argument("decay_factor_peak_check: m and tau must be > 0");
    }
    if (grid_size < 3) throw std::invalid_argument("decay_factor_peak_check: grid too small");
    PeakCheck peak;
    peak.check.name = "decay-factor-peak";
    peak.lambda_star = tau / (m + tau);
    peak.f_star = decay_factor(peak.lambda_star, m, tau);
    peak.lower = std::exp(-tau * 2.7182818284590452354 / 1.7182818284590452354) *
                 std::pow(tau / m, tau);
    peak.upper = std::exp(-tau) * std::pow(tau / m, tau);

    const double h = 1.0 / static_cast<double>(grid_size + 1);
    double best = -1.0, best_lambda = 0.0;
    for (long long j = 1; j <= grid_size; ++j) {
        const double lambda = h * static_cast<double>(j);
        const double f = decay_factor(lambda, m, tau);
        ++peak.check.points;
        if (f > best) {
            best = f;
            best_lambda = lambda;
        }
    }
    peak.grid_gap = std::abs(best_lambda - peak.lambda_star);
    if (peak.grid_gap > h * (1.0 + kRelSlack)) ++peak.check.violations;
    note_margin(peak.check, peak.upper, peak.f_star);
    note_margin(peak.check, peak.f_star, peak.lower);
    return peak;
}

BoundCheck decay_factor_range_check(double m, double tau, double eps, long long grid_size) {
    if (!(eps > 0.0) || !(eps <= 2.0)) {
        throw std::invalid_argument("decay_factor_range_check: need eps in (0, 2]");
    }
    BoundCheck check;
    check.name = "decay-factor-range";
    const double upper = std::exp(-tau) * std::pow(tau / m, tau);
    const double hi = 2.0 - eps;
    for (long long j = 0; j <= grid_size; ++j) {
        const double lambda = hi * static_cast<double>(j) / static_cast<double>(grid_size);
        note_margin(check, upper, decay_factor(lambda, m, tau));
    }
    return check;
}

double decay_series(double mu, double kappa, long long n_terms) {
    if (!(mu > 0.0) || !(mu < 0.5)) throw std::invalid_argument("decay_series: mu in (0, 1/2)");
    if (!(kappa > 0.0)) throw std::invalid_argument("decay_series: kappa must be > 0");
    const double q = 1.0 - mu;
    CompensatedSum acc;
    double q_pow = 1.0;
    double last_term = 0.0;
    for (long long n = 1; n <= n_terms; ++n) {
        q_pow *= q;
        last_term = q_pow * std::pow(static_cast<double>(n) * mu, kappa) /
                    static_cast<double>(n);
        acc.add(last_term);
    }
    // geometric tail certificate
    const double growth = q * std::exp(std::max(kappa - 1.0, 0.0) / static_cast<double>(n_terms));
    if (!(growth < 1.0)) throw std::runtime_error("decay_series: increase n_terms");
    const double tail = last_term * growth / (1.0 - growth);
    if (!(tail <= 1e-12 * acc.value())) {
        throw std::runtime_error("decay_series: truncated tail above 1e-12, increase n_terms");
    }
    return acc.value();
}

double series_gamma_ratio(double mu, double kappa, long long n_terms) {
    return decay_series(mu, kappa, n_terms) / gamma_function(kappa);
}

SeriesEnvelope series_gamma_envelope(std::span<const double> mu_grid,
                                     std::span<const double> kappa_grid, long long n_terms) {
    SeriesEnvelope env;
    env.check.name = "series-gamma-envelope";
    for (double kappa : kappa_grid) {
        for (double mu : mu_grid) {
            const double ratio = series_gamma_ratio(mu, kappa, n_terms);
            ++env.check.points;
            if (!std::isfinite(ratio) || !(ratio > 0.0)) ++env.check.violations;
            env.min_ratio = std::min(env.min_ratio, ratio);
            env.max_ratio = std::max(env.max_ratio, ratio);
        }
    }
    env.check.worst_margin = env.min_ratio;
    return env;
}

BoundCheck recursion_decay_check(double c0, double w, double scale_k, long long n_max) {
    if (!(c0 > 0.0) || !(c0 < 1.0)) {
        throw std::invalid_argument("recursion_decay_check: c0 must lie in (0,1)");
    }
    if (!(w > 0.0) || !(scale_k > 0.0)) {
        throw std::invalid_argument("recursion_decay_check: w and scale must be > 0");
    }
    if (!(scale_k * std::pow(c0, w) < 1.0)) {
        throw std::invalid_argument("recursion_decay_check: scale too large for c0");
    }
    BoundCheck check;
    check.name = "recursion-decay";
    const double c0_w = std::pow(c0, w);
    double c = c0;
    for (long long n = 0; n <= n_max; ++n) {
        const double bound =
            c0 * std::pow(1.0 + static_cast<double>(n) * w * scale_k * c0_w, -1.0 / w);
        note_margin(check, bound, c);
        c -= scale_k * c * std::pow(c, w);
    }
    return check;
}

BoundCheck holder_check(const Spectrum& spec, long long n_random,
                        std::span<const HolderTriple> triples, std::uint64_t seed) {
    for (const auto& t : triples) {
        if (!(t.beta < t.kappa) || !(t.kappa < t.alpha)) {
            throw std::invalid_argument("holder_check: need beta < kappa < alpha");
        }
    }
    BoundCheck check;
    check.name = "holder-interpolation";
    RngStream rng(seed, 0x601d);
    const std::size_t d = spec.dim();
    HilbertVector v(d);
    for (long long k = 0; k < n_random; ++k) {
        const double decay = 0.55 + 2.45 * rng.uniform();
        for (std::size_t i = 0; i < d; ++i) {
            const double sign = (rng.next_u64() & 1u) ? 1.0 : -1.0;
            v[i] = sign * std::pow(static_cast<double>(i + 1), -decay);
        }
        for (const auto& t : triples) {
            const double p = (t.alpha - t.kappa) / (t.alpha - t.beta);
            const double pb = phi_norm(v, spec, t.beta);
            const double pk = phi_norm(v, spec, t.kappa);
            const double pa = phi_norm(v, spec, t.alpha);
            note_margin(check, std::pow(pb, p) * std::pow(pa, 1.0 - p), pk);
            note_margin(check, pb, std::pow(pk, 1.0 / p) * std::pow(pa, 1.0 - 1.0 / p));
        }
    }
    return check;
}

MomentChain moment_chain_check(const SamplerSpec& spec, long long n_samples) {
    MomentChain chain;
    chain.check.name = "moment-chain";
    const MomentReport moments = moment_report(spec, n_samples);
    chain.m2 = moments.m2;
    chain.m2_se = moments.m2_se;
    chain.m4 = moments.m4;
    chain.m4_se = moments.m4_se;

    switch (spec.kind) {
        case SamplerKind::kGammaSymmetric:
            chain.c0 = spec.spectrum.trace() + 1.0;
            chain.c0_analytic = true;
            break;
        case SamplerKind::kCoordinateBounded:
            chain.c0 = spec.spectrum.trace();
            chain.c0_analytic = true;
            break;
        case SamplerKind::kGff: {
            const auto probes = default_probe_set(spec.spectrum, 32, spec.seed);
            const auto cm = estimate_cross_moment_constant(spec, 0.0, probes, n_samples);
            chain.c0 = cm.sup_ratio;
            chain.c0_se = cm.sup_se;
            break;
        }
    }

    const double se1 = std::sqrt(std::pow(2.0 * chain.m2 * chain.m2_se, 2) +
                                 chain.m4_se * chain.m4_se);
    note_margin(chain.check, chain.m4 + 3.0 * se1, chain.m2 * chain.m2);

    const double se2 = std::sqrt(chain.m4_se * chain.m4_se +
                                 std::pow(chain.c0 * chain.m2_se, 2) +
                                 std::pow(chain.m2 * chain.c0_se, 2));
    note_margin(chain.check, chain.c0 * chain.m2 + 3.0 * se2, chain.m4);

    const double se3 = std::sqrt(std::pow(chain.m2 * chain.c0_se, 2) +
                                 std::pow(chain.c0 * chain.m2_se, 2) +
                                 std::pow(2.0 * chain.c0 * chain.c0_se, 2));
    note_margin(chain.check, chain.c0 * chain.c0 + 3.0 * se3, chain.c0 * chain.m2);
    return chain;
}

SgdRateReport sgd_rate_report(const EnsembleStats& stats, const Spectrum& spec,
                              const HilbertVector& theta0, double beta_target,
                              FitWindow window, double slack) {
    const auto it = std::find(stats.betas.begin(), stats.betas.end(), 0.0);
    if (it == stats.betas.end()) {
        throw std::invalid_argument("sgd_rate_report: ensemble must record beta = 0");
    }
    const std::size_t b0 = static_cast<std::size_t>(it - stats.betas.begin());

    SgdRateReport report;
    report.rate = fit_decay_rate(stats.steps, stats.phi_mean[b0], window);
    report.required_exponent = -(beta_target - slack);
    report.rate_ok = report.rate.exponent <= report.required_exponent;

    report.jensen.name = "jensen-lower-bound";
    for (std::size_t k = 0; k < stats.steps.size(); ++k) {
        const double target =
            squared_norm(mean_iterate(theta0, spec, stats.gamma, stats.steps[k]));
        note_margin(report.jensen,
                    stats.phi_mean[b0][k] + 4.0 * stats.phi_se[b0][k], target);
    }
    return report;
}

}  // namespace sgdlab
