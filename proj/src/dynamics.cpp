#include "sgdlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "sgdlab/numeric.hpp"

namespace sgdlab {

namespace {

double phi_with_weights(const HilbertVector& theta, const std::vector<double>& weights) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (theta[i] == 0.0) continue;
        const double term = weights[i] * theta[i] * theta[i];
        if (!std::isfinite(term)) return std::numeric_limits<double>::infinity();
        acc.add(term);
    }
    const double total = acc.value();
    return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
}

void validate_config(const IterationConfig& config) {
    if (config.theta0.size() != config.sampler.spectrum.dim()) {
        throw std::invalid_argument("iteration: theta0 dimension mismatch");
    }
    if (config.n_steps < 1) throw std::invalid_argument("iteration: n_steps must be >= 1");
    if (config.n_replicas < 1) throw std::invalid_argument("iteration: n_replicas must be >= 1");
    const double gamma = config.resolved_gamma();
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("iteration: gamma must be finite and >= 0");
    }
    const auto& steps = config.schedule.steps;
    if (steps.empty() || steps.front() != 0 || steps.back() != config.n_steps) {
        throw std::invalid_argument("iteration: schedule must span 0..n_steps");
    }
    for (std::size_t k = 1; k < steps.size(); ++k) {
        if (steps[k] <= steps[k - 1]) {
            throw std::invalid_argument("iteration: schedule must be strictly increasing");
        }
    }
    if (!all_finite(config.theta0)) {
        throw std::invalid_argument("iteration: theta0 has non-finite entries");
    }
}

struct Engine {
    Sampler sampler;
    std::vector<std::vector<double>> weights;  // [beta][i]
    double gamma = 0.0;
    double flip = 1.0;  // per-hit factor on the struck coordinate
    bool fast_path = false;

    explicit Engine(const IterationConfig& config) : sampler(config.sampler) {
        gamma = config.resolved_gamma();
        fast_path = sampler.single_coordinate();
        if (fast_path) {
            flip = config.gamma_bound_fraction ? 1.0 - 2.0 * *config.gamma_bound_fraction
                                               : 1.0 - gamma * sampler.norm_sq_constant();
        }
        const auto& spectrum = sampler.spectrum();
        weights.resize(config.record_betas.size());
        for (std::size_t b = 0; b < config.record_betas.size(); ++b) {
            weights[b].resize(spectrum.dim());
            for (std::size_t i = 0; i < spectrum.dim(); ++i) {
                weights[b][i] = std::pow(spectrum[i], -config.record_betas[b]);
            }
        }
    }
};

TrajectoryRecord run_one(const Engine& eng, const IterationConfig& config, int replica) {
    RngStream rng(config.sampler.seed, static_cast<std::uint64_t>(replica));
    HilbertVector theta = config.theta0;
    const std::size_t d = theta.size();
    const auto& sched = config.schedule.steps;

    TrajectoryRecord rec;
    rec.phi.resize(config.record_betas.size());
    std::size_t next = 0;
    double prev_norm = squared_norm(theta);
    HilbertVector x;

    for (long long n = 0;; ++n) {
        if (rec.diverged) break;
        if (next < sched.size() && sched[next] == n) {
            rec.steps.push_back(n);
            for (std::size_t b = 0; b < eng.weights.size(); ++b) {
                rec.phi[b].push_back(phi_with_weights(theta, eng.weights[b]));
            }
            if (config.record_coefficients) rec.coefficients.push_back(theta);
            ++next;
        }
        if (n == config.n_steps) break;

        if (eng.fast_path) {
            const std::size_t idx = eng.sampler.draw_index(rng);
            const double oldv = theta[idx];
            const double newv = oldv * eng.flip;
            theta[idx] = newv;
            if (config.track_monotone && newv * newv > oldv * oldv) {
                rec.norm_nonincreasing = false;
            }
            if (!std::isfinite(newv) || std::abs(newv) > config.divergence_threshold) {
                rec.diverged = true;
                rec.diverged_at = n + 1;
            }
        } else {
            eng.sampler.draw(rng, x);
            const double coef = eng.gamma * inner_product(theta, x);
            double max_abs = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                theta[i] -= coef * x[i];
                max_abs = std::max(max_abs, std::abs(theta[i]));
            }
            if (!std::isfinite(coef) || !(max_abs <= config.divergence_threshold)) {
                rec.diverged = true;
                rec.diverged_at = n + 1;
            } else if (config.track_monotone) {
                const double cur = squared_norm(theta);
                if (cur > prev_norm) rec.norm_nonincreasing = false;
                prev_norm = cur;
            }
        }
    }
    rec.final_sq_norm = squared_norm(theta);
    return rec;
}

// strided replica partition; slots are preallocated so workers never share state
template <typename Fn>
void run_replicas(int n_replicas, int max_threads, Fn&& body) {
    int threads = max_threads > 0 ? max_threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, n_replicas);
    if (threads == 1) {
        for (int r = 0; r < n_replicas; ++r) body(r);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (int r = t; r < n_replicas; r += threads) body(r);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

double IterationConfig::resolved_gamma() const {
    if (gamma_bound_fraction) return 2.0 * *gamma_bound_fraction / sampler.spectrum.trace();
    return gamma;
}

RecordSchedule RecordSchedule::geometric(long long n_steps, double ratio) {
    if (n_steps < 1) throw std::invalid_argument("schedule: n_steps must be >= 1");
    if (!(ratio > 1.0)) throw std::invalid_argument("schedule: ratio must exceed 1");
    std::vector<long long> steps{0};
    for (double v = 1.0;; v *= ratio) {
        const long long s = static_cast<long long>(std::ceil(v));
        if (s >= n_steps) break;
        if (s > steps.back()) steps.push_back(s);
    }
    steps.push_back(n_steps);
    return RecordSchedule{std::move(steps)};
}

RecordSchedule RecordSchedule::from_steps(std::vector<long long> steps, long long n_steps) {
    steps.push_back(0);
    steps.push_back(n_steps);
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    if (steps.front() < 0 || steps.back() != n_steps) {
        throw std::invalid_argument("schedule: steps must lie in [0, n_steps]");
    }
    return RecordSchedule{std::move(steps)};
}

TrajectoryRecord sgd_trajectory(const IterationConfig& config, int replica) {
    validate_config(config);
    const Engine eng(config);
    return run_one(eng, config, replica);
}

HilbertVector mean_iterate(const HilbertVector& theta0, const Spectrum& spec, double gamma,
                           long long n) {
    if (theta0.size() != spec.dim()) {
        throw std::invalid_argument("mean_iterate: dimension mismatch");
    }
    if (n < 0) throw std::invalid_argument("mean_iterate: n must be >= 0");
    if (!(gamma * spec.max_eigenvalue() < 1.0)) {
        throw std::invalid_argument("mean_iterate: gamma * lambda_max must stay below 1");
    }
    HilbertVector out(theta0.size());
    for (std::size_t i = 0; i < theta0.size(); ++i) {
        out[i] = std::exp(static_cast<double>(n) * std::log1p(-gamma * spec[i])) * theta0[i];
    }
    return out;
}

EnsembleStats ensemble(const IterationConfig& config) {
    validate_config(config);
    const Engine eng(config);
    const int n_replicas = config.n_replicas;

    std::vector<TrajectoryRecord> recs(n_replicas);
    run_replicas(n_replicas, config.max_threads,
                 [&](int r) { recs[r] = run_one(eng, config, r); });

    EnsembleStats stats;
    stats.n_replicas = n_replicas;
    stats.gamma = eng.gamma;
    stats.steps = config.schedule.steps;
    stats.betas = config.record_betas;

    const std::size_t n_rec = stats.steps.size();
    const std::size_t n_beta = stats.betas.size();
    const std::size_t d = config.theta0.size();

    for (int r = 0; r < n_replicas; ++r) {
        stats.monotone.push_back(recs[r].norm_nonincreasing ? 1 : 0);
        stats.final_sq_norm.push_back(recs[r].final_sq_norm);
        if (recs[r].diverged) stats.diverged_replicas.push_back(r);
    }

    stats.phi_mean.assign(n_beta, std::vector<double>(n_rec, 0.0));
    stats.phi_se.assign(n_beta, std::vector<double>(n_rec, 0.0));
    stats.phi_diff_mean.assign(n_beta, std::vector<double>(n_rec > 0 ? n_rec - 1 : 0, 0.0));
    stats.phi_diff_se.assign(n_beta, std::vector<double>(n_rec > 0 ? n_rec - 1 : 0, 0.0));
    stats.replicas_used.assign(n_rec, 0);

    for (std::size_t b = 0; b < n_beta; ++b) {
        for (std::size_t k = 0; k < n_rec; ++k) {
            RunningStat stat;
            for (int r = 0; r < n_replicas; ++r) {
                if (recs[r].diverged) continue;
                stat.add(recs[r].phi[b][k]);
            }
            stats.phi_mean[b][k] = stat.mean();
            stats.phi_se[b][k] = stat.stderr_of_mean();
            if (b == 0) stats.replicas_used[k] = stat.count();
        }
        for (std::size_t k = 0; k + 1 < n_rec; ++k) {
            RunningStat diff;
            for (int r = 0; r < n_replicas; ++r) {
                if (recs[r].diverged) continue;
                diff.add(recs[r].phi[b][k + 1] - recs[r].phi[b][k]);
            }
            stats.phi_diff_mean[b][k] = diff.mean();
            stats.phi_diff_se[b][k] = diff.stderr_of_mean();
        }
    }

    if (config.record_coefficients) {
        stats.coeff_mean.assign(n_rec, HilbertVector(d, 0.0));
        stats.coeff_se.assign(n_rec, HilbertVector(d, 0.0));
        stats.coeff_moved.assign(n_rec, std::vector<long long>(d, 0));
        std::vector<RunningStat> row(d);
        for (std::size_t k = 0; k < n_rec; ++k) {
            std::fill(row.begin(), row.end(), RunningStat{});
            for (int r = 0; r < n_replicas; ++r) {
                if (recs[r].diverged) continue;
                for (std::size_t i = 0; i < d; ++i) {
                    row[i].add(recs[r].coefficients[k][i]);
                    if (recs[r].coefficients[k][i] != config.theta0[i]) {
                        ++stats.coeff_moved[k][i];
                    }
                }
            }
            for (std::size_t i = 0; i < d; ++i) {
                stats.coeff_mean[k][i] = row[i].mean();
                stats.coeff_se[k][i] = row[i].stderr_of_mean();
            }
        }
    }
    return stats;
}

RecursionCheck recursion_check(const HilbertVector& theta, const SamplerSpec& spec,
                               double gamma, double beta, long long n_samples) {
    const Spectrum& spectrum = spec.spectrum;
    const double phi_b = phi_norm(theta, spectrum, beta);
    const double phi_bm1 = phi_norm(theta, spectrum, beta - 1.0);
    if (!std::isfinite(phi_b) || !std::isfinite(phi_bm1)) {
        throw std::invalid_argument("recursion_check: phi_beta and phi_{beta-1} must be finite");
    }
    const Sampler sampler(spec);
    const std::size_t d = spectrum.dim();

    RecursionCheck check;
    if (sampler.single_coordinate()) {
        // enumerate the d atoms exactly
        const double m = sampler.norm_sq_constant();
        const double trace = spectrum.trace();
        CompensatedSum lhs, third;
        HilbertVector x(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            const double p = spectrum[i] / trace;
            x[i] = sampler.coordinate_value();
            const HilbertVector after = sgd_update(theta, x, gamma);
            lhs.add(p * phi_norm(after, spectrum, beta));
            const double dot2 = theta[i] * theta[i] * m;
            third.add(p * dot2 * std::pow(spectrum[i], -beta) * m);
            x[i] = 0.0;
        }
        check.exact = true;
        check.lhs = lhs.value();
        check.third_term = third.value();
        check.rhs = phi_b - 2.0 * gamma * phi_bm1 + gamma * gamma * check.third_term;
    } else {
        RngStream rng_lhs(spec.seed, 2);
        RngStream rng_rhs(spec.seed, 3);
        std::vector<double> weight(d);
        for (std::size_t i = 0; i < d; ++i) weight[i] = std::pow(spectrum[i], -beta);
        RunningStat lhs, third;
        HilbertVector x;
        for (long long k = 0; k < n_samples; ++k) {
            sampler.draw(rng_lhs, x);
            lhs.add(phi_norm(sgd_update(theta, x, gamma), spectrum, beta));
        }
        for (long long k = 0; k < n_samples; ++k) {
            sampler.draw(rng_rhs, x);
            const double dot = inner_product(theta, x);
            CompensatedSum phix;
            for (std::size_t i = 0; i < d; ++i) {
                if (x[i] != 0.0) phix.add(weight[i] * x[i] * x[i]);
            }
            third.add(dot * dot * phix.value());
        }
        check.lhs = lhs.mean();
        check.lhs_se = lhs.stderr_of_mean();
        check.third_term = third.mean();
        check.third_se = third.stderr_of_mean();
        check.rhs = phi_b - 2.0 * gamma * phi_bm1 + gamma * gamma * check.third_term;
        check.rhs_se = gamma * gamma * check.third_se;
    }
    const double diff = std::abs(check.lhs - check.rhs);
    const double combined = std::sqrt(check.lhs_se * check.lhs_se + check.rhs_se * check.rhs_se);
    check.se_units = combined > 0.0 ? diff / combined : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    const double scale = std::max(std::abs(check.lhs), std::abs(check.rhs));
    check.rel_error = scale > 0.0 ? diff / scale : 0.0;
    return check;
}

MartingaleStats martingale_diagnostic(const IterationConfig& config) {
    validate_config(config);
    if (squared_norm(config.theta0) == 0.0) {
        throw std::invalid_argument("martingale_diagnostic: theta0 must be nonzero");
    }
    const Engine eng(config);
    const int n_replicas = config.n_replicas;
    const auto& sched = config.schedule.steps;
    const std::size_t n_rec = sched.size();
    const std::size_t d = config.theta0.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<std::vector<double>> vals(n_replicas, std::vector<double>(n_rec, nan));
    const auto& spectrum = eng.sampler.spectrum();

    run_replicas(n_replicas, config.max_threads, [&](int r) {
        RngStream rng(config.sampler.seed, static_cast<std::uint64_t>(r));
        HilbertVector theta = config.theta0;
        HilbertVector x;
        std::size_t idx = 0;
        std::size_t next = 0;
        for (long long n = 0;; ++n) {
            const bool recorded = next < n_rec && sched[next] == n;
            if (n < config.n_steps || recorded) {
                if (eng.fast_path) {
                    idx = eng.sampler.draw_index(rng);
                } else {
                    eng.sampler.draw(rng, x);
                }
            }
            if (recorded) {
                const double norm_sq = squared_norm(theta);
                if (norm_sq > 0.0) {
                    double dot2;
                    if (eng.fast_path) {
                        dot2 = eng.sampler.norm_sq_constant() * theta[idx] * theta[idx];
                    } else {
                        const double dot = inner_product(theta, x);
                        dot2 = dot * dot;
                    }
                    CompensatedSum hnum;
                    for (std::size_t i = 0; i < d; ++i) {
                        hnum.add(spectrum[i] * (theta[i] * theta[i]));
                    }
                    vals[r][next] = (dot2 - hnum.value()) / norm_sq;
                }
                ++next;
            }
            if (n == config.n_steps) break;
            if (eng.fast_path) {
                theta[idx] *= eng.flip;
            } else {
                const double coef = eng.gamma * inner_product(theta, x);
                for (std::size_t i = 0; i < d; ++i) theta[i] -= coef * x[i];
            }
        }
    });

    MartingaleStats stats;
    stats.steps = sched;
    stats.mean.resize(n_rec);
    stats.se.resize(n_rec);
    stats.count.resize(n_rec);
    for (std::size_t k = 0; k < n_rec; ++k) {
        RunningStat stat;
        for (int r = 0; r < n_replicas; ++r) {
            if (!std::isnan(vals[r][k])) stat.add(vals[r][k]);
        }
        stats.mean[k] = stat.mean();
        stats.se[k] = stat.stderr_of_mean();
        stats.count[k] = stat.count();
    }
    return stats;
}

MeanEvolutionCheck mean_evolution_check(const EnsembleStats& stats, const Spectrum& spec,
                                        const HilbertVector& theta0, double n_se) {
    if (stats.coeff_mean.empty()) {
        throw std::invalid_argument("mean_evolution_check: ensemble lacks coefficient records");
    }
    MeanEvolutionCheck check;
    for (std::size_t k = 0; k < stats.steps.size(); ++k) {
        const HilbertVector target = mean_iterate(theta0, spec, stats.gamma, stats.steps[k]);
        for (std::size_t i = 0; i < target.size(); ++i) {
            if (stats.coeff_moved[k][i] < 30) {
                ++check.unresolved;
                continue;
            }
            const double dev = std::abs(stats.coeff_mean[k][i] - target[i]);
            const double se = stats.coeff_se[k][i];
            ++check.compared;
            if (se > 0.0) {
                const double z = dev / se;
                check.worst_z = std::max(check.worst_z, z);
                if (z > n_se) ++check.violations;
            } else if (dev > 1e-12 * std::max(1.0, std::abs(target[i]))) {
                ++check.violations;
            }
        }
    }
    return check;
}

}  // namespace sgdlab
