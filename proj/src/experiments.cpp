#include "sgdlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sgdlab/numeric.hpp"

namespace sgdlab {

namespace {

constexpr const char* kCsvHeader = "n,beta,mean,stderr,bound,replicas";
constexpr const char* kLemmaHeader = "check,points,violations,worst_margin,value,reference,stderr";

std::string format_int(long long v) { return std::to_string(v); }

struct CsvBuilder {
    std::string body;

    explicit CsvBuilder(const char* header) { body = std::string(header) + "\n"; }

    void row(long long n, double beta, double mean, double se, std::optional<double> bound,
             long long replicas) {
        body += format_int(n) + "," + format_g17(beta) + "," + format_g17(mean) + "," +
                format_g17(se) + "," + (bound ? format_g17(*bound) : std::string()) + "," +
                format_int(replicas) + "\n";
    }

    void lemma_row(const BoundCheck& check, double value, double reference, double se) {
        body += check.name + "," + format_int(check.points) + "," +
                format_int(check.violations) + "," + format_g17(check.worst_margin) + "," +
                format_g17(value) + "," + format_g17(reference) + "," + format_g17(se) + "\n";
    }

    void trailer(const std::string& key, const std::string& value) {
        body += "# " + key + ": " + value + "\n";
    }
};

struct ManifestBuilder {
    std::string body;

    void add(const std::string& key, const std::string& value) {
        body += key + " = " + value + "\n";
    }
    void add(const std::string& key, double value) { add(key, format_g17(value)); }
    void add(const std::string& key, long long value) { add(key, format_int(value)); }
};

void describe_config(const ExperimentConfig& cfg, const Spectrum& spectrum, double gamma,
                     ManifestBuilder& manifest) {
    manifest.add("experiment", to_string(cfg.kind));
    manifest.add("artifact_version", std::string(kArtifactVersion));
    manifest.add("seed", static_cast<long long>(cfg.seed));
    manifest.add("spectrum.family", cfg.family);
    manifest.add("spectrum.c", cfg.c);
    manifest.add("spectrum.p", cfg.p);
    manifest.add("spectrum.r", cfg.geo_ratio);
    manifest.add("spectrum.d", cfg.dim);
    manifest.add("spectrum.rescale_factor", spectrum.rescale_factor());
    manifest.add("spectrum.trace", spectrum.trace());
    manifest.add("theta0.s", cfg.s);
    manifest.add("theta0.normalize", std::string(cfg.normalize ? "true" : "false"));
    manifest.add("run.sampler", to_string(cfg.sampler_kind));
    manifest.add("run.gamma", gamma);
    if (cfg.gamma_bound_fraction) {
        manifest.add("run.gamma_bound_fraction", *cfg.gamma_bound_fraction);
    }
    manifest.add("run.n_steps", cfg.n_steps);
    manifest.add("run.n_replicas", static_cast<long long>(cfg.n_replicas));
    manifest.add("run.n_samples", cfg.n_samples);
    manifest.add("run.beta", cfg.beta);
    manifest.add("run.beta_target", cfg.beta_target);
    manifest.add("run.record_ratio", cfg.record_ratio);
    manifest.add("run.window", format_g17(cfg.window.n_min) + ", " + format_g17(cfg.window.n_max));
    manifest.add("run.slack", cfg.slack);
    manifest.add("run.threads", static_cast<long long>(cfg.threads));
}

RunOutcome finish(const ExperimentConfig& cfg, CsvBuilder& csv, ManifestBuilder& manifest,
                  int exit_code, const std::string& message) {
    std::filesystem::create_directories(cfg.out_dir);
    RunOutcome outcome;
    outcome.exit_code = exit_code;
    outcome.message = message;
    outcome.csv_path = cfg.out_dir / (to_string(cfg.kind) + "-results.csv");
    outcome.manifest_path = cfg.out_dir / (to_string(cfg.kind) + "-manifest.txt");

    csv.trailer("experiment", to_string(cfg.kind));
    manifest.add("outcome.exit_code", static_cast<long long>(exit_code));
    manifest.add("outcome.message", message.empty() ? "ok" : message);

    std::ofstream csv_file(outcome.csv_path, std::ios::binary);
    csv_file << csv.body;
    std::ofstream manifest_file(outcome.manifest_path, std::ios::binary);
    manifest_file << manifest.body;
    if (!csv_file || !manifest_file) {
        outcome.exit_code = 2;
        outcome.message = "cannot write output files under " + cfg.out_dir.string();
    }
    return outcome;
}

RecordSchedule build_schedule(const ExperimentConfig& cfg) {
    if (cfg.record_steps) return RecordSchedule::from_steps(*cfg.record_steps, cfg.n_steps);
    return RecordSchedule::geometric(cfg.n_steps, cfg.record_ratio);
}

IterationConfig build_iteration(const ExperimentConfig& cfg, const Spectrum& spectrum,
                                const HilbertVector& theta0) {
    IterationConfig it;
    it.sampler = SamplerSpec{cfg.sampler_kind, spectrum, cfg.seed};
    it.theta0 = theta0;
    if (cfg.gamma_bound_fraction) {
        it.gamma_bound_fraction = cfg.gamma_bound_fraction;
    } else {
        it.gamma = cfg.resolve_gamma(spectrum);
    }
    it.n_steps = cfg.n_steps;
    it.n_replicas = cfg.n_replicas;
    it.record_betas = cfg.betas;
    it.schedule = build_schedule(cfg);
    it.max_threads = cfg.threads;
    return it;
}

std::string list_replicas(const std::vector<int>& replicas) {
    std::string out;
    for (int r : replicas) {
        if (!out.empty()) out += " ";
        out += std::to_string(r);
    }
    return out;
}

// --- experiments ---------------------------------------------------------

RunOutcome run_mean_rate(const ExperimentConfig& cfg) {
    const Spectrum spectrum = cfg.build_spectrum();
    const HilbertVector theta0 = cfg.build_theta0(spectrum);
    const double gamma = cfg.resolve_gamma(spectrum);
    const RecordSchedule schedule = build_schedule(cfg);

    std::vector<double> values(schedule.steps.size());
    for (std::size_t k = 0; k < schedule.steps.size(); ++k) {
        values[k] = squared_norm(mean_iterate(theta0, spectrum, gamma, schedule.steps[k]));
    }

    CsvBuilder csv(kCsvHeader);
    long long total_violations = 0;
    std::vector<long long> positive_steps;
    for (long long n : schedule.steps) {
        if (n >= 1) positive_steps.push_back(n);
    }
    for (double beta : cfg.betas) {
        for (std::size_t k = 0; k < schedule.steps.size(); ++k) {
            const long long n = schedule.steps[k];
            std::optional<double> bound;
            if (n >= 1) bound = mean_iterate_upper_bound(theta0, spectrum, gamma, beta, 0.0, n);
            csv.row(n, beta, values[k], 0.0, bound, 1);
        }
        const BoundCheck check =
            mean_iterate_bound_check(theta0, spectrum, gamma, beta, 0.0, positive_steps);
        total_violations += check.violations;
        csv.trailer("violations_beta_" + format_g17(beta), format_int(check.violations));
    }

    const RateEstimate fit = fit_decay_rate(schedule.steps, values, cfg.window);
    std::optional<double> expected = cfg.expected_exponent;
    if (!expected && cfg.family == "power-law") expected = -(2.0 * cfg.s - 1.0) / cfg.p;

    csv.trailer("fitted_exponent", format_g17(fit.exponent));
    csv.trailer("fit_stderr", format_g17(fit.stderr_));
    if (expected) csv.trailer("expected_exponent", format_g17(*expected));

    ManifestBuilder manifest;
    describe_config(cfg, spectrum, gamma, manifest);
    manifest.add("result.fitted_exponent", fit.exponent);
    manifest.add("result.fit_stderr", fit.stderr_);
    manifest.add("result.bound_violations", total_violations);

    std::string message;
    if (total_violations > 0) {
        message = "mean-iterate-upper-bound violated at " + format_int(total_violations) +
                  " grid points";
    } else if (expected && std::abs(fit.exponent - *expected) > cfg.exponent_tol) {
        message = "fitted exponent " + format_g17(fit.exponent) + " outside " +
                  format_g17(*expected) + " +/- " + format_g17(cfg.exponent_tol);
    }
    return finish(cfg, csv, manifest, message.empty() ? 0 : 1, message);
}

RunOutcome run_sgd_rate(const ExperimentConfig& cfg) {
    const Spectrum spectrum = cfg.build_spectrum();
    const HilbertVector theta0 = cfg.build_theta0(spectrum);
    ExperimentConfig resolved = cfg;
    for (double required : {0.0, cfg.beta_target}) {
        if (std::find(resolved.betas.begin(), resolved.betas.end(), required) ==
            resolved.betas.end()) {
            resolved.betas.push_back(required);
        }
    }
    const IterationConfig it = build_iteration(resolved, spectrum, theta0);
    const EnsembleStats stats = ensemble(it);

    const SgdRateReport report =
        sgd_rate_report(stats, spectrum, theta0, cfg.beta_target, cfg.window, cfg.slack);

    // expected decrease of E[phi_beta] between consecutive records, paired per
    // replica, with 2 SE of slack
    const std::size_t bt = static_cast<std::size_t>(
        std::find(stats.betas.begin(), stats.betas.end(), cfg.beta_target) -
        stats.betas.begin());
    long long monotone_violations = 0;
    for (std::size_t k = 0; k + 1 < stats.steps.size(); ++k) {
        if (stats.phi_diff_mean[bt][k] > 2.0 * stats.phi_diff_se[bt][k]) ++monotone_violations;
    }

    const MeanEvolutionCheck evolution = mean_evolution_check(stats, spectrum, theta0, 4.0);

    CsvBuilder csv(kCsvHeader);
    for (std::size_t b = 0; b < stats.betas.size(); ++b) {
        for (std::size_t k = 0; k < stats.steps.size(); ++k) {
            const double reference = phi_norm(
                mean_iterate(theta0, spectrum, stats.gamma, stats.steps[k]), spectrum,
                stats.betas[b]);
            csv.row(stats.steps[k], stats.betas[b], stats.phi_mean[b][k], stats.phi_se[b][k],
                    reference, stats.replicas_used[k]);
        }
    }
    csv.trailer("fitted_exponent", format_g17(report.rate.exponent));
    csv.trailer("fit_stderr", format_g17(report.rate.stderr_));
    csv.trailer("required_exponent", format_g17(report.required_exponent));
    csv.trailer("jensen_violations", format_int(report.jensen.violations));
    csv.trailer("expected_decrease_violations", format_int(monotone_violations));
    csv.trailer("mean_evolution_worst_z", format_g17(evolution.worst_z));
    csv.trailer("mean_evolution_unresolved", format_int(evolution.unresolved));

    ManifestBuilder manifest;
    describe_config(cfg, spectrum, stats.gamma, manifest);
    manifest.add("result.fitted_exponent", report.rate.exponent);
    manifest.add("result.required_exponent", report.required_exponent);
    manifest.add("result.jensen_violations", report.jensen.violations);
    manifest.add("result.expected_decrease_violations", monotone_violations);
    manifest.add("result.mean_evolution_worst_z", evolution.worst_z);
    manifest.add("result.mean_evolution_unresolved", evolution.unresolved);
    manifest.add("result.diverged_replicas",
                 stats.diverged_replicas.empty() ? "none" : list_replicas(stats.diverged_replicas));

    std::string message;
    if (!stats.diverged_replicas.empty()) {
        message = "diverged replicas: " + list_replicas(stats.diverged_replicas);
    } else if (!report.rate_ok) {
        message = "fitted exponent " + format_g17(report.rate.exponent) + " above required " +
                  format_g17(report.required_exponent);
    } else if (report.jensen.violations > 0) {
        message = "jensen-lower-bound violated at " + format_int(report.jensen.violations) +
                  " records";
    } else if (monotone_violations > 0) {
        message = "expected-decrease violated at " + format_int(monotone_violations) + " gaps";
    }
    return finish(cfg, csv, manifest, message.empty() ? 0 : 1, message);
}

RunOutcome run_recursion(const ExperimentConfig& cfg) {
    const Spectrum spectrum = cfg.build_spectrum();
    const HilbertVector theta0 = cfg.build_theta0(spectrum);
    const double gamma = cfg.resolve_gamma(spectrum);
    const SamplerSpec sampler{cfg.sampler_kind, spectrum, cfg.seed};
    const RecursionCheck check = recursion_check(theta0, sampler, gamma, cfg.beta, cfg.n_samples);

    CsvBuilder csv(kCsvHeader);
    csv.row(cfg.n_samples, cfg.beta, check.lhs, check.lhs_se, check.rhs, cfg.n_samples);
    csv.trailer("mode", check.exact ? "exact-enumeration" : "monte-carlo");
    csv.trailer("third_term", format_g17(check.third_term));
    csv.trailer("third_stderr", format_g17(check.third_se));
    csv.trailer("rhs_stderr", format_g17(check.rhs_se));
    csv.trailer("se_units", format_g17(check.se_units));
    csv.trailer("rel_error", format_g17(check.rel_error));

    ManifestBuilder manifest;
    describe_config(cfg, spectrum, gamma, manifest);
    manifest.add("result.lhs", check.lhs);
    manifest.add("result.rhs", check.rhs);
    manifest.add("result.se_units", check.se_units);
    manifest.add("result.rel_error", check.rel_error);
    manifest.add("result.mode", std::string(check.exact ? "exact-enumeration" : "monte-carlo"));

    std::string message;
    if (check.exact) {
        if (check.rel_error > 1e-10) {
            message = "recursion identity off by relative " + format_g17(check.rel_error);
        }
    } else if (check.se_units > 3.0) {
        message = "recursion identity off by " + format_g17(check.se_units) + " standard errors";
    }
    return finish(cfg, csv, manifest, message.empty() ? 0 : 1, message);
}

RunOutcome run_as_convergence(const ExperimentConfig& cfg) {
    const Spectrum spectrum = cfg.build_spectrum();
    const HilbertVector theta0 = cfg.build_theta0(spectrum);
    ExperimentConfig resolved = cfg;
    if (std::find(resolved.betas.begin(), resolved.betas.end(), 0.0) == resolved.betas.end()) {
        resolved.betas.insert(resolved.betas.begin(), 0.0);
    }
    IterationConfig it = build_iteration(resolved, spectrum, theta0);
    it.record_coefficients = false;
    const EnsembleStats stats = ensemble(it);

    bool monotone_all = true;
    for (unsigned char flag : stats.monotone) monotone_all = monotone_all && flag;

    const double initial = squared_norm(theta0);
    double final_max = 0.0;
    for (int r = 0; r < stats.n_replicas; ++r) {
        if (std::find(stats.diverged_replicas.begin(), stats.diverged_replicas.end(), r) !=
            stats.diverged_replicas.end()) {
            continue;
        }
        final_max = std::max(final_max, stats.final_sq_norm[r]);
    }
    const double final_ratio = final_max / initial;

    const std::size_t b0 = static_cast<std::size_t>(
        std::find(stats.betas.begin(), stats.betas.end(), 0.0) - stats.betas.begin());
    CsvBuilder csv(kCsvHeader);
    for (std::size_t k = 0; k < stats.steps.size(); ++k) {
        csv.row(stats.steps[k], 0.0, stats.phi_mean[b0][k], stats.phi_se[b0][k], std::nullopt,
                stats.replicas_used[k]);
    }
    // admissible step size of the general (fourth-moment) case at this
    // truncation: delta / E[|x|^4] with delta = min lambda and |x|^4 = M^2
    const double m = spectrum.trace();
    const double general_gamma = spectrum.min_eigenvalue() / (m * m);

    csv.trailer("gamma", format_g17(stats.gamma));
    csv.trailer("gamma_bound", format_g17(2.0 / m));
    csv.trailer("gamma_general_case", format_g17(general_gamma));
    csv.trailer("pathwise_nonincreasing", monotone_all ? "true" : "false");
    csv.trailer("final_max_ratio", format_g17(final_ratio));

    ManifestBuilder manifest;
    describe_config(cfg, spectrum, stats.gamma, manifest);
    manifest.add("result.gamma_bound", 2.0 / m);
    manifest.add("result.gamma_general_case", general_gamma);
    manifest.add("result.pathwise_nonincreasing", std::string(monotone_all ? "true" : "false"));
    manifest.add("result.final_max_ratio", final_ratio);
    manifest.add("result.diverged_replicas",
                 stats.diverged_replicas.empty() ? "none" : list_replicas(stats.diverged_replicas));

    std::string message;
    if (!stats.diverged_replicas.empty()) {
        message = "diverged replicas: " + list_replicas(stats.diverged_replicas);
    } else if (!monotone_all) {
        message = "pathwise-nonincreasing violated";
    } else if (!(final_ratio < cfg.final_ratio_max)) {
        message = "final squared norm ratio " + format_g17(final_ratio) + " not below " +
                  format_g17(cfg.final_ratio_max);
    }
    return finish(cfg, csv, manifest, message.empty() ? 0 : 1, message);
}

RunOutcome run_cross_moment(const ExperimentConfig& cfg) {
    const Spectrum spectrum = cfg.build_spectrum();
    const SamplerSpec sampler{cfg.sampler_kind, spectrum, cfg.seed};
    const auto probes = default_probe_set(spectrum, 32, cfg.seed);
    const CrossMomentResult res =
        estimate_cross_moment_constant(sampler, cfg.beta, probes, cfg.n_samples);

    // per-probe agreement is asserted only where the estimator resolved the
    // probe (effective sample size >= 100); the supremum bound is always on
    long long probe_violations = 0;
    long long probes_asserted = 0;
    CsvBuilder csv(kCsvHeader);
    for (std::size_t k = 0; k < res.probes.size(); ++k) {
        const ProbeRatio& pr = res.probes[k];
        if (pr.skipped) continue;
        csv.row(static_cast<long long>(k), cfg.beta, pr.mc_ratio, pr.se, pr.analytic,
                cfg.n_samples);
        if (pr.analytic && pr.ess >= 100.0) {
            ++probes_asserted;
            if (std::abs(pr.mc_ratio - *pr.analytic) > 4.0 * pr.se) ++probe_violations;
        }
    }
    bool sup_ok = true;
    if (res.analytic_constant) {
        sup_ok = res.sup_ratio <= *res.analytic_constant + 4.0 * res.sup_se;
    }
    csv.trailer("sup_ratio", format_g17(res.sup_ratio));
    csv.trailer("sup_stderr", format_g17(res.sup_se));
    csv.trailer("sup_probe", format_int(static_cast<long long>(res.sup_probe)));
    if (res.analytic_constant) csv.trailer("analytic_constant", format_g17(*res.analytic_constant));
    csv.trailer("skipped_probes", format_int(res.skipped));
    csv.trailer("probes_asserted", format_int(probes_asserted));
    csv.trailer("probe_violations", format_int(probe_violations));

    ManifestBuilder manifest;
    describe_config(cfg, spectrum, 0.0, manifest);
    manifest.add("result.sup_ratio", res.sup_ratio);
    manifest.add("result.sup_stderr", res.sup_se);
    if (res.analytic_constant) manifest.add("result.analytic_constant", *res.analytic_constant);
    manifest.add("result.probe_violations", probe_violations);

    std::string message;
    if (probe_violations > 0) {
        message = format_int(probe_violations) + " probes deviate from the closed form by > 4 SE";
    } else if (!sup_ok) {
        message = "supremum ratio exceeds the analytic constant by > 4 SE";
    }
    return finish(cfg, csv, manifest, message.empty() ? 0 : 1, message);
}

RunOutcome run_lemmas(const ExperimentConfig& cfg) {
    CsvBuilder csv(kLemmaHeader);
    long long failures = 0;

    const auto emit = [&](const BoundCheck& check, double value, double reference, double se) {
        csv.lemma_row(check, value, reference, se);
        failures += check.violations;
    };

    // peak of the per-mode decay factor
    {
        const struct { double m, tau; } grid[] = {{20.0, 1.0}, {2.0, 0.5}, {5.0, 1.5}, {200.0, 2.0}};
        for (const auto& g : grid) {
            PeakCheck peak = decay_factor_peak_check(g.m, g.tau, 100000);
            peak.check.name += "-m" + format_g17(g.m) + "-tau" + format_g17(g.tau);
            emit(peak.check, peak.f_star, peak.upper, 0.0);
        }
    }
    for (double tau : {0.5, 1.0, 2.0}) {
        BoundCheck range = decay_factor_range_check(200.0, tau, 0.5, 100000);
        range.name += "-tau" + format_g17(tau);
        emit(range, 0.0, 0.0, 0.0);
    }

    // series against the Gamma function
    {
        const std::vector<double> mu_grid{0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.49};
        const std::vector<double> kappa_grid{0.1, 0.3, 0.5, 1.0, 1.5, 2.5};
        const long long n_terms = 20000;
        const SeriesEnvelope env = series_gamma_envelope(mu_grid, kappa_grid, n_terms);
        emit(env.check, env.min_ratio, env.max_ratio, 0.0);

        const SeriesEnvelope env2 = series_gamma_envelope(mu_grid, kappa_grid, 2 * n_terms);
        const double drift = std::max(std::abs(env2.min_ratio - env.min_ratio) / env.min_ratio,
                                      std::abs(env2.max_ratio - env.max_ratio) / env.max_ratio);
        BoundCheck stability;
        stability.name = "series-envelope-stability";
        stability.points = env.check.points;
        stability.violations = drift <= 0.01 ? 0 : 1;
        stability.worst_margin = 0.01 - drift;
        emit(stability, drift, 0.01, 0.0);

        BoundCheck identity;
        identity.name = "series-kappa1-identity";
        double worst = 0.0;
        for (double mu : mu_grid) {
            const double ratio = series_gamma_ratio(mu, 1.0, n_terms);
            worst = std::max(worst, std::abs(ratio - (1.0 - mu)));
            ++identity.points;
            if (std::abs(ratio - (1.0 - mu)) > 1e-12) ++identity.violations;
        }
        identity.worst_margin = 1e-12 - worst;
        emit(identity, worst, 1e-12, 0.0);
    }

    {
        BoundCheck plain = recursion_decay_check(0.9, 0.5, 1.0, 100000);
        emit(plain, 0.0, 0.0, 0.0);
        BoundCheck scaled = recursion_decay_check(0.9, 0.5, 0.5, 100000);
        scaled.name += "-scaled";
        emit(scaled, 0.0, 0.0, 0.0);
    }

    const Spectrum spectrum = cfg.build_spectrum();
    {
        const HolderTriple triples[] = {
            {0.0, 0.5, 1.0}, {0.1, 0.6, 1.1}, {0.3, 0.9, 1.4}};
        BoundCheck holder = holder_check(spectrum, 1000, triples, cfg.seed);
        emit(holder, 0.0, 0.0, 0.0);
    }

    {
        const SamplerSpec specs[] = {
            {SamplerKind::kGammaSymmetric, spectrum, cfg.seed + 1},
            {SamplerKind::kGff, Spectrum::power_law(cfg.c, cfg.p, 50), cfg.seed + 2},
            {SamplerKind::kCoordinateBounded, Spectrum::power_law(cfg.c, cfg.p, 20), cfg.seed + 3},
        };
        for (const auto& sp : specs) {
            MomentChain chain = moment_chain_check(sp, cfg.n_samples);
            chain.check.name += "-" + to_string(sp.kind);
            emit(chain.check, chain.m4, chain.c0 * chain.m2, chain.m4_se);
        }
    }

    for (double beta : {0.3, 0.45}) {
        const SamplerSpec sp{SamplerKind::kGammaSymmetric, spectrum, cfg.seed + 4};
        const auto probes = default_probe_set(spectrum, 32, cfg.seed);
        const long long n = std::min<long long>(cfg.n_samples, 20000);
        const CrossMomentResult res = estimate_cross_moment_constant(sp, beta, probes, n);
        BoundCheck check;
        check.name = "cross-moment-beta" + format_g17(beta);
        for (const ProbeRatio& pr : res.probes) {
            if (pr.skipped || !pr.analytic || pr.ess < 100.0) continue;
            ++check.points;
            const double margin = 4.0 * pr.se - std::abs(pr.mc_ratio - *pr.analytic);
            check.worst_margin = std::min(check.worst_margin, margin);
            if (margin < 0.0) ++check.violations;
        }
        if (!(res.sup_ratio <= *res.analytic_constant + 4.0 * res.sup_se)) ++check.violations;
        emit(check, res.sup_ratio, *res.analytic_constant, res.sup_se);
    }

    ManifestBuilder manifest;
    describe_config(cfg, spectrum, 0.0, manifest);
    manifest.add("result.failed_checks", failures);

    std::string message;
    if (failures > 0) message = format_int(failures) + " lemma checks reported violations";
    return finish(cfg, csv, manifest, message.empty() ? 0 : 1, message);
}

}  // namespace

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::kMeanRate: return "mean-rate";
        case ExperimentKind::kSgdRate: return "sgd-rate";
        case ExperimentKind::kRecursion: return "recursion";
        case ExperimentKind::kLemmas: return "lemmas";
        case ExperimentKind::kAsConvergence: return "as-convergence";
        case ExperimentKind::kCrossMoment: return "assumption3";
    }
    return "unknown";
}

std::optional<ExperimentKind> parse_experiment(const std::string& tag) {
    if (tag == "mean-rate") return ExperimentKind::kMeanRate;
    if (tag == "sgd-rate") return ExperimentKind::kSgdRate;
    if (tag == "recursion") return ExperimentKind::kRecursion;
    if (tag == "lemmas") return ExperimentKind::kLemmas;
    if (tag == "as-convergence") return ExperimentKind::kAsConvergence;
    if (tag == "assumption3") return ExperimentKind::kCrossMoment;
    return std::nullopt;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path,
                                             const CliOverrides& overrides) {
    return from_config(KeyValueConfig::parse_file(path), overrides);
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& raw,
                                               const CliOverrides& overrides) {
    ExperimentConfig cfg;
    const std::string tag = raw.get_string("experiment", "");
    if (tag.empty()) throw ConfigError("config", "missing required key 'experiment'");
    const auto kind = parse_experiment(tag);
    if (!kind) throw ConfigError(raw.origin_of("experiment"), "unknown experiment '" + tag + "'");
    cfg.kind = *kind;

    switch (cfg.kind) {
        case ExperimentKind::kMeanRate:
            cfg.dim = 5000;
            cfg.gamma = 1.0;
            cfg.n_steps = 10000;
            cfg.n_replicas = 1;
            cfg.betas = {0.5, 1.0, 1.4};
            break;
        case ExperimentKind::kSgdRate:
            cfg.dim = 100;
            cfg.sampler_kind = SamplerKind::kGammaSymmetric;
            cfg.gamma_from_c_beta = true;
            cfg.n_steps = 10000;
            cfg.n_replicas = 100;
            cfg.betas = {0.0, 1.0};
            break;
        case ExperimentKind::kRecursion:
            cfg.dim = 200;
            cfg.sampler_kind = SamplerKind::kGff;
            cfg.gamma = 1.0;
            cfg.beta = 0.0;
            cfg.n_samples = 100000;
            break;
        case ExperimentKind::kLemmas:
            cfg.dim = 100;
            cfg.n_samples = 50000;
            break;
        case ExperimentKind::kAsConvergence:
            cfg.dim = 20;
            cfg.sampler_kind = SamplerKind::kCoordinateBounded;
            cfg.gamma_bound_fraction = 0.75;
            cfg.n_steps = 100000;
            cfg.n_replicas = 50;
            cfg.betas = {0.0};
            break;
        case ExperimentKind::kCrossMoment:
            cfg.dim = 100;
            cfg.sampler_kind = SamplerKind::kGammaSymmetric;
            cfg.beta = 0.3;
            cfg.n_samples = 20000;
            break;
    }

    cfg.seed = static_cast<std::uint64_t>(raw.get_int("seed", static_cast<long long>(cfg.seed)));
    std::string out = raw.get_string("out", "");
    if (out.empty()) {
        const char* env = std::getenv("SGDLAB_OUT");
        out = env ? env : "sgdlab-out";
    }
    cfg.out_dir = out;

    cfg.family = raw.get_string("spectrum.family", cfg.family);
    cfg.c = raw.get_double("spectrum.c", cfg.c);
    cfg.p = raw.get_double("spectrum.p", cfg.p);
    cfg.geo_ratio = raw.get_double("spectrum.r", cfg.geo_ratio);
    cfg.dim = raw.get_int("spectrum.d", cfg.dim);
    cfg.values = raw.get_double_list("spectrum.values", cfg.values.empty() ? std::vector<double>{}
                                                                           : cfg.values);
    cfg.s = raw.get_double("theta0.s", cfg.s);
    cfg.normalize = raw.get_bool("theta0.normalize", cfg.normalize);

    const std::string sampler = raw.get_string("run.sampler", to_string(cfg.sampler_kind));
    const auto parsed_sampler = parse_sampler_kind(sampler);
    if (!parsed_sampler) {
        throw ConfigError(raw.origin_of("run.sampler"), "unknown sampler '" + sampler + "'");
    }
    cfg.sampler_kind = *parsed_sampler;

    if (const auto g = raw.get_optional_double("run.gamma")) {
        cfg.gamma = g;
        cfg.gamma_bound_fraction.reset();
        cfg.gamma_from_c_beta = false;
    }
    if (const auto f = raw.get_optional_double("run.gamma_bound_fraction")) {
        if (raw.has("run.gamma")) {
            throw ConfigError(raw.origin_of("run.gamma_bound_fraction"),
                              "gamma and gamma_bound_fraction are mutually exclusive");
        }
        cfg.gamma_bound_fraction = f;
        cfg.gamma.reset();
        cfg.gamma_from_c_beta = false;
    }

    cfg.n_steps = raw.get_int("run.n_steps", cfg.n_steps);
    cfg.n_replicas = static_cast<int>(raw.get_int("run.n_replicas", cfg.n_replicas));
    cfg.betas = raw.get_double_list("run.betas", cfg.betas);
    cfg.record_ratio = raw.get_double("run.record_ratio", cfg.record_ratio);
    if (raw.has("run.record_steps")) {
        cfg.record_steps = raw.get_int_list("run.record_steps", {});
    }
    cfg.n_samples = raw.get_int("run.n_samples", cfg.n_samples);
    cfg.beta = raw.get_double("run.beta", cfg.beta);
    cfg.beta_target = raw.get_double("run.beta_target", cfg.beta_target);
    const auto window = raw.get_double_list(
        "run.window", std::vector<double>{cfg.window.n_min, cfg.window.n_max});
    if (window.size() != 2) {
        throw ConfigError(raw.origin_of("run.window"), "window needs exactly two entries");
    }
    cfg.window = FitWindow{window[0], window[1]};
    cfg.slack = raw.get_double("run.slack", cfg.slack);
    if (const auto e = raw.get_optional_double("run.expected_exponent")) cfg.expected_exponent = e;
    cfg.exponent_tol = raw.get_double("run.exponent_tol", cfg.exponent_tol);
    cfg.final_ratio_max = raw.get_double("run.final_ratio_max", cfg.final_ratio_max);
    cfg.threads = static_cast<int>(raw.get_int("run.threads", cfg.threads));

    const auto unknown = raw.unused_keys();
    if (!unknown.empty()) {
        throw ConfigError(raw.origin_of(unknown.front()),
                          "unknown key '" + unknown.front() + "'");
    }

    if (overrides.seed) cfg.seed = *overrides.seed;
    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    if (overrides.replicas) cfg.n_replicas = *overrides.replicas;
    if (overrides.steps) cfg.n_steps = *overrides.steps;

    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    if (gamma && !(*gamma > 0.0)) {
        throw ConfigError("run.gamma", "precondition violated: gamma must be > 0");
    }
    if (gamma_bound_fraction && !(*gamma_bound_fraction > 0.0 && *gamma_bound_fraction <= 1.0)) {
        throw ConfigError("run.gamma_bound_fraction",
                          "precondition violated: fraction must lie in (0, 1]");
    }
    if (dim < 1) throw ConfigError("spectrum.d", "precondition violated: d must be >= 1");
    if (family != "power-law" && family != "geometric" && family != "explicit") {
        throw ConfigError("spectrum.family", "unknown family '" + family + "'");
    }
    if (family == "explicit" && values.empty()) {
        throw ConfigError("spectrum.values", "explicit family needs spectrum.values");
    }
    if (!(c > 0.0)) throw ConfigError("spectrum.c", "precondition violated: c must be > 0");
    if (!(p > 0.0)) throw ConfigError("spectrum.p", "precondition violated: p must be > 0");
    if (!(geo_ratio > 0.0 && geo_ratio < 1.0)) {
        throw ConfigError("spectrum.r", "precondition violated: r must lie in (0, 1)");
    }
    if (!(s > 0.5)) throw ConfigError("theta0.s", "precondition violated: s must be > 1/2");
    if (n_steps < 1) throw ConfigError("run.n_steps", "precondition violated: n_steps >= 1");
    if (n_replicas < 1) {
        throw ConfigError("run.n_replicas", "precondition violated: n_replicas >= 1");
    }
    if (n_samples < 100) {
        throw ConfigError("run.n_samples", "precondition violated: n_samples >= 100");
    }
    if (!(record_ratio > 1.0)) {
        throw ConfigError("run.record_ratio", "precondition violated: record_ratio > 1");
    }
    if (!(window.n_min > 0.0 && window.n_min < window.n_max)) {
        throw ConfigError("run.window", "precondition violated: 0 < n_min < n_max");
    }
    if (betas.empty() && (kind == ExperimentKind::kSgdRate ||
                          kind == ExperimentKind::kAsConvergence ||
                          kind == ExperimentKind::kMeanRate)) {
        throw ConfigError("run.betas", "precondition violated: betas must be nonempty");
    }
}

Spectrum ExperimentConfig::build_spectrum() const {
    if (family == "power-law") return Spectrum::power_law(c, p, static_cast<std::size_t>(dim));
    if (family == "geometric") {
        return Spectrum::geometric(c, geo_ratio, static_cast<std::size_t>(dim));
    }
    std::vector<double> vals = values;
    vals.resize(static_cast<std::size_t>(dim) < vals.size() ? static_cast<std::size_t>(dim)
                                                            : vals.size());
    return Spectrum::from_values(std::move(vals));
}

HilbertVector ExperimentConfig::build_theta0(const Spectrum& spectrum) const {
    return power_law_vector(spectrum.dim(), s, normalize);
}

double ExperimentConfig::resolve_gamma(const Spectrum& spectrum) const {
    if (gamma) return *gamma;
    if (gamma_bound_fraction) return 2.0 * *gamma_bound_fraction / spectrum.trace();
    if (gamma_from_c_beta) return 1.0 / (spectrum.k_beta(beta_target) + 1.0);
    return 0.0;
}

RunOutcome run_experiment(const ExperimentConfig& config) {
    try {
        switch (config.kind) {
            case ExperimentKind::kMeanRate: return run_mean_rate(config);
            case ExperimentKind::kSgdRate: return run_sgd_rate(config);
            case ExperimentKind::kRecursion: return run_recursion(config);
            case ExperimentKind::kLemmas: return run_lemmas(config);
            case ExperimentKind::kAsConvergence: return run_as_convergence(config);
            case ExperimentKind::kCrossMoment: return run_cross_moment(config);
        }
        return RunOutcome{2, "unknown experiment", {}, {}};
    } catch (const std::invalid_argument& e) {
        return RunOutcome{2, e.what(), {}, {}};
    } catch (const std::domain_error& e) {
        return RunOutcome{2, e.what(), {}, {}};
    }
}

int emit_plotdata(const std::filesystem::path& csv_path, std::optional<double> beta_filter,
                  const std::optional<std::filesystem::path>& out_path, std::string& error) {
    std::ifstream in(csv_path);
    if (!in) {
        error = "cannot open " + csv_path.string();
        return 2;
    }
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        error = "missing columns: expected header '" + std::string(kCsvHeader) + "'";
        return 2;
    }

    struct Row {
        long long n;
        double beta, mean, se;
        std::optional<double> bound;
    };
    std::vector<Row> rows;
    std::string experiment = "unknown";
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string tag = "# experiment: ";
            if (line.rfind(tag, 0) == 0) experiment = line.substr(tag.size());
            continue;
        }
        std::vector<std::string> fields;
        std::istringstream fs(line);
        std::string field;
        while (std::getline(fs, field, ',')) fields.push_back(field);
        while (fields.size() < 6) fields.push_back("");
        if (fields.size() != 6) {
            error = "missing columns in row: " + line;
            return 2;
        }
        Row row;
        row.n = std::atoll(fields[0].c_str());
        row.beta = std::atof(fields[1].c_str());
        row.mean = std::atof(fields[2].c_str());
        row.se = std::atof(fields[3].c_str());
        if (!fields[4].empty()) row.bound = std::atof(fields[4].c_str());
        rows.push_back(row);
    }
    if (rows.empty()) {
        error = "empty results";
        return 2;
    }

    const double beta = beta_filter.value_or(rows.front().beta);
    std::vector<Row> selected;
    bool with_band = false;
    for (const Row& row : rows) {
        if (row.beta != beta || row.n <= 0 || !(row.mean > 0.0)) continue;
        selected.push_back(row);
        if (row.se > 0.0) with_band = true;
    }
    if (selected.empty()) {
        error = "empty results after filtering beta = " + format_g17(beta);
        return 2;
    }

    std::string body = "# experiment: " + experiment + "\n";
    body += with_band ? "# columns: log10_n log10_mean log10_lo log10_hi\n"
                      : "# columns: log10_n log10_mean log10_bound\n";
    for (const Row& row : selected) {
        body += format_g17(std::log10(static_cast<double>(row.n))) + " " +
                format_g17(std::log10(row.mean));
        if (with_band) {
            const double lo = row.mean - row.se > 0.0 ? row.mean - row.se : row.mean / 10.0;
            body += " " + format_g17(std::log10(lo)) + " " +
                    format_g17(std::log10(row.mean + row.se));
        } else if (row.bound && *row.bound > 0.0) {
            body += " " + format_g17(std::log10(*row.bound));
        }
        body += "\n";
    }

    const std::filesystem::path target =
        out_path ? *out_path : std::filesystem::path(csv_path).replace_extension(".plot");
    std::ofstream out(target, std::ios::binary);
    out << body;
    if (!out) {
        error = "cannot write " + target.string();
        return 2;
    }
    return 0;
}

}  // namespace sgdlab
