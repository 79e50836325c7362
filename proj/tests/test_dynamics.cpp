#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sgdlab/dynamics.hpp"
#include "sgdlab/numeric.hpp"

using namespace sgdlab;

namespace {

IterationConfig base_config(SamplerKind kind, std::size_t dim, std::uint64_t seed) {
    IterationConfig config;
    config.sampler = SamplerSpec{kind, Spectrum::power_law(0.4, 2.0, dim), seed};
    config.theta0 = power_law_vector(dim, 2.0);
    config.record_betas = {0.0};
    return config;
}

}  // namespace

TEST_CASE("record schedules") {
    const RecordSchedule geo = RecordSchedule::geometric(1000, 1.2);
    CHECK(geo.steps.front() == 0);
    CHECK(geo.steps.back() == 1000);
    for (std::size_t k = 1; k < geo.steps.size(); ++k) {
        CHECK(geo.steps[k] > geo.steps[k - 1]);
    }
    CHECK(std::find(geo.steps.begin(), geo.steps.end(), 1) != geo.steps.end());

    const RecordSchedule ex = RecordSchedule::from_steps({10, 1, 10}, 100);
    CHECK(ex.steps == std::vector<long long>{0, 1, 10, 100});
    CHECK_THROWS_AS(RecordSchedule::from_steps({-1}, 100), std::invalid_argument);
    CHECK_THROWS_AS(RecordSchedule::from_steps({200}, 100), std::invalid_argument);
}

TEST_CASE("zero step size freezes every recorded functional") {
    IterationConfig config = base_config(SamplerKind::kGff, 12, 5);
    config.gamma = 0.0;
    config.n_steps = 200;
    config.record_betas = {0.0, 0.5};
    config.schedule = RecordSchedule::geometric(200);
    const TrajectoryRecord rec = sgd_trajectory(config, 0);
    const double phi0 = phi_norm(config.theta0, config.sampler.spectrum, 0.0);
    const double phi5 = phi_norm(config.theta0, config.sampler.spectrum, 0.5);
    for (std::size_t k = 0; k < rec.steps.size(); ++k) {
        CHECK(rec.phi[0][k] == phi0);
        CHECK(rec.phi[1][k] == phi5);
    }
}

TEST_CASE("zero start is a fixed point") {
    IterationConfig config = base_config(SamplerKind::kGammaSymmetric, 8, 6);
    config.theta0.assign(8, 0.0);
    config.gamma = 0.5;
    config.n_steps = 50;
    config.schedule = RecordSchedule::geometric(50);
    const TrajectoryRecord rec = sgd_trajectory(config, 0);
    for (double v : rec.phi[0]) CHECK(v == 0.0);
}

TEST_CASE("bounded sampler at the stability boundary preserves the norm exactly") {
    IterationConfig config = base_config(SamplerKind::kCoordinateBounded, 20, 7);
    config.gamma_bound_fraction = 1.0;
    config.n_steps = 20000;
    config.schedule = RecordSchedule::geometric(20000);
    const double initial = squared_norm(config.theta0);
    const TrajectoryRecord rec = sgd_trajectory(config, 0);
    CHECK(rec.norm_nonincreasing);
    CHECK(rec.final_sq_norm == initial);
    for (double v : rec.phi[0]) CHECK(v == initial);
}

TEST_CASE("bounded sampler below the boundary contracts pathwise") {
    IterationConfig config = base_config(SamplerKind::kCoordinateBounded, 20, 8);
    config.gamma_bound_fraction = 0.75;
    config.n_steps = 20000;
    config.n_replicas = 10;
    config.schedule = RecordSchedule::geometric(20000);
    const EnsembleStats stats = ensemble(config);
    const double initial = squared_norm(config.theta0);
    CHECK(stats.diverged_replicas.empty());
    for (int r = 0; r < stats.n_replicas; ++r) {
        CHECK(stats.monotone[r] == 1);
        CHECK(stats.final_sq_norm[r] < 1e-3 * initial);
    }
}

TEST_CASE("mean iterate closed form") {
    const Spectrum spec = Spectrum::from_values({0.4, 0.2, 0.1});
    const HilbertVector theta0{1.0, 1.0, 1.0};

    CHECK(mean_iterate(theta0, spec, 1.0, 0) == theta0);

    const HilbertVector one = mean_iterate(theta0, spec, 1.0, 1);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(one[i] == doctest::Approx(1.0 - spec[i]).epsilon(1e-12));
    }

    const HilbertVector two = mean_iterate(theta0, spec, 1.0, 2);
    CHECK(two[0] == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(two[1] == doctest::Approx(0.64).epsilon(1e-12));
    CHECK(two[2] == doctest::Approx(0.81).epsilon(1e-12));

    CHECK_THROWS_AS(mean_iterate(theta0, spec, 2.6, 1), std::invalid_argument);
}

TEST_CASE("single-replica ensemble degenerates to the trajectory") {
    IterationConfig config = base_config(SamplerKind::kGff, 10, 9);
    config.gamma = 0.3;
    config.n_steps = 100;
    config.schedule = RecordSchedule::geometric(100);
    const EnsembleStats stats = ensemble(config);
    const TrajectoryRecord rec = sgd_trajectory(config, 0);
    for (std::size_t k = 0; k < stats.steps.size(); ++k) {
        CHECK(stats.phi_mean[0][k] == rec.phi[0][k]);
        CHECK(stats.phi_se[0][k] == 0.0);
    }
}

TEST_CASE("ensemble means follow the deterministic mean dynamics") {
    IterationConfig config = base_config(SamplerKind::kGff, 30, 12);
    config.gamma = 0.5;
    config.n_steps = 100;
    config.n_replicas = 4000;
    config.schedule = RecordSchedule::from_steps({10, 100}, 100);
    const EnsembleStats stats = ensemble(config);
    const MeanEvolutionCheck check =
        mean_evolution_check(stats, config.sampler.spectrum, config.theta0, 4.0);
    CHECK(check.violations == 0);
    // record 0 carries no moved replicas; records 10 and 100 score every coordinate
    CHECK(check.compared == 2 * 30);
    CHECK(check.unresolved == 30);
    CHECK(check.worst_z <= 4.0);
}

TEST_CASE("one-step second moment matches the closed form for gff") {
    // E|theta(1)|^2 = phi_0 - 2 gamma phi_-1 + gamma^2 (phi_-1 K_0 + 2 sum theta^2 lambda^2)
    IterationConfig config = base_config(SamplerKind::kGff, 50, 13);
    config.gamma = 0.2;
    config.n_steps = 1;
    config.n_replicas = 20000;
    config.schedule = RecordSchedule::geometric(1);
    const EnsembleStats stats = ensemble(config);

    const Spectrum& spec = config.sampler.spectrum;
    const double phi0 = phi_norm(config.theta0, spec, 0.0);
    const double phim1 = phi_norm(config.theta0, spec, -1.0);
    double extra = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        extra += config.theta0[i] * config.theta0[i] * spec[i] * spec[i];
    }
    const double third = phim1 * spec.trace() + 2.0 * extra;
    const double expected =
        phi0 - 2.0 * config.gamma * phim1 + config.gamma * config.gamma * third;

    const std::size_t last = stats.steps.size() - 1;
    CHECK(std::abs(stats.phi_mean[0][last] - expected) <= 4.0 * stats.phi_se[0][last]);
}

TEST_CASE("recursion identity is exact for zero gamma and for atom enumeration") {
    const HilbertVector theta = power_law_vector(30, 2.0);
    const SamplerSpec gff{SamplerKind::kGff, Spectrum::power_law(0.4, 2.0, 30), 14};
    const RecursionCheck frozen = recursion_check(theta, gff, 0.0, 0.5, 200);
    CHECK(frozen.lhs == frozen.rhs);
    CHECK(frozen.se_units == 0.0);

    const SamplerSpec atoms{SamplerKind::kCoordinateBounded, Spectrum::power_law(0.4, 2.0, 30),
                            14};
    const RecursionCheck exact = recursion_check(theta, atoms, 0.8, 0.5, 0);
    CHECK(exact.exact);
    CHECK(exact.rel_error <= 1e-10);
    // third term enumerates to trace * phi_{beta-1}
    const double expected_third =
        atoms.spectrum.trace() * phi_norm(theta, atoms.spectrum, -0.5);
    CHECK(exact.third_term == doctest::Approx(expected_third).epsilon(1e-12));
}

TEST_CASE("recursion identity holds within Monte Carlo error") {
    const HilbertVector theta = power_law_vector(60, 2.0);
    const SamplerSpec gff{SamplerKind::kGff, Spectrum::power_law(0.4, 2.0, 60), 15};
    const RecursionCheck mc = recursion_check(theta, gff, 1.0, 0.0, 30000);
    CHECK_FALSE(mc.exact);
    CHECK(mc.se_units <= 3.0);

    const SamplerSpec gsym{SamplerKind::kGammaSymmetric, Spectrum::power_law(0.4, 2.0, 25), 16};
    const RecursionCheck mc2 = recursion_check(theta.empty() ? theta : power_law_vector(25, 2.0),
                                               gsym, 0.5, 0.3, 20000);
    CHECK(mc2.se_units <= 3.0);
}

TEST_CASE("illegal step sizes divergence is detected and reported") {
    IterationConfig config = base_config(SamplerKind::kGff, 10, 17);
    config.gamma = 1e8;
    config.n_steps = 400;
    config.n_replicas = 4;
    config.schedule = RecordSchedule::geometric(400);
    const EnsembleStats stats = ensemble(config);
    CHECK(stats.diverged_replicas.size() == 4);
    const TrajectoryRecord rec = sgd_trajectory(config, 0);
    CHECK(rec.diverged);
    CHECK(rec.diverged_at > 0);
}

TEST_CASE("martingale diagnostic is exactly zero in the deterministic case") {
    IterationConfig config = base_config(SamplerKind::kCoordinateBounded, 1, 18);
    config.theta0 = HilbertVector{1.0};
    config.gamma_bound_fraction = 0.25;
    config.n_steps = 50;
    config.schedule = RecordSchedule::from_steps({1, 10}, 50);
    const MartingaleStats stats = martingale_diagnostic(config);
    for (std::size_t k = 0; k < stats.steps.size(); ++k) {
        CHECK(stats.mean[k] == 0.0);
        CHECK(stats.count[k] == 1);
    }
}

TEST_CASE("martingale differences have zero mean across replicas") {
    IterationConfig config = base_config(SamplerKind::kGff, 20, 19);
    config.gamma = 0.5;
    config.n_steps = 50;
    config.n_replicas = 2000;
    config.schedule = RecordSchedule::from_steps({1, 10, 50}, 50);
    const MartingaleStats stats = martingale_diagnostic(config);
    for (std::size_t k = 0; k < stats.steps.size(); ++k) {
        if (stats.steps[k] == 0) continue;
        CHECK(std::abs(stats.mean[k]) <= 3.0 * stats.se[k]);
    }

    IterationConfig bad = config;
    bad.theta0.assign(20, 0.0);
    CHECK_THROWS_AS(martingale_diagnostic(bad), std::invalid_argument);
}

TEST_CASE("h evaluates to lambda_1 on the first basis vector") {
    // h(z) = sum lambda_i z_i^2; the diagnostic at theta0 = e_1 uses exactly it
    const Spectrum spec = Spectrum::power_law(0.4, 2.0, 5);
    CompensatedSum h;
    const HilbertVector e1{1.0, 0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < 5; ++i) h.add(spec[i] * e1[i] * e1[i]);
    CHECK(h.value() == 0.4);
}

TEST_CASE("identical configs reproduce bit-identical ensembles across thread counts") {
    IterationConfig config = base_config(SamplerKind::kGammaSymmetric, 15, 20);
    config.gamma = 0.1;
    config.n_steps = 300;
    config.n_replicas = 16;
    config.record_betas = {0.0, 1.0};
    config.schedule = RecordSchedule::geometric(300);

    config.max_threads = 1;
    const EnsembleStats serial = ensemble(config);
    config.max_threads = 4;
    const EnsembleStats threaded = ensemble(config);

    CHECK(serial.phi_mean == threaded.phi_mean);
    CHECK(serial.phi_se == threaded.phi_se);
    CHECK(serial.coeff_mean == threaded.coeff_mean);
    CHECK(serial.final_sq_norm == threaded.final_sq_norm);
}

TEST_CASE("config validation rejects malformed iterations") {
    IterationConfig config = base_config(SamplerKind::kGff, 5, 21);
    config.gamma = 0.1;
    config.n_steps = 10;
    config.schedule = RecordSchedule::geometric(10);

    IterationConfig bad = config;
    bad.theta0.resize(4);
    CHECK_THROWS_AS(sgd_trajectory(bad, 0), std::invalid_argument);

    bad = config;
    bad.schedule.steps.back() = 9;
    CHECK_THROWS_AS(sgd_trajectory(bad, 0), std::invalid_argument);

    bad = config;
    bad.gamma = -0.5;
    CHECK_THROWS_AS(sgd_trajectory(bad, 0), std::invalid_argument);
}
