#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sgdlab/spectrum.hpp"

namespace sgdlab {

// Coefficients of a vector in the orthonormal eigenbasis of the covariance
// operator; samples drawn by the feature distributions use the same layout.
using HilbertVector = std::vector<double>;

// phi_beta(theta) = sum_i lambda_i^(-beta) theta_i^2. Overflowing terms make
// the result +infinity, which is a legitimate value, not an error.
double phi_norm(const HilbertVector& theta, const Spectrum& spec, double beta);

// coefficient-wise lambda_i^kappa * theta_i
HilbertVector apply_operator_power(const HilbertVector& theta, const Spectrum& spec,
                                   double kappa);

// one update step: theta - gamma * <theta, x> * x
HilbertVector sgd_update(const HilbertVector& theta, const HilbertVector& x, double gamma);

// theta_i = (i+1)^-s, optionally normalized to unit Euclidean norm
HilbertVector power_law_vector(std::size_t dim, double s, bool normalize = true);

struct RegularityReport {
    // largest beta with phi_beta(theta) finite, for theta_i = i^-s families
    std::optional<double> alpha_theta;
    // largest beta with sum lambda_i^(1-beta) finite
    std::optional<double> alpha_data;
    std::vector<double> betas;
    std::vector<bool> data_divergent;   // tail growth of sum lambda^(1-beta)
    std::vector<bool> theta_divergent;  // tail growth of sum lambda^-beta theta^2
};

// Analytic exponents where the family admits them plus a crude numeric
// divergence probe: the partial sum at dim/2 versus dim, flagged when the
// growth ratio exceeds 1.05.
RegularityReport regularity(const Spectrum& spec, std::optional<double> theta_power_s,
                            std::span<const double> betas);

}  // namespace sgdlab
