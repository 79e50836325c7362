#include "sgdlab/hilbert.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgdlab/numeric.hpp"

namespace sgdlab {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

// growth of a partial sum between dim/2 and dim terms
bool tail_growing(const std::vector<double>& terms) {
    const std::size_t d = terms.size();
    CompensatedSum acc;
    double at_half = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        acc.add(terms[i]);
        if (i + 1 == d / 2) at_half = acc.value();
    }
    const double full = acc.value();
    if (d < 2 || !(at_half > 0.0)) return !std::isfinite(full);
    if (!std::isfinite(full)) return true;
    return full / at_half > 1.05;
}

}  // namespace

double phi_norm(const HilbertVector& theta, const Spectrum& spec, double beta) {
    require_same_dim(theta.size(), spec.dim(), "phi_norm");
    CompensatedSum acc;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (theta[i] == 0.0) continue;
        const double term = std::pow(spec[i], -beta) * theta[i] * theta[i];
        if (!std::isfinite(term)) return std::numeric_limits<double>::infinity();
        acc.add(term);
    }
    const double total = acc.value();
    return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
}

HilbertVector apply_operator_power(const HilbertVector& theta, const Spectrum& spec,
                                   double kappa) {
    require_same_dim(theta.size(), spec.dim(), "apply_operator_power");
    HilbertVector out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        out[i] = std::pow(spec[i], kappa) * theta[i];
    }
    return out;
}

HilbertVector sgd_update(const HilbertVector& theta, const HilbertVector& x, double gamma) {
    require_same_dim(theta.size(), x.size(), "sgd_update");
    if (!(gamma >= 0.0)) throw std::invalid_argument("sgd_update: gamma must be >= 0");
    const double coef = gamma * inner_product(theta, x);
    HilbertVector out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        out[i] = theta[i] - coef * x[i];
    }
    return out;
}

HilbertVector power_law_vector(std::size_t dim, double s, bool normalize) {
    HilbertVector v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        v[i] = std::pow(static_cast<double>(i + 1), -s);
    }
    if (normalize) {
        const double norm = std::sqrt(squared_norm(v));
        for (double& c : v) c /= norm;
    }
    return v;
}

RegularityReport regularity(const Spectrum& spec, std::optional<double> theta_power_s,
                            std::span<const double> betas) {
    if (theta_power_s && !(*theta_power_s > 0.5)) {
        throw std::invalid_argument("regularity: theta family needs s > 1/2");
    }
    RegularityReport report;
    report.betas.assign(betas.begin(), betas.end());

    if (spec.family() == SpectrumFamily::kPowerLaw) {
        const double p = *spec.power_law_exponent();
        report.alpha_data = 1.0 - 1.0 / p;
        if (theta_power_s) report.alpha_theta = (2.0 * *theta_power_s - 1.0) / p;
    } else if (spec.family() == SpectrumFamily::kGeometric) {
        report.alpha_data = 1.0;
        if (theta_power_s) report.alpha_theta = std::numeric_limits<double>::infinity();
    }

    const std::size_t d = spec.dim();
    std::vector<double> terms(d);
    for (double beta : betas) {
        for (std::size_t i = 0; i < d; ++i) terms[i] = std::pow(spec[i], 1.0 - beta);
        report.data_divergent.push_back(tail_growing(terms));
        if (theta_power_s) {
            for (std::size_t i = 0; i < d; ++i) {
                const double t = std::pow(static_cast<double>(i + 1), -*theta_power_s);
                terms[i] = std::pow(spec[i], -beta) * t * t;
            }
            report.theta_divergent.push_back(tail_growing(terms));
        }
    }
    return report;
}

}  // namespace sgdlab
