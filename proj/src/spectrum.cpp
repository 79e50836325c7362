#include "sgdlab/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sgdlab/numeric.hpp"

namespace sgdlab {

namespace {

void require_dim(std::size_t dim) {
    if (dim < 1) throw std::invalid_argument("spectrum: dim must be >= 1");
}

}  // namespace

Spectrum::Spectrum(std::vector<double> values, SpectrumFamily family,
                   std::optional<double> power_exponent)
    : values_(std::move(values)), family_(family), power_exponent_(power_exponent) {
    if (values_.empty()) throw std::invalid_argument("spectrum: dim must be >= 1");
    for (double v : values_) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("spectrum: eigenvalues must be positive and finite");
        }
    }
    std::sort(values_.begin(), values_.end(), std::greater<double>());
    // Rescale by 2^-k so the top eigenvalue drops strictly below 1/2. A
    // power-of-two factor leaves every mantissa untouched.
    while (values_.front() * rescale_ >= 0.5) rescale_ *= 0.5;
    if (rescale_ != 1.0) {
        for (double& v : values_) v *= rescale_;
    }
}

Spectrum Spectrum::power_law(double c, double p, std::size_t dim) {
    require_dim(dim);
    if (!(c > 0.0) || !(p > 0.0)) {
        throw std::invalid_argument("spectrum: power-law parameters must be positive");
    }
    std::vector<double> values(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        values[i] = c * std::pow(static_cast<double>(i + 1), -p);
    }
    return Spectrum(std::move(values), SpectrumFamily::kPowerLaw, p);
}

Spectrum Spectrum::geometric(double c, double ratio, std::size_t dim) {
    require_dim(dim);
    if (!(c > 0.0) || !(ratio > 0.0) || !(ratio < 1.0)) {
        throw std::invalid_argument("spectrum: geometric needs c > 0 and ratio in (0,1)");
    }
    std::vector<double> values(dim);
    double v = c;
    for (std::size_t i = 0; i < dim; ++i) {
        values[i] = v;
        v *= ratio;
    }
    return Spectrum(std::move(values), SpectrumFamily::kGeometric, std::nullopt);
}

Spectrum Spectrum::from_values(std::vector<double> values) {
    require_dim(values.size());
    return Spectrum(std::move(values), SpectrumFamily::kExplicit, std::nullopt);
}

double Spectrum::trace() const {
    CompensatedSum acc;
    for (double v : values_) acc.add(v);
    return acc.value();
}

double Spectrum::k_beta(double beta) const {
    CompensatedSum acc;
    for (double v : values_) acc.add(std::pow(v, 1.0 - beta));
    return acc.value();
}

std::string to_string(SpectrumFamily family) {
    switch (family) {
        case SpectrumFamily::kPowerLaw: return "power-law";
        case SpectrumFamily::kGeometric: return "geometric";
        case SpectrumFamily::kExplicit: return "explicit";
    }
    return "unknown";
}

}  // namespace sgdlab
