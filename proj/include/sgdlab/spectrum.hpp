#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace sgdlab {

enum class SpectrumFamily { kPowerLaw, kGeometric, kExplicit };

// Eigenvalues of the covariance operator in its orthonormal eigenbasis,
// non-increasing and confined to (0, 1/2). Lists that violate the upper
// bound are rescaled by a power of two (exact in binary floating point)
// and the factor is kept as metadata.
class Spectrum {
public:
    // trivial valid spectrum; placeholder for config structs built in steps
    Spectrum() : values_{0.25}, family_(SpectrumFamily::kExplicit) {}

    static Spectrum power_law(double c, double p, std::size_t dim);
    static Spectrum geometric(double c, double ratio, std::size_t dim);
    static Spectrum from_values(std::vector<double> values);

    std::size_t dim() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& eigenvalues() const { return values_; }

    SpectrumFamily family() const { return family_; }
    double rescale_factor() const { return rescale_; }
    std::optional<double> power_law_exponent() const { return power_exponent_; }

    double max_eigenvalue() const { return values_.front(); }
    double min_eigenvalue() const { return values_.back(); }

    // trace = sum of eigenvalues; for the single-coordinate sampler this is
    // the constant squared norm of every draw
    double trace() const;

    // sum of lambda_i^(1-beta) over the truncation
    double k_beta(double beta) const;

private:
    Spectrum(std::vector<double> values, SpectrumFamily family,
             std::optional<double> power_exponent);

    std::vector<double> values_;
    SpectrumFamily family_;
    double rescale_ = 1.0;
    std::optional<double> power_exponent_;
};

std::string to_string(SpectrumFamily family);

}  // namespace sgdlab
