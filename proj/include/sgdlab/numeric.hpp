#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sgdlab {

// Neumaier-compensated accumulator. Summation order is part of the contract:
// callers add terms in a fixed index order so results are bit-reproducible.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_total(std::span<const double> xs) {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

inline double inner_product(std::span<const double> a, std::span<const double> b) {
    CompensatedSum acc;
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) acc.add(a[i] * b[i]);
    return acc.value();
}

inline double squared_norm(std::span<const double> a) {
    CompensatedSum acc;
    for (double x : a) acc.add(x * x);
    return acc.value();
}

inline bool all_finite(std::span<const double> a) {
    for (double x : a) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

// Welford running mean/variance; updates happen in a fixed order so repeated
// runs produce identical doubles.
class RunningStat {
public:
    void add(double x) {
        ++count_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += delta * (x - mean_);
    }

    long long count() const { return count_; }
    double mean() const { return mean_; }

    double variance() const {
        return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
    }

    // raw second moment E[x^2]
    double second_moment() const {
        return count_ > 0 ? m2_ / static_cast<double>(count_) + mean_ * mean_ : 0.0;
    }

    // standard error of the mean; zero by convention for a single observation
    double stderr_of_mean() const {
        return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
    }

private:
    long long count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

}  // namespace sgdlab
