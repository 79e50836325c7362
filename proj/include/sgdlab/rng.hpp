#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace sgdlab {

// Splittable counter-style generator (splitmix64 core). A stream is keyed by
// (seed, stream index), so replica k of a run always sees the same draws no
// matter how many workers execute and in which order. Each stream is owned by
// a single worker; distinct streams are statistically independent.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) {
        state_ = mix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1));
        state_ = mix(state_ ^ 0xbf58476d1ce4e5b9ULL);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // uniform on [0,1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0,1]
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; second value of each pair is cached
    double gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Gamma(shape, 1) for 0 < shape < 1, Ahrens-Dieter rejection (algorithm GS).
    // Valid on the whole (0,1) shape range; underflow of p^(1/shape) to zero is
    // the correctly rounded value of an astronomically small draw.
    double gamma_small_shape(double shape) {
        if (!(shape > 0.0 && shape < 1.0)) {
            throw std::domain_error("gamma_small_shape: shape must be in (0,1)");
        }
        const double b = 1.0 + shape * 0.36787944117144232160;  // 1 + shape/e
        for (;;) {
            const double p = b * uniform();
            const double v = uniform();
            if (p <= 1.0) {
                const double x = std::pow(p, 1.0 / shape);
                if (v <= std::exp(-x)) return x;
            } else {
                const double x = -std::log((b - p) / shape);
                if (v <= std::pow(x, shape - 1.0)) return x;
            }
        }
    }

    // index into a normalized cumulative-probability table
    std::size_t pick_index(std::span<const double> cdf) {
        const double u = uniform();
        std::size_t lo = 0, hi = cdf.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cdf[mid] <= u) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        return lo;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace sgdlab
