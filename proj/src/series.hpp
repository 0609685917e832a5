#pragma once

// Truncated power-series kernels on raw coefficient arrays of length deg+1.

#include <cmath>
#include <cstddef>

namespace hcx::series {

inline void mul(const double* a, const double* b, double* out, std::size_t deg) {
    for (std::size_t k = 0; k <= deg; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= k; ++j) {
            acc += a[j] * b[k - j];
        }
        out[k] = acc;
    }
}

/// out = a^p, requires a[0] > 0.
inline void pow(const double* a, double p, double* out, std::size_t deg) {
    out[0] = std::pow(a[0], p);
    for (std::size_t k = 1; k <= deg; ++k) {
        double acc = 0.0;
        for (std::size_t j = 1; j <= k; ++j) {
            acc += (p * static_cast<double>(j) - static_cast<double>(k - j)) * a[j] * out[k - j];
        }
        out[k] = acc / (static_cast<double>(k) * a[0]);
    }
}

/// Evaluates sum_k c[k] s^k by Horner's rule.
inline double horner(const double* c, std::size_t deg, double s) {
    double acc = c[deg];
    for (std::size_t k = deg; k-- > 0;) {
        acc = acc * s + c[k];
    }
    return acc;
}

} // namespace hcx::series
