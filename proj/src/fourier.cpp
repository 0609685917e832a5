#include "hcx/fourier.hpp"

#include "hcx/types.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hcx {

namespace {

using cd = std::complex<double>;

Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> fft;
    return fft;
}

void require_valid_size(Eigen::Index n) {
    if (n < 4 || n % 2 != 0) {
        std::ostringstream err;
        err << "periodic grid size must be even and >= 4, got " << n;
        throw ConfigError(err.str());
    }
}

// Applies a per-mode multiplier. `nyquist` receives the Nyquist factor,
// `mode` the factor for every other signed frequency k.
template <class Mode, class Nyquist>
PeriodicGrid apply_multiplier(const PeriodicGrid& grid, Mode&& mode, Nyquist&& nyquist) {
    const Eigen::Index n = grid.size();
    Eigen::MatrixXcd c = spectrum(grid);
    for (Eigen::Index b = 0; b < n; ++b) {
        const int k = symmetric_frequency(b, n);
        const cd factor = (b == n / 2) ? cd(nyquist(), 0.0) : mode(k);
        c.row(b) *= factor;
    }
    return from_spectrum(c);
}

} // namespace

PeriodicGrid::PeriodicGrid(Eigen::MatrixXd values) : values_(std::move(values)) {
    require_valid_size(values_.rows());
}

PeriodicGrid PeriodicGrid::zeros(Eigen::Index n, Eigen::Index dim) {
    return PeriodicGrid(Eigen::MatrixXd::Zero(n, dim));
}

double PeriodicGrid::theta(Eigen::Index i) const {
    return kTwoPi * static_cast<double>(i) / static_cast<double>(size());
}

int symmetric_frequency(Eigen::Index index, Eigen::Index n) {
    return static_cast<int>(index < n / 2 ? index : index - n);
}

Eigen::MatrixXcd spectrum(const PeriodicGrid& grid) {
    const Eigen::Index n = grid.size();
    Eigen::MatrixXcd out(n, grid.dim());
    std::vector<cd> in(static_cast<std::size_t>(n));
    std::vector<cd> freq;
    auto& fft = fft_engine();
    for (Eigen::Index c = 0; c < grid.dim(); ++c) {
        for (Eigen::Index i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = grid.values()(i, c);
        fft.fwd(freq, in);
        for (Eigen::Index i = 0; i < n; ++i) out(i, c) = freq[static_cast<std::size_t>(i)];
    }
    return out;
}

PeriodicGrid from_spectrum(const Eigen::MatrixXcd& coeffs) {
    const Eigen::Index n = coeffs.rows();
    Eigen::MatrixXd out(n, coeffs.cols());
    std::vector<cd> in(static_cast<std::size_t>(n));
    std::vector<cd> time;
    auto& fft = fft_engine();
    for (Eigen::Index c = 0; c < coeffs.cols(); ++c) {
        for (Eigen::Index i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = coeffs(i, c);
        fft.inv(time, in);
        for (Eigen::Index i = 0; i < n; ++i) out(i, c) = time[static_cast<std::size_t>(i)].real();
    }
    return PeriodicGrid(std::move(out));
}

PeriodicGrid shift(const PeriodicGrid& grid, double rho) {
    if (rho == 0.0) {
        return grid;
    }
    const double half = static_cast<double>(grid.size() / 2);
    return apply_multiplier(
        grid, [rho](int k) { return std::polar(1.0, k * rho); }, [&] { return std::cos(half * rho); });
}

PeriodicGrid differentiate(const PeriodicGrid& grid) {
    return apply_multiplier(
        grid, [](int k) { return cd(0.0, static_cast<double>(k)); }, [] { return 0.0; });
}

Eigen::VectorXd trig_interp_spectrum(const Eigen::MatrixXcd& coeffs, double theta) {
    const Eigen::Index n = coeffs.rows();
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(coeffs.cols());
    for (Eigen::Index b = 0; b < n; ++b) {
        if (b == n / 2) {
            acc += coeffs.row(b).transpose() * std::cos(0.5 * static_cast<double>(n) * theta);
        } else {
            acc += coeffs.row(b).transpose() * std::polar(1.0, symmetric_frequency(b, n) * theta);
        }
    }
    return acc.real() / static_cast<double>(n);
}

Eigen::VectorXd trig_interp(const PeriodicGrid& grid, double theta) {
    // Grid angles return the stored sample bit for bit.
    const double idx = std::round(theta / kTwoPi * static_cast<double>(grid.size()));
    if (idx >= 0.0 && idx < static_cast<double>(grid.size()) && grid.theta(static_cast<Eigen::Index>(idx)) == theta) {
        return grid.row(static_cast<Eigen::Index>(idx)).transpose();
    }
    return trig_interp_spectrum(spectrum(grid), theta);
}

PeriodicGrid solve_shift_equation(double alpha, double beta, double rho, const PeriodicGrid& eta,
                                  double small_divisor, bool drop_kernel) {
    const Eigen::Index n = eta.size();
    const double half = static_cast<double>(n / 2);
    Eigen::MatrixXcd c = spectrum(eta);
    for (Eigen::Index b = 0; b < n; ++b) {
        const int k = symmetric_frequency(b, n);
        const cd divisor = (b == n / 2) ? cd(alpha - beta * std::cos(half * rho), 0.0)
                                        : alpha - beta * std::polar(1.0, k * rho);
        if (std::abs(divisor) < small_divisor) {
            if (!drop_kernel) {
                std::ostringstream err;
                err << "small divisor " << std::abs(divisor) << " at frequency " << k;
                throw std::domain_error(err.str());
            }
            c.row(b).setZero();
            continue;
        }
        c.row(b) /= divisor;
    }
    return from_spectrum(c);
}

} // namespace hcx
