#pragma once

#include <Eigen/Dense>

#include <complex>

namespace hcx {

/// Samples of a (vector-valued) 2π-periodic function at θ_i = 2πi/N.
/// Row i holds the sample at θ_i, column c the c-th component.
///
/// N must be even and at least 4. Coefficients follow
/// a(θ_i) = (1/N) Σ_k â(k) e^{jkθ_i} with k in the symmetric range
/// -N/2 .. N/2-1; the Nyquist mode is treated as the real cosine
/// (1/N) â(N/2) cos(Nθ/2), which keeps real data real.
class PeriodicGrid {
public:
    PeriodicGrid() = default;
    explicit PeriodicGrid(Eigen::MatrixXd values);

    static PeriodicGrid zeros(Eigen::Index n, Eigen::Index dim);
    /// Samples f(θ_i) for a callable returning an Eigen vector of length dim.
    template <class F>
    static PeriodicGrid sample(Eigen::Index n, Eigen::Index dim, F&& f);

    Eigen::Index size() const { return values_.rows(); }
    Eigen::Index dim() const { return values_.cols(); }
    double theta(Eigen::Index i) const;

    const Eigen::MatrixXd& values() const { return values_; }
    Eigen::MatrixXd& values() { return values_; }
    auto row(Eigen::Index i) const { return values_.row(i); }

private:
    Eigen::MatrixXd values_;
};

/// Signed frequency of FFT bin `index` in the symmetric range [-N/2, N/2).
int symmetric_frequency(Eigen::Index index, Eigen::Index n);

/// Unnormalized DFT â(k) per component, FFT bin order.
Eigen::MatrixXcd spectrum(const PeriodicGrid& grid);

/// Real grid from FFT-ordered coefficients (imaginary residue discarded).
PeriodicGrid from_spectrum(const Eigen::MatrixXcd& coeffs);

/// Samples of a(θ + ρ) on the same grid.
PeriodicGrid shift(const PeriodicGrid& grid, double rho);

/// Samples of ∂_θ a; the Nyquist mode differentiates to zero.
PeriodicGrid differentiate(const PeriodicGrid& grid);

/// Band-limited interpolant evaluated at an arbitrary angle.
Eigen::VectorXd trig_interp(const PeriodicGrid& grid, double theta);

/// Same as trig_interp but reusing a precomputed spectrum.
Eigen::VectorXd trig_interp_spectrum(const Eigen::MatrixXcd& coeffs, double theta);

/// Solves alpha ξ(θ) - beta ξ(θ + ρ) = η(θ) mode by mode.
///
/// Divisors smaller than `small_divisor` in magnitude raise
/// std::domain_error unless `drop_kernel` is set, in which case the mode
/// is set to zero (used for the mean of cohomological equations).
PeriodicGrid solve_shift_equation(double alpha, double beta, double rho, const PeriodicGrid& eta,
                                  double small_divisor = 1e-13, bool drop_kernel = false);

template <class F>
PeriodicGrid PeriodicGrid::sample(Eigen::Index n, Eigen::Index dim, F&& f) {
    PeriodicGrid g = zeros(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        g.values_.row(i) = f(g.theta(i)).transpose();
    }
    return g;
}

} // namespace hcx
