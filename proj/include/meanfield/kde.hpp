/// @file kde.hpp
/// @brief Gaussian kernel density estimates on the grid and their noise models.
///
/// The Gaussian kernel factorizes, so the field of kernel sums at all cell
/// centers reduces to two small matrix products of per-axis weights; gradients
/// reuse the same weights. Covariance diagonals follow the asymptotic KDE
/// variance k*p with k = ||K||_2^2/(N h^n), floored to stay positive definite.

#pragma once

#include "meanfield/grid.hpp"

#include <numbers>

namespace meanfield {

template <class Scalar>
struct NoiseModel {
    Eigen::VectorX<Scalar> diag;  // covariance diagonal, every entry positive

    Eigen::VectorX<Scalar> inverse() const { return diag.cwiseInverse(); }
};

template <class Scalar>
struct KdeConfig {
    Scalar bandwidth = Scalar(0.04);
    Scalar k = 0;         // covariance scale for the density measurement
    Scalar k_g = 0;       // covariance scale for the gradient measurement
    Scalar floor_eps = Scalar(1e-6);

    /// Scales for N samples in 2-D: ||K||^2 = ||grad K||^2 = 1/(4 pi) for the
    /// standard Gaussian kernel.
    static KdeConfig for_sample_count(Scalar h, int n, Scalar floor_eps = Scalar(1e-6)) {
        if (!(h > Scalar(0))) throw std::invalid_argument("KdeConfig: bandwidth must be positive");
        if (n < 1) throw std::invalid_argument("KdeConfig: need at least one sample");
        if (!(floor_eps > Scalar(0)))
            throw std::invalid_argument("KdeConfig: floor_eps must be positive");
        const Scalar norm_sq = Scalar(1) / (4 * std::numbers::pi_v<Scalar>);
        KdeConfig cfg;
        cfg.bandwidth = h;
        cfg.k = norm_sq / (Scalar(n) * h * h);
        cfg.k_g = norm_sq / (Scalar(n) * h * h * h * h);
        cfg.floor_eps = floor_eps;
        return cfg;
    }
};

namespace detail {

/// Per-axis kernel weights: w(a, i) = exp(-((c_i - x_a)/h)^2/2)/(sqrt(2 pi) h).
template <class Scalar, class Centers>
Eigen::MatrixX<Scalar> axis_weights(const Eigen::Ref<const Eigen::VectorX<Scalar>>& samples,
                                    int n_cells, Centers center, Scalar h, bool derivative) {
    const Scalar norm = Scalar(1) / (std::sqrt(2 * std::numbers::pi_v<Scalar>) * h);
    Eigen::MatrixX<Scalar> w(samples.size(), n_cells);
    for (int i = 0; i < n_cells; ++i) {
        const Scalar c = center(i);
        for (Eigen::Index a = 0; a < samples.size(); ++a) {
            const Scalar u = (c - samples[a]) / h;
            Scalar val = norm * std::exp(Scalar(-0.5) * u * u);
            if (derivative) val *= -u / h;
            w(a, i) = val;
        }
    }
    return w;
}

}  // namespace detail

/// Gaussian KDE evaluated at cell centers; nonnegative everywhere.
template <class Scalar>
ScalarField<Scalar> kde_density(const Eigen::Matrix<Scalar, Eigen::Dynamic, 2>& samples, Scalar h,
                                const Grid<Scalar>& grid) {
    if (samples.rows() < 1) throw std::invalid_argument("kde_density: no samples");
    if (!(h > Scalar(0))) throw std::invalid_argument("kde_density: bandwidth must be positive");
    const auto wx = detail::axis_weights<Scalar>(
        samples.col(0), grid.nx, [&](int i) { return grid.cell_x(i); }, h, false);
    const auto wy = detail::axis_weights<Scalar>(
        samples.col(1), grid.ny, [&](int i) { return grid.cell_y(i); }, h, false);
    Eigen::MatrixX<Scalar> prod = (wx.transpose() * wy) / Scalar(samples.rows());
    return {grid, Eigen::Map<Eigen::VectorX<Scalar>>(prod.data(), grid.cells())};
}

/// Analytic gradient of the Gaussian KDE sum (not finite differences).
template <class Scalar>
VectorField<Scalar> kde_gradient(const Eigen::Matrix<Scalar, Eigen::Dynamic, 2>& samples, Scalar h,
                                 const Grid<Scalar>& grid) {
    if (samples.rows() < 1) throw std::invalid_argument("kde_gradient: no samples");
    if (!(h > Scalar(0))) throw std::invalid_argument("kde_gradient: bandwidth must be positive");
    const auto wx = detail::axis_weights<Scalar>(
        samples.col(0), grid.nx, [&](int i) { return grid.cell_x(i); }, h, false);
    const auto wy = detail::axis_weights<Scalar>(
        samples.col(1), grid.ny, [&](int i) { return grid.cell_y(i); }, h, false);
    const auto gx = detail::axis_weights<Scalar>(
        samples.col(0), grid.nx, [&](int i) { return grid.cell_x(i); }, h, true);
    const auto gy = detail::axis_weights<Scalar>(
        samples.col(1), grid.ny, [&](int i) { return grid.cell_y(i); }, h, true);
    const Scalar inv_n = Scalar(1) / Scalar(samples.rows());
    Eigen::MatrixX<Scalar> px = (gx.transpose() * wy) * inv_n;
    Eigen::MatrixX<Scalar> py = (wx.transpose() * gy) * inv_n;
    VectorField<Scalar> out(grid);
    out.x() = Eigen::Map<Eigen::VectorX<Scalar>>(px.data(), grid.cells());
    out.y() = Eigen::Map<Eigen::VectorX<Scalar>>(py.data(), grid.cells());
    return out;
}

/// R = max(k * p_kde, floor), cellwise.
template <class Scalar>
NoiseModel<Scalar> noise_cov_density(const ScalarField<Scalar>& p_kde,
                                     const KdeConfig<Scalar>& cfg) {
    return {(cfg.k * p_kde.values).cwiseMax(cfg.floor_eps)};
}

/// R_g = max(k_g * |grad p_kde|, floor), componentwise.
template <class Scalar>
NoiseModel<Scalar> noise_cov_gradient(const VectorField<Scalar>& grad_kde,
                                      const KdeConfig<Scalar>& cfg) {
    return {(cfg.k_g * grad_kde.values.cwiseAbs()).cwiseMax(cfg.floor_eps)};
}

}  // namespace meanfield
