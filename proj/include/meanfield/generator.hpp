/// @file generator.hpp
/// @brief Discrete Fokker-Planck generator in conservative flux form.
///
/// The density obeys dp/dt = -div(v p) + lap(sigma p) with zero total flux
/// through every boundary face. Advective face fluxes average the two adjacent
/// cell values of v*p; diffusive face fluxes difference sigma*p across the
/// face. Every column of the assembled matrix sums to zero, so explicit time
/// stepping conserves mass exactly.

#pragma once

#include "meanfield/grid.hpp"

#include <limits>
#include <vector>

namespace meanfield {

/// Piecewise-constant sigma(t); constant by default.
template <class Scalar>
class DiffusionSchedule {
  public:
    DiffusionSchedule(Scalar sigma = Scalar(0)) : steps_{{Scalar(0), sigma}} { check(); }
    DiffusionSchedule(std::vector<std::pair<Scalar, Scalar>> steps) : steps_(std::move(steps)) {
        if (steps_.empty()) throw std::invalid_argument("DiffusionSchedule: empty schedule");
        for (size_t i = 1; i < steps_.size(); ++i)
            if (!(steps_[i].first > steps_[i - 1].first))
                throw std::invalid_argument("DiffusionSchedule: times must increase");
        check();
    }

    Scalar at(Scalar t) const {
        Scalar value = steps_.front().second;
        for (const auto& [ti, si] : steps_) {
            if (ti <= t) value = si;
            else break;
        }
        return value;
    }

  private:
    void check() const {
        for (const auto& [t, s] : steps_)
            if (!(s >= Scalar(0)) || !std::isfinite(s))
                throw std::invalid_argument("DiffusionSchedule: sigma must be finite and >= 0");
    }
    std::vector<std::pair<Scalar, Scalar>> steps_;
};

/// Largest explicit-Euler step for the drift-diffusion stencil.
template <class Scalar>
Scalar cfl_max_dt(const Grid<Scalar>& grid, Scalar sigma, Scalar v_max,
                  Scalar safety = Scalar(0.9)) {
    const Scalar h = std::min(grid.dx(), grid.dy());
    const Scalar denom = 4 * sigma + v_max * h;
    if (denom <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
    return safety * h * h / denom;
}

/// Assembled generator: face-coefficient stencil plus dense matrix on demand.
template <class Scalar>
class FokkerPlanckOperator {
  public:
    FokkerPlanckOperator() = default;

    FokkerPlanckOperator(const VectorField<Scalar>& v, Scalar sigma,
                         Scalar cfl_safety = Scalar(0.9))
        : grid_(v.grid), sigma_(sigma) {
        if (!v.all_finite())
            throw std::invalid_argument("FokkerPlanckOperator: velocity has non-finite entries");
        if (!(sigma >= Scalar(0)) || !std::isfinite(sigma))
            throw std::invalid_argument("FokkerPlanckOperator: sigma must be finite and >= 0");
        max_dt_ = cfl_max_dt(grid_, sigma, v.max_norm(), cfl_safety);

        const int nx = grid_.nx, ny = grid_.ny;
        const Scalar inv_dx = Scalar(1) / grid_.dx(), inv_dy = Scalar(1) / grid_.dy();
        sx_ = sigma * inv_dx * inv_dx;
        sy_ = sigma * inv_dy * inv_dy;
        ax_.resize(2 * std::max(0, (nx - 1) * ny));
        ay_.resize(2 * std::max(0, nx * (ny - 1)));
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 1; ix < nx; ++ix) {
                const int f = iy * (nx - 1) + (ix - 1);
                ax_[2 * f] = Scalar(0.5) * v.x(ix - 1, iy) * inv_dx;
                ax_[2 * f + 1] = Scalar(0.5) * v.x(ix, iy) * inv_dx;
            }
        for (int iy = 1; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const int f = (iy - 1) * nx + ix;
                ay_[2 * f] = Scalar(0.5) * v.y(ix, iy - 1) * inv_dy;
                ay_[2 * f + 1] = Scalar(0.5) * v.y(ix, iy) * inv_dy;
            }
    }

    const Grid<Scalar>& grid() const { return grid_; }
    Scalar sigma() const { return sigma_; }
    /// CFL stability bound for explicit Euler on this operator.
    Scalar max_dt() const { return max_dt_; }

    /// A p for one density column.
    template <class In, class Out>
    void apply_column(const In& p, Out&& out) const {
        const int nx = grid_.nx, ny = grid_.ny;
        out.setZero();
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 1; ix < nx; ++ix) {
                const int f = iy * (nx - 1) + (ix - 1);
                const int l = grid_.index(ix - 1, iy), r = grid_.index(ix, iy);
                const Scalar flux =
                    ax_[2 * f] * p[l] + ax_[2 * f + 1] * p[r] - sx_ * (p[r] - p[l]);
                out[l] -= flux;
                out[r] += flux;
            }
        for (int iy = 1; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const int f = (iy - 1) * nx + ix;
                const int l = grid_.index(ix, iy - 1), r = grid_.index(ix, iy);
                const Scalar flux =
                    ay_[2 * f] * p[l] + ay_[2 * f + 1] * p[r] - sy_ * (p[r] - p[l]);
                out[l] -= flux;
                out[r] += flux;
            }
    }

    Eigen::VectorX<Scalar> apply(const Eigen::VectorX<Scalar>& p) const {
        Eigen::VectorX<Scalar> out(grid_.cells());
        apply_column(p, out);
        return out;
    }

    ScalarField<Scalar> apply(const ScalarField<Scalar>& p) const {
        return {grid_, apply(p.values)};
    }

    /// A * M, column by column.
    Eigen::MatrixX<Scalar> apply_columns(const Eigen::MatrixX<Scalar>& m) const {
        Eigen::MatrixX<Scalar> out(grid_.cells(), m.cols());
        for (Eigen::Index c = 0; c < m.cols(); ++c) apply_column(m.col(c), out.col(c));
        return out;
    }

    /// Dense generator matrix; every column sums to zero.
    Eigen::MatrixX<Scalar> matrix() const {
        const int m = grid_.cells();
        Eigen::MatrixX<Scalar> a = Eigen::MatrixX<Scalar>::Zero(m, m);
        const int nx = grid_.nx, ny = grid_.ny;
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 1; ix < nx; ++ix) {
                const int f = iy * (nx - 1) + (ix - 1);
                const int l = grid_.index(ix - 1, iy), r = grid_.index(ix, iy);
                a(l, l) -= ax_[2 * f] + sx_;
                a(l, r) -= ax_[2 * f + 1] - sx_;
                a(r, l) += ax_[2 * f] + sx_;
                a(r, r) += ax_[2 * f + 1] - sx_;
            }
        for (int iy = 1; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const int f = (iy - 1) * nx + ix;
                const int l = grid_.index(ix, iy - 1), r = grid_.index(ix, iy);
                a(l, l) -= ay_[2 * f] + sy_;
                a(l, r) -= ay_[2 * f + 1] - sy_;
                a(r, l) += ay_[2 * f] + sy_;
                a(r, r) += ay_[2 * f + 1] - sy_;
            }
        return a;
    }

  private:
    Grid<Scalar> grid_;
    Scalar sigma_ = 0, max_dt_ = 0, sx_ = 0, sy_ = 0;
    std::vector<Scalar> ax_, ay_;  // per-face advection coefficients (left, right)
};

template <class Scalar>
FokkerPlanckOperator<Scalar> assemble_fp_operator(const VectorField<Scalar>& v, Scalar sigma,
                                                  Scalar cfl_safety = Scalar(0.9)) {
    return FokkerPlanckOperator<Scalar>(v, sigma, cfl_safety);
}

/// Explicit Euler step p + dt*A*p. Rejects dt beyond the CFL bound.
template <class Scalar>
ScalarField<Scalar> step_density(const ScalarField<Scalar>& p,
                                 const FokkerPlanckOperator<Scalar>& op, Scalar dt) {
    if (!(dt > Scalar(0))) throw std::invalid_argument("step_density: dt must be positive");
    if (dt > op.max_dt())
        throw std::invalid_argument("step_density: dt " + std::to_string(double(dt)) +
                                    " exceeds stability bound " +
                                    std::to_string(double(op.max_dt())));
    ScalarField<Scalar> out = p;
    Eigen::VectorX<Scalar> rate(p.grid.cells());
    op.apply_column(p.values, rate);
    out.values += dt * rate;
    return out;
}

/// L2 norm of A*p; zero iff p is stationary under A.
template <class Scalar>
Scalar steady_state_residual(const ScalarField<Scalar>& p, const FokkerPlanckOperator<Scalar>& op) {
    Eigen::VectorX<Scalar> rate(p.grid.cells());
    op.apply_column(p.values, rate);
    return std::sqrt(rate.squaredNorm() * p.grid.cell_area());
}

}  // namespace meanfield
