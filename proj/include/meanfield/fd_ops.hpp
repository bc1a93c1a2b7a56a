/// @file fd_ops.hpp
/// @brief Second-order finite-difference operators with zero-flux boundary handling.
///
/// gradient() uses centered differences in the interior and one-sided
/// second-order stencils at boundary cells. divergence() and laplacian() are
/// flux-form: face values are built from cell averages (divergence) or face
/// differences (laplacian) and boundary faces carry zero flux, so the cell sum
/// of any divergence vanishes by telescoping.

#pragma once

#include "meanfield/grid.hpp"

namespace meanfield {

namespace detail {

/// d/ds along one row of n samples with spacing d, second order.
template <class Scalar, class Get, class Put>
void line_gradient(int n, Scalar d, Get f, Put out) {
    if (n == 1) {
        out(0, Scalar(0));
        return;
    }
    if (n == 2) {
        const Scalar g = (f(1) - f(0)) / d;
        out(0, g);
        out(1, g);
        return;
    }
    const Scalar inv2d = Scalar(1) / (2 * d);
    out(0, (-3 * f(0) + 4 * f(1) - f(2)) * inv2d);
    for (int i = 1; i < n - 1; ++i) out(i, (f(i + 1) - f(i - 1)) * inv2d);
    out(n - 1, (3 * f(n - 1) - 4 * f(n - 2) + f(n - 3)) * inv2d);
}

}  // namespace detail

/// Cell-centered gradient; exact on affine fields.
template <class Scalar>
VectorField<Scalar> gradient(const ScalarField<Scalar>& f) {
    const Grid<Scalar>& g = f.grid;
    VectorField<Scalar> out(g);
    for (int iy = 0; iy < g.ny; ++iy) {
        detail::line_gradient(
            g.nx, g.dx(), [&](int ix) { return f(ix, iy); },
            [&](int ix, Scalar v) { out.x(ix, iy) = v; });
    }
    for (int ix = 0; ix < g.nx; ++ix) {
        detail::line_gradient(
            g.ny, g.dy(), [&](int iy) { return f(ix, iy); },
            [&](int iy, Scalar v) { out.y(ix, iy) = v; });
    }
    return out;
}

/// Flux-form divergence; Σ divergence(F)·dx·dy telescopes to zero.
template <class Scalar>
ScalarField<Scalar> divergence(const VectorField<Scalar>& field) {
    const Grid<Scalar>& g = field.grid;
    ScalarField<Scalar> out(g, Scalar(0));
    const Scalar inv_dx = Scalar(1) / g.dx();
    const Scalar inv_dy = Scalar(1) / g.dy();
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 1; ix < g.nx; ++ix) {
            const Scalar flux = Scalar(0.5) * (field.x(ix - 1, iy) + field.x(ix, iy)) * inv_dx;
            out(ix - 1, iy) += flux;
            out(ix, iy) -= flux;
        }
    }
    for (int iy = 1; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const Scalar flux = Scalar(0.5) * (field.y(ix, iy - 1) + field.y(ix, iy)) * inv_dy;
            out(ix, iy - 1) += flux;
            out(ix, iy) -= flux;
        }
    }
    return out;
}

/// Five-point Laplacian with mirrored ghost cells, realized as the divergence
/// of zero-flux face gradients. Uniform fields are in the nullspace.
template <class Scalar>
ScalarField<Scalar> laplacian(const ScalarField<Scalar>& f) {
    const Grid<Scalar>& g = f.grid;
    ScalarField<Scalar> out(g, Scalar(0));
    const Scalar inv_dx2 = Scalar(1) / (g.dx() * g.dx());
    const Scalar inv_dy2 = Scalar(1) / (g.dy() * g.dy());
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 1; ix < g.nx; ++ix) {
            const Scalar face = (f(ix, iy) - f(ix - 1, iy)) * inv_dx2;
            out(ix - 1, iy) += face;
            out(ix, iy) -= face;
        }
    }
    for (int iy = 1; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const Scalar face = (f(ix, iy) - f(ix, iy - 1)) * inv_dy2;
            out(ix, iy - 1) += face;
            out(ix, iy) -= face;
        }
    }
    return out;
}

/// gradient() applied to every column of a (M x k) matrix; result is (2M x k).
template <class Scalar>
Eigen::MatrixX<Scalar> gradient_columns(const Grid<Scalar>& g, const Eigen::MatrixX<Scalar>& in) {
    const int m = g.cells();
    if (in.rows() != m) throw std::invalid_argument("gradient_columns: row count mismatch");
    Eigen::MatrixX<Scalar> out(2 * m, in.cols());
    for (Eigen::Index c = 0; c < in.cols(); ++c) {
        auto col = in.col(c);
        auto res = out.col(c);
        for (int iy = 0; iy < g.ny; ++iy)
            detail::line_gradient(
                g.nx, g.dx(), [&](int ix) { return col[g.index(ix, iy)]; },
                [&](int ix, Scalar v) { res[g.index(ix, iy)] = v; });
        for (int ix = 0; ix < g.nx; ++ix)
            detail::line_gradient(
                g.ny, g.dy(), [&](int iy) { return col[g.index(ix, iy)]; },
                [&](int iy, Scalar v) { res[m + g.index(ix, iy)] = v; });
    }
    return out;
}

/// Dense matrix of gradient(): (2M x M), x-derivative rows first.
template <class Scalar>
Eigen::MatrixX<Scalar> gradient_matrix(const Grid<Scalar>& g) {
    const int m = g.cells();
    Eigen::MatrixX<Scalar> mat = Eigen::MatrixX<Scalar>::Zero(2 * m, m);
    auto fill_axis = [&](int n, Scalar d, auto row_of, auto col_of) {
        if (n == 1) return;
        if (n == 2) {
            for (int j = 0; j < 2; ++j) {
                mat(row_of(j), col_of(1)) += Scalar(1) / d;
                mat(row_of(j), col_of(0)) -= Scalar(1) / d;
            }
            return;
        }
        const Scalar inv2d = Scalar(1) / (2 * d);
        mat(row_of(0), col_of(0)) += -3 * inv2d;
        mat(row_of(0), col_of(1)) += 4 * inv2d;
        mat(row_of(0), col_of(2)) += -inv2d;
        for (int i = 1; i < n - 1; ++i) {
            mat(row_of(i), col_of(i + 1)) += inv2d;
            mat(row_of(i), col_of(i - 1)) -= inv2d;
        }
        mat(row_of(n - 1), col_of(n - 1)) += 3 * inv2d;
        mat(row_of(n - 1), col_of(n - 2)) += -4 * inv2d;
        mat(row_of(n - 1), col_of(n - 3)) += inv2d;
    };
    for (int iy = 0; iy < g.ny; ++iy)
        fill_axis(
            g.nx, g.dx(), [&](int ix) { return g.index(ix, iy); },
            [&](int ix) { return g.index(ix, iy); });
    for (int ix = 0; ix < g.nx; ++ix)
        fill_axis(
            g.ny, g.dy(), [&](int iy) { return m + g.index(ix, iy); },
            [&](int iy) { return g.index(ix, iy); });
    return mat;
}

/// Cell-centered velocity whose flux-form discrete divergence vanishes
/// exactly, including next to the walls. psi holds a stream function on grid
/// vertices ((nx+1) x (ny+1)), constant along the boundary; every averaged
/// face value then equals the corresponding solenoidal face field.
template <class Scalar>
VectorField<Scalar> stream_function_velocity(const Grid<Scalar>& g,
                                             const Eigen::MatrixX<Scalar>& psi) {
    if (psi.rows() != g.nx + 1 || psi.cols() != g.ny + 1)
        throw std::invalid_argument("stream_function_velocity: psi must be (nx+1) x (ny+1)");
    VectorField<Scalar> v(g);
    for (int iy = 0; iy < g.ny; ++iy) {
        auto face_vx = [&](int fx) { return (psi(fx, iy + 1) - psi(fx, iy)) / g.dy(); };
        v.x(0, iy) = face_vx(1);
        for (int ix = 1; ix < g.nx; ++ix) v.x(ix, iy) = 2 * face_vx(ix) - v.x(ix - 1, iy);
    }
    for (int ix = 0; ix < g.nx; ++ix) {
        auto face_vy = [&](int fy) { return -(psi(ix + 1, fy) - psi(ix, fy)) / g.dx(); };
        v.y(ix, 0) = face_vy(1);
        for (int iy = 1; iy < g.ny; ++iy) v.y(ix, iy) = 2 * face_vy(iy) - v.y(ix, iy - 1);
    }
    return v;
}

/// Dense matrix of divergence(): (M x 2M).
template <class Scalar>
Eigen::MatrixX<Scalar> divergence_matrix(const Grid<Scalar>& g) {
    const int m = g.cells();
    Eigen::MatrixX<Scalar> mat = Eigen::MatrixX<Scalar>::Zero(m, 2 * m);
    const Scalar half_dx = Scalar(0.5) / g.dx();
    const Scalar half_dy = Scalar(0.5) / g.dy();
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 1; ix < g.nx; ++ix) {
            const int left = g.index(ix - 1, iy), right = g.index(ix, iy);
            mat(left, left) += half_dx;
            mat(left, right) += half_dx;
            mat(right, left) -= half_dx;
            mat(right, right) -= half_dx;
        }
    }
    for (int iy = 1; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const int lo = g.index(ix, iy - 1), hi = g.index(ix, iy);
            mat(lo, m + lo) += half_dy;
            mat(lo, m + hi) += half_dy;
            mat(hi, m + lo) -= half_dy;
            mat(hi, m + hi) -= half_dy;
        }
    }
    return mat;
}

}  // namespace meanfield
