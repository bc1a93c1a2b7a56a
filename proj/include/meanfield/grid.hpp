/// @file grid.hpp
/// @brief Cell-centered rectangular grid and grid-sampled scalar/vector fields.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace meanfield {

template <class Scalar>
struct Rect {
    Scalar x_min = 0, x_max = 1;
    Scalar y_min = 0, y_max = 1;

    Scalar width() const { return x_max - x_min; }
    Scalar height() const { return y_max - y_min; }
    Scalar area() const { return width() * height(); }

    bool contains(Scalar x, Scalar y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
    bool contains(const Rect& other) const {
        return other.x_min >= x_min && other.x_max <= x_max &&
               other.y_min >= y_min && other.y_max <= y_max;
    }
    bool operator==(const Rect&) const = default;
};

/// Uniform cell-centered grid over an axis-aligned rectangle.
/// Fields index cells row-major with x fastest: index = iy*nx + ix.
template <class Scalar>
struct Grid {
    int nx = 0, ny = 0;
    Rect<Scalar> bounds;

    Grid() = default;
    Grid(int nx_, int ny_, Rect<Scalar> bounds_ = {}) : nx(nx_), ny(ny_), bounds(bounds_) {
        if (nx <= 0 || ny <= 0)
            throw std::invalid_argument("Grid: cell counts must be positive");
        if (!(bounds.width() > 0) || !(bounds.height() > 0))
            throw std::invalid_argument("Grid: domain must have positive extent");
    }

    Scalar dx() const { return bounds.width() / Scalar(nx); }
    Scalar dy() const { return bounds.height() / Scalar(ny); }
    Scalar cell_area() const { return dx() * dy(); }
    int cells() const { return nx * ny; }

    int index(int ix, int iy) const { return iy * nx + ix; }
    Scalar cell_x(int ix) const { return bounds.x_min + (Scalar(ix) + Scalar(0.5)) * dx(); }
    Scalar cell_y(int iy) const { return bounds.y_min + (Scalar(iy) + Scalar(0.5)) * dy(); }

    bool operator==(const Grid&) const = default;
};

/// One real value per cell. Densities carry units of 1/length^2.
template <class Scalar>
struct ScalarField {
    Grid<Scalar> grid;
    Eigen::VectorX<Scalar> values;

    ScalarField() = default;
    explicit ScalarField(const Grid<Scalar>& g, Scalar fill = Scalar(0))
        : grid(g), values(Eigen::VectorX<Scalar>::Constant(g.cells(), fill)) {}
    ScalarField(const Grid<Scalar>& g, Eigen::VectorX<Scalar> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.cells())
            throw std::invalid_argument("ScalarField: value count does not match grid");
    }

    Scalar& operator()(int ix, int iy) { return values[grid.index(ix, iy)]; }
    Scalar operator()(int ix, int iy) const { return values[grid.index(ix, iy)]; }

    /// Total mass under midpoint quadrature.
    Scalar mass() const { return values.sum() * grid.cell_area(); }
    bool all_finite() const { return values.allFinite(); }
};

/// One real 2-vector per cell, stored as [all x components; all y components].
template <class Scalar>
struct VectorField {
    Grid<Scalar> grid;
    Eigen::VectorX<Scalar> values;  // size 2*cells

    VectorField() = default;
    explicit VectorField(const Grid<Scalar>& g, Scalar fill = Scalar(0))
        : grid(g), values(Eigen::VectorX<Scalar>::Constant(2 * g.cells(), fill)) {}
    VectorField(const Grid<Scalar>& g, Eigen::VectorX<Scalar> v) : grid(g), values(std::move(v)) {
        if (values.size() != 2 * grid.cells())
            throw std::invalid_argument("VectorField: value count does not match grid");
    }

    auto x() { return values.head(grid.cells()); }
    auto x() const { return values.head(grid.cells()); }
    auto y() { return values.tail(grid.cells()); }
    auto y() const { return values.tail(grid.cells()); }

    Scalar& x(int ix, int iy) { return values[grid.index(ix, iy)]; }
    Scalar x(int ix, int iy) const { return values[grid.index(ix, iy)]; }
    Scalar& y(int ix, int iy) { return values[grid.cells() + grid.index(ix, iy)]; }
    Scalar y(int ix, int iy) const { return values[grid.cells() + grid.index(ix, iy)]; }

    /// Largest per-cell Euclidean magnitude.
    Scalar max_norm() const {
        const int m = grid.cells();
        Scalar best = 0;
        for (int i = 0; i < m; ++i)
            best = std::max(best, std::hypot(values[i], values[m + i]));
        return best;
    }
    bool all_finite() const { return values.allFinite(); }
};

using GridD = Grid<double>;
using ScalarFieldD = ScalarField<double>;
using VectorFieldD = VectorField<double>;

}  // namespace meanfield
