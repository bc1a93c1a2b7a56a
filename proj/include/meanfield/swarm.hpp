/// @file swarm.hpp
/// @brief Agent ensemble under the controlled SDE with mirror reflection.
///
/// Noise is counter-based: the normal pair for agent a at step k is a pure
/// function of (seed, a, k), so trajectories are bitwise reproducible, agent
/// streams are independent of ensemble size, and any execution order gives
/// identical results.

#pragma once

#include "meanfield/grid.hpp"

#include <cstdint>
#include <utility>

namespace meanfield {

namespace rng {

inline std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
                          std::uint64_t b) {
    std::uint64_t z = splitmix(seed);
    z = splitmix(z ^ (stream * 0xBF58476D1CE4E5B9ULL));
    z = splitmix(z ^ (a * 0x94D049BB133111EBULL));
    z = splitmix(z ^ (b * 0xD6E8FEB86659FD93ULL));
    return z;
}

/// Uniform in [0, 1) from the top 53 bits.
inline double uniform01(std::uint64_t bits) { return double(bits >> 11) * 0x1.0p-53; }

/// Box-Muller pair from two counters; first uniform shifted into (0, 1].
inline std::pair<double, double> normal_pair(std::uint64_t bits1, std::uint64_t bits2) {
    const double u1 = double((bits1 >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01(bits2);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace rng

/// Mirror x into [lo, hi], repeating until inside (closed-form fold).
template <class Scalar>
Scalar reflect_into(Scalar x, Scalar lo, Scalar hi) {
    if (x >= lo && x <= hi) return x;
    const Scalar span = hi - lo;
    if (!(span > Scalar(0))) return lo;
    Scalar y = std::fmod(x - lo, 2 * span);
    if (y < Scalar(0)) y += 2 * span;
    if (y > span) y = 2 * span - y;
    return lo + y;
}

template <class Scalar>
struct Swarm {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 2> positions;
    Rect<Scalar> domain;
    std::uint64_t seed = 0;
    std::uint64_t step_count = 0;

    int size() const { return int(positions.rows()); }
};

/// n i.i.d. uniform samples on region; deterministic given seed.
template <class Scalar>
Swarm<Scalar> init_swarm(int n, const Rect<Scalar>& region, std::uint64_t seed,
                         const Rect<Scalar>& domain) {
    if (n < 1) throw std::invalid_argument("init_swarm: need at least one agent");
    if (!domain.contains(region))
        throw std::invalid_argument("init_swarm: init region lies outside the domain");
    Swarm<Scalar> s;
    s.domain = domain;
    s.seed = seed;
    s.positions.resize(n, 2);
    for (int a = 0; a < n; ++a) {
        const Scalar ux = Scalar(rng::uniform01(rng::hash(seed, 0, std::uint64_t(a), 0)));
        const Scalar uy = Scalar(rng::uniform01(rng::hash(seed, 0, std::uint64_t(a), 1)));
        s.positions(a, 0) = region.x_min + ux * region.width();
        s.positions(a, 1) = region.y_min + uy * region.height();
    }
    return s;
}

/// Bilinear interpolation of cell-center values; queries outside the
/// cell-center hull are clamped to its edge. Throws outside the closed domain.
template <class Scalar>
Eigen::Vector2<Scalar> sample_velocity(const VectorField<Scalar>& v, Scalar x, Scalar y) {
    const Grid<Scalar>& g = v.grid;
    if (!g.bounds.contains(x, y))
        throw std::invalid_argument("sample_velocity: point outside the domain");
    auto axis = [](Scalar q, Scalar first, Scalar d, int n) {
        int i0 = 0;
        Scalar t = 0;
        if (n > 1) {
            const Scalar s = (q - first) / d;
            i0 = int(std::floor(s));
            i0 = std::max(0, std::min(n - 2, i0));
            t = std::max(Scalar(0), std::min(Scalar(1), s - Scalar(i0)));
        }
        return std::pair<int, Scalar>{i0, t};
    };
    const auto [ix, tx] = axis(x, g.cell_x(0), g.dx(), g.nx);
    const auto [iy, ty] = axis(y, g.cell_y(0), g.dy(), g.ny);
    const int ix1 = std::min(ix + 1, g.nx - 1), iy1 = std::min(iy + 1, g.ny - 1);
    auto lerp2 = [&](auto value) {
        const Scalar v00 = value(ix, iy), v10 = value(ix1, iy);
        const Scalar v01 = value(ix, iy1), v11 = value(ix1, iy1);
        return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
    };
    return {lerp2([&](int i, int j) { return v.x(i, j); }),
            lerp2([&](int i, int j) { return v.y(i, j); })};
}

/// Euler-Maruyama step with zero-order-hold velocity and mirror reflection.
template <class Scalar>
void step_swarm(Swarm<Scalar>& s, const VectorField<Scalar>& v, Scalar sigma, Scalar dt) {
    if (!(dt > Scalar(0))) throw std::invalid_argument("step_swarm: dt must be positive");
    if (!(sigma >= Scalar(0))) throw std::invalid_argument("step_swarm: sigma must be >= 0");
    const Scalar noise = std::sqrt(2 * sigma * dt);
    const std::uint64_t k = s.step_count;
    for (int a = 0; a < s.size(); ++a) {
        const Scalar x = s.positions(a, 0), y = s.positions(a, 1);
        const Eigen::Vector2<Scalar> vel = sample_velocity(v, x, y);
        if (!vel.allFinite()) throw std::runtime_error("step_swarm: non-finite velocity sample");
        Scalar nx = 0, ny = 0;
        if (noise > Scalar(0)) {
            const auto [n1, n2] = rng::normal_pair(rng::hash(s.seed, 1, std::uint64_t(a), k),
                                                   rng::hash(s.seed, 2, std::uint64_t(a), k));
            nx = Scalar(n1);
            ny = Scalar(n2);
        }
        s.positions(a, 0) = reflect_into(x + vel.x() * dt + noise * nx, s.domain.x_min,
                                         s.domain.x_max);
        s.positions(a, 1) = reflect_into(y + vel.y() * dt + noise * ny, s.domain.y_min,
                                         s.domain.y_max);
    }
    ++s.step_count;
}

}  // namespace meanfield
