/// @file control.hpp
/// @brief Target densities and the density feedback laws.
///
/// The feedback keeps the target (never the estimated density) in every
/// denominator: v = -alpha*(p_star*grad_p_hat - p_hat*grad_p_star)/p_star^2
///                 + sigma*grad_p_star/p_star.

#pragma once

#include "meanfield/fd_ops.hpp"
#include "meanfield/grid.hpp"

#include <numbers>
#include <vector>

namespace meanfield {

template <class Scalar>
struct GaussianComponent {
    Scalar weight = 1;
    Scalar mean_x = 0.5, mean_y = 0.5;
    Scalar cov_xx = 0.02, cov_yy = 0.02, cov_xy = 0;
};

template <class Scalar>
struct TargetSpec {
    enum class Kind { Uniform, GaussianMixture, Ring };
    Kind kind = Kind::Uniform;
    std::vector<GaussianComponent<Scalar>> components;       // mixture
    Scalar ring_cx = 0.5, ring_cy = 0.5;                     // ring
    Scalar ring_radius = 0.3, ring_width = 0.05;

    Scalar evaluate(Scalar x, Scalar y) const {
        switch (kind) {
            case Kind::Uniform:
                return Scalar(1);
            case Kind::GaussianMixture: {
                Scalar sum = 0;
                for (const auto& c : components) {
                    const Scalar det = c.cov_xx * c.cov_yy - c.cov_xy * c.cov_xy;
                    if (!(det > Scalar(0)))
                        throw std::invalid_argument("TargetSpec: component covariance not SPD");
                    const Scalar dx = x - c.mean_x, dy = y - c.mean_y;
                    const Scalar quad =
                        (c.cov_yy * dx * dx - 2 * c.cov_xy * dx * dy + c.cov_xx * dy * dy) / det;
                    sum += c.weight / (2 * std::numbers::pi_v<Scalar> * std::sqrt(det)) *
                           std::exp(Scalar(-0.5) * quad);
                }
                return sum;
            }
            case Kind::Ring: {
                const Scalar r = std::hypot(x - ring_cx, y - ring_cy);
                const Scalar d = (r - ring_radius) / ring_width;
                return std::exp(Scalar(-0.5) * d * d);
            }
        }
        return Scalar(0);
    }
};

template <class Scalar>
struct ControlConfig {
    Scalar alpha = Scalar(0.003);
    Scalar v_max = Scalar(0);  // 0 disables the magnitude cap
};

template <class Scalar>
struct TargetDensity {
    ScalarField<Scalar> p_star;
    VectorField<Scalar> grad_p_star;
    Scalar p_min = 0;
};

/// Evaluates the spec on cell centers, lifts it by the exact offset that makes
/// the floor p_min hold with unit mass, and differentiates the result.
template <class Scalar>
TargetDensity<Scalar> make_target(const TargetSpec<Scalar>& spec, const Grid<Scalar>& grid,
                                  Scalar p_min) {
    const Scalar area = grid.bounds.area();
    if (!(p_min > Scalar(0)) || !(p_min * area < Scalar(1)))
        throw std::invalid_argument("make_target: need 0 < p_min < 1/area");
    ScalarField<Scalar> raw(grid);
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix)
            raw(ix, iy) = spec.evaluate(grid.cell_x(ix), grid.cell_y(iy));
    if (!raw.all_finite()) throw std::invalid_argument("make_target: spec produced non-finite values");
    if (raw.values.minCoeff() < Scalar(0))
        throw std::invalid_argument("make_target: spec produced negative values");
    const Scalar raw_mass = raw.mass();
    if (!(raw_mass > Scalar(0))) throw std::invalid_argument("make_target: target mass is zero");

    // offset c with (min raw + c)/Z >= p_min and mass exactly one after scaling
    const Scalar c = p_min * raw_mass / (Scalar(1) - p_min * area);
    raw.values.array() += c;
    raw.values /= raw.mass();

    TargetDensity<Scalar> out;
    out.grad_p_star = gradient(raw);
    out.p_star = std::move(raw);
    out.p_min = p_min;
    return out;
}

namespace detail {

template <class Scalar>
void cap_magnitude(VectorField<Scalar>& v, Scalar v_max) {
    if (!(v_max > Scalar(0))) return;
    const int m = v.grid.cells();
    for (int i = 0; i < m; ++i) {
        const Scalar mag = std::hypot(v.values[i], v.values[m + i]);
        if (mag > v_max) {
            const Scalar scale = v_max / mag;
            v.values[i] *= scale;
            v.values[m + i] *= scale;
        }
    }
}

}  // namespace detail

/// Feedback law from estimates of the density and its gradient.
template <class Scalar>
VectorField<Scalar> feedback_velocity(const ScalarField<Scalar>& p_hat,
                                      const VectorField<Scalar>& q_hat,
                                      const TargetDensity<Scalar>& target, Scalar alpha,
                                      Scalar sigma, Scalar v_max = Scalar(0)) {
    if (!p_hat.all_finite() || !q_hat.all_finite())
        throw std::invalid_argument("feedback_velocity: non-finite estimates");
    if (!(alpha >= Scalar(0)) || !(sigma >= Scalar(0)))
        throw std::invalid_argument("feedback_velocity: alpha and sigma must be >= 0");
    const auto& ps = target.p_star.values.array();
    const int m = p_hat.grid.cells();
    VectorField<Scalar> v(p_hat.grid);
    for (int block = 0; block < 2; ++block) {
        const auto g = target.grad_p_star.values.segment(block * m, m).array();
        const auto q = q_hat.values.segment(block * m, m).array();
        v.values.segment(block * m, m) =
            -alpha * (ps * q - p_hat.values.array() * g) / (ps * ps) + sigma * g / ps;
    }
    detail::cap_magnitude(v, v_max);
    return v;
}

template <class Scalar>
VectorField<Scalar> feedback_velocity(const ScalarField<Scalar>& p_hat,
                                      const VectorField<Scalar>& q_hat,
                                      const TargetDensity<Scalar>& target,
                                      const ControlConfig<Scalar>& cfg, Scalar sigma) {
    return feedback_velocity(p_hat, q_hat, target, cfg.alpha, sigma, cfg.v_max);
}

/// Oracle form: differentiates the density-to-target ratio directly.
template <class Scalar>
VectorField<Scalar> exact_feedback_velocity(const ScalarField<Scalar>& p,
                                            const TargetDensity<Scalar>& target, Scalar alpha,
                                            Scalar sigma, Scalar v_max = Scalar(0)) {
    if (!p.all_finite()) throw std::invalid_argument("exact_feedback_velocity: non-finite density");
    if (!(alpha >= Scalar(0)) || !(sigma >= Scalar(0)))
        throw std::invalid_argument("exact_feedback_velocity: alpha and sigma must be >= 0");
    ScalarField<Scalar> ratio(p.grid);
    ratio.values = p.values.cwiseQuotient(target.p_star.values);
    VectorField<Scalar> v = gradient(ratio);
    const int m = p.grid.cells();
    for (int block = 0; block < 2; ++block) {
        const auto g = target.grad_p_star.values.segment(block * m, m).array();
        v.values.segment(block * m, m) =
            -alpha * v.values.segment(block * m, m).array() +
            sigma * g / target.p_star.values.array();
    }
    detail::cap_magnitude(v, v_max);
    return v;
}

}  // namespace meanfield
