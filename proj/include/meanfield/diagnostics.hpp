/// @file diagnostics.hpp
/// @brief Norms, the tracking Lyapunov functional, decay-rate fits, and the
/// disturbance-injection sweep.

#pragma once

#include "meanfield/control.hpp"
#include "meanfield/generator.hpp"

#include <vector>

namespace meanfield {

template <class Scalar>
Scalar weighted_l2(const ScalarField<Scalar>& f, const ScalarField<Scalar>& weight) {
    if (f.grid != weight.grid) throw std::invalid_argument("weighted_l2: grid mismatch");
    if (weight.values.minCoeff() <= Scalar(0))
        throw std::invalid_argument("weighted_l2: weight must be positive");
    return std::sqrt(f.values.array().square().matrix().dot(weight.values) *
                     f.grid.cell_area());
}

template <class Scalar>
Scalar l2_norm(const ScalarField<Scalar>& f) {
    return std::sqrt(f.values.squaredNorm() * f.grid.cell_area());
}

template <class Scalar>
Scalar l2_norm(const VectorField<Scalar>& f) {
    return std::sqrt(f.values.squaredNorm() * f.grid.cell_area());
}

/// V = 1/2 ||p - p_star||^2 weighted by 1/p_star; zero iff p equals the target.
template <class Scalar>
Scalar lyapunov_v(const ScalarField<Scalar>& p, const TargetDensity<Scalar>& target) {
    if (p.grid != target.p_star.grid) throw std::invalid_argument("lyapunov_v: grid mismatch");
    const auto diff = (p.values - target.p_star.values).array();
    return Scalar(0.5) * (diff.square() / target.p_star.values.array()).sum() *
           p.grid.cell_area();
}

/// Least-squares slope of log(value) against t over the trailing window;
/// returns the negated slope (positive for decay).
template <class Scalar>
Scalar fit_decay_rate(const std::vector<Scalar>& t, const std::vector<Scalar>& value,
                      Scalar window_fraction) {
    if (t.size() != value.size()) throw std::invalid_argument("fit_decay_rate: length mismatch");
    if (!(window_fraction > Scalar(0)) || window_fraction > Scalar(1))
        throw std::invalid_argument("fit_decay_rate: window fraction must be in (0, 1]");
    const size_t n = t.size();
    const size_t count = std::max<size_t>(1, size_t(std::ceil(double(window_fraction) * n)));
    if (count < 10) throw std::invalid_argument("fit_decay_rate: need at least 10 points in window");
    const size_t begin = n - count;
    Scalar st = 0, sy = 0, stt = 0, sty = 0;
    for (size_t i = begin; i < n; ++i) {
        if (!(value[i] > Scalar(0)))
            throw std::invalid_argument("fit_decay_rate: values must be positive");
        const Scalar yi = std::log(value[i]);
        st += t[i];
        sy += yi;
        stt += t[i] * t[i];
        sty += t[i] * yi;
    }
    const Scalar denom = Scalar(count) * stt - st * st;
    if (denom == Scalar(0)) throw std::invalid_argument("fit_decay_rate: degenerate time axis");
    return -(Scalar(count) * sty - st * sy) / denom;
}

template <class Scalar>
struct IssPoint {
    Scalar delta;
    Scalar steady_error;
};

/// Closed-loop PDE run with artificial estimation errors of L2 size delta
/// injected into the feedback law; reports the trailing-window mean tracking
/// error per delta. Shapes are normalized internally.
template <class Scalar>
std::vector<IssPoint<Scalar>> iss_sweep(const ScalarField<Scalar>& p0,
                                        const TargetDensity<Scalar>& target, Scalar sigma,
                                        Scalar alpha, Scalar dt, int steps,
                                        const ScalarField<Scalar>& err_shape,
                                        const VectorField<Scalar>& grad_err_shape,
                                        const std::vector<Scalar>& deltas,
                                        Scalar trailing_fraction = Scalar(0.2)) {
    for (size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] >= Scalar(0)))
            throw std::invalid_argument("iss_sweep: deltas must be >= 0");
        if (i > 0 && deltas[i] < deltas[i - 1])
            throw std::invalid_argument("iss_sweep: deltas must be sorted ascending");
    }
    ScalarField<Scalar> unit_err = err_shape;
    unit_err.values /= l2_norm(err_shape);
    VectorField<Scalar> unit_grad_err = grad_err_shape;
    unit_grad_err.values /= l2_norm(grad_err_shape);

    std::vector<IssPoint<Scalar>> out;
    for (const Scalar delta : deltas) {
        ScalarField<Scalar> p = p0;
        std::vector<Scalar> err(steps);
        for (int k = 0; k < steps; ++k) {
            ScalarField<Scalar> p_hat = p;
            p_hat.values += delta * unit_err.values;
            VectorField<Scalar> q_hat = gradient(p);
            q_hat.values += delta * unit_grad_err.values;
            const VectorField<Scalar> v = feedback_velocity(p_hat, q_hat, target, alpha, sigma);
            p = step_density(p, assemble_fp_operator(v, sigma), dt);
            ScalarField<Scalar> diff = p;
            diff.values -= target.p_star.values;
            err[size_t(k)] = l2_norm(diff);
        }
        const int tail = std::max(1, int(std::ceil(double(trailing_fraction) * steps)));
        Scalar mean = 0;
        for (int k = steps - tail; k < steps; ++k) mean += err[size_t(k)];
        out.push_back({delta, mean / Scalar(tail)});
    }
    return out;
}

}  // namespace meanfield
