/// @file filters.hpp
/// @brief Discretized Kalman-type filters for the density and its gradient.
///
/// Covariances follow the Riccati flow dP/dt = A P + P A* - P R^-1 P. One step
/// splits into a transition congruence Phi P Phi^T with Phi = I + dt A +
/// dt^2/2 A^2 (exact for the Lyapunov part up to third order, preserves
/// positive semidefiniteness) and the exact resolvent of the quadratic part,
/// P <- (P^-1 + dt R^-1)^-1 in Woodbury form. Optional inflation q_proc*dt*I
/// guards against covariance collapse on long horizons; q_proc = 0 recovers
/// the plain equation.

#pragma once

#include "meanfield/generator.hpp"
#include "meanfield/gradient_dynamics.hpp"
#include "meanfield/kde.hpp"

#include <vector>

namespace meanfield {

/// Largest singular value by power iteration on M^T M.
template <class Scalar>
Scalar spectral_norm(const Eigen::MatrixX<Scalar>& m, int iters = 50) {
    if (m.size() == 0) return Scalar(0);
    Eigen::VectorX<Scalar> x = Eigen::VectorX<Scalar>::Ones(m.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += Scalar(i % 7) / Scalar(17);
    x.normalize();
    Scalar norm = 0;
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorX<Scalar> y = m * x;
        norm = y.norm();
        if (norm == Scalar(0)) return Scalar(0);
        x = m.transpose() * y;
        const Scalar xn = x.norm();
        if (xn == Scalar(0)) return Scalar(0);
        x /= xn;
    }
    return norm;
}

template <class Scalar>
void require_symmetric(const Eigen::MatrixX<Scalar>& p, Scalar tol_rel = Scalar(1e-8)) {
    if (p.rows() != p.cols()) throw std::invalid_argument("covariance must be square");
    const Scalar scale = std::max(p.template lpNorm<Eigen::Infinity>(), Scalar(1e-300));
    if ((p - p.transpose()).template lpNorm<Eigen::Infinity>() > tol_rel * scale)
        throw std::invalid_argument("covariance is not symmetric within tolerance");
}

template <class Scalar>
Eigen::MatrixX<Scalar> symmetrized(const Eigen::MatrixX<Scalar>& m) {
    return ((m + m.transpose()) / 2).eval();
}

/// Phi P Phi^T for a generic column applier (x -> A x on matrix columns).
template <class Scalar, class Apply>
Eigen::MatrixX<Scalar> transition_congruence(Apply&& apply, const Eigen::MatrixX<Scalar>& p,
                                             Scalar dt) {
    const Scalar half = dt * dt / 2;
    Eigen::MatrixX<Scalar> x1 = apply(p);
    Eigen::MatrixX<Scalar> x2 = apply(x1);
    Eigen::MatrixX<Scalar> vt = (p + dt * x1 + half * x2).transpose();
    x1 = apply(vt);
    x2 = apply(x1);
    return vt + dt * x1 + half * x2;
}

/// Exact resolvent of dP/dt = -P R^-1 P over dt: (P^-1 + dt R^-1)^-1,
/// computed as P - P S^T (I + S P S^T)^-1 S P with S = diag(sqrt(dt/R)).
template <class Scalar>
Eigen::MatrixX<Scalar> riccati_measurement_update(const Eigen::MatrixX<Scalar>& p,
                                                  const Eigen::VectorX<Scalar>& r_inv,
                                                  Scalar dt) {
    if (r_inv.size() != p.rows())
        throw std::invalid_argument("riccati_measurement_update: dimension mismatch");
    if (r_inv.minCoeff() < Scalar(0))
        throw std::invalid_argument("riccati_measurement_update: negative noise inverse");
    const Eigen::VectorX<Scalar> s = (dt * r_inv).cwiseSqrt();
    Eigen::MatrixX<Scalar> scaled = s.asDiagonal() * p;          // S P
    Eigen::MatrixX<Scalar> core = scaled * s.asDiagonal();       // S P S^T
    core.diagonal().array() += Scalar(1);
    Eigen::LLT<Eigen::MatrixX<Scalar>> llt(core);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("riccati_measurement_update: factorization failed");
    Eigen::MatrixX<Scalar> y = llt.matrixL().solve(scaled);
    Eigen::MatrixX<Scalar> out = p;
    out.template selfadjointView<Eigen::Lower>().rankUpdate(y.transpose(), Scalar(-1));
    out.template triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

/// One covariance step with a generic applier; output re-symmetrized.
template <class Scalar, class Apply>
Eigen::MatrixX<Scalar> riccati_step_with(Apply&& apply, const Eigen::MatrixX<Scalar>& p,
                                         const Eigen::VectorX<Scalar>& r_inv, Scalar q_proc,
                                         Scalar dt) {
    require_symmetric(p);
    Eigen::MatrixX<Scalar> prop = transition_congruence(apply, p, dt);
    if (q_proc > Scalar(0)) prop.diagonal().array() += q_proc * dt;
    return symmetrized(riccati_measurement_update(symmetrized(prop), r_inv, dt));
}

/// Dense-generator covariance step.
template <class Scalar>
Eigen::MatrixX<Scalar> riccati_step(const Eigen::MatrixX<Scalar>& p,
                                    const Eigen::MatrixX<Scalar>& a,
                                    const Eigen::VectorX<Scalar>& r_inv, Scalar q_proc,
                                    Scalar dt) {
    if (a.rows() != p.rows() || a.cols() != p.cols())
        throw std::invalid_argument("riccati_step: generator dimension mismatch");
    return riccati_step_with([&](const Eigen::MatrixX<Scalar>& x) { return (a * x).eval(); }, p,
                             r_inv, q_proc, dt);
}

/// Density filter: estimate stepped every loop dt, covariance on its own
/// (possibly coarser) clock with CFL substepping.
template <class Scalar>
struct DensityFilter {
    ScalarField<Scalar> estimate;
    Eigen::MatrixX<Scalar> covariance;

    DensityFilter() = default;
    DensityFilter(ScalarField<Scalar> init, Eigen::MatrixX<Scalar> cov0)
        : estimate(std::move(init)), covariance(std::move(cov0)) {
        if (covariance.rows() != estimate.values.size() ||
            covariance.cols() != estimate.values.size())
            throw std::invalid_argument("DensityFilter: covariance dimension mismatch");
    }

    Eigen::MatrixX<Scalar> gain(const NoiseModel<Scalar>& r) const {
        return covariance * r.inverse().asDiagonal();
    }

    /// Fused Euler update of dp/dt = A p + P R^-1 (y - p); mass renormalized.
    void step_estimate(const ScalarField<Scalar>& y, const FokkerPlanckOperator<Scalar>& a,
                       const NoiseModel<Scalar>& r, Scalar dt) {
        if (y.values.size() != estimate.values.size() || r.diag.size() != estimate.values.size())
            throw std::invalid_argument("DensityFilter: dimension mismatch");
        if (dt > a.max_dt())
            throw std::invalid_argument("DensityFilter: dt exceeds stability bound");
        Eigen::VectorX<Scalar> rate(estimate.values.size());
        a.apply_column(estimate.values, rate);
        const Eigen::VectorX<Scalar> innovation =
            r.inverse().cwiseProduct(y.values - estimate.values);
        rate.noalias() += covariance * innovation;
        estimate.values += dt * rate;
        const Scalar mass = estimate.mass();
        if (!(mass > Scalar(0)) || !std::isfinite(mass))
            throw std::runtime_error("DensityFilter: estimate mass is not positive");
        estimate.values /= mass;
    }

    /// Riccati window of length dt_window, substepped to honor the CFL bound.
    void step_covariance(const FokkerPlanckOperator<Scalar>& a, const NoiseModel<Scalar>& r,
                         Scalar dt_window, Scalar q_proc) {
        const int n_sub = substeps(dt_window, a.max_dt());
        const Scalar dt_s = dt_window / Scalar(n_sub);
        const Eigen::VectorX<Scalar> r_inv = r.inverse();
        auto apply = [&](const Eigen::MatrixX<Scalar>& x) { return a.apply_columns(x); };
        for (int i = 0; i < n_sub; ++i)
            covariance = riccati_step_with(apply, covariance, r_inv, q_proc, dt_s);
    }

    static int substeps(Scalar dt_window, Scalar max_dt) {
        if (!(dt_window > Scalar(0)))
            throw std::invalid_argument("step_covariance: window must be positive");
        if (!std::isfinite(max_dt) || dt_window <= max_dt) return 1;
        return int(std::ceil(dt_window / max_dt));
    }
};

/// Gradient filter on the stacked (2M) state. The predictor adds the constant
/// mass drift of the affine gradient dynamics so that exact estimates of an
/// exactly-propagated gradient stay exact for every velocity field.
template <class Scalar>
struct GradientFilter {
    VectorField<Scalar> estimate;
    Eigen::MatrixX<Scalar> covariance;

    GradientFilter() = default;
    GradientFilter(VectorField<Scalar> init, Eigen::MatrixX<Scalar> cov0)
        : estimate(std::move(init)), covariance(std::move(cov0)) {
        if (covariance.rows() != estimate.values.size() ||
            covariance.cols() != estimate.values.size())
            throw std::invalid_argument("GradientFilter: covariance dimension mismatch");
    }

    Eigen::MatrixX<Scalar> gain(const NoiseModel<Scalar>& r_g) const {
        return covariance * r_g.inverse().asDiagonal();
    }

    void step_estimate(const VectorField<Scalar>& y_g, const GradientDynamics<Scalar>& a_g,
                       const NoiseModel<Scalar>& r_g, Scalar dt, Scalar total_mass = Scalar(1),
                       bool with_drift = true) {
        if (y_g.values.size() != estimate.values.size() ||
            r_g.diag.size() != estimate.values.size())
            throw std::invalid_argument("GradientFilter: dimension mismatch");
        if (dt > a_g.max_dt())
            throw std::invalid_argument("GradientFilter: dt exceeds stability bound");
        Eigen::VectorX<Scalar> rate = a_g.apply(estimate.values);
        if (with_drift) rate += a_g.drift(total_mass);
        rate.noalias() +=
            covariance * r_g.inverse().cwiseProduct(y_g.values - estimate.values);
        estimate.values += dt * rate;
    }

    void step_covariance(const GradientDynamics<Scalar>& a_g, const NoiseModel<Scalar>& r_g,
                         Scalar dt_window, Scalar q_proc) {
        const int n_sub = DensityFilter<Scalar>::substeps(dt_window, a_g.max_dt());
        const Scalar dt_s = dt_window / Scalar(n_sub);
        const Eigen::VectorX<Scalar> r_inv = r_g.inverse();
        for (int i = 0; i < n_sub; ++i) {
            require_symmetric(covariance);
            Eigen::MatrixX<Scalar> prop = a_g.congruence(covariance, dt_s);
            if (q_proc > Scalar(0)) prop.diagonal().array() += q_proc * dt_s;
            covariance = symmetrized(riccati_measurement_update(symmetrized(prop), r_inv, dt_s));
        }
    }
};

/// Full filter step: covariance first, then the estimate with the fresh gain.
template <class Scalar>
void density_filter_step(DensityFilter<Scalar>& f, const ScalarField<Scalar>& y,
                         const FokkerPlanckOperator<Scalar>& a, const NoiseModel<Scalar>& r,
                         Scalar dt, Scalar q_proc = Scalar(0)) {
    f.step_covariance(a, r, dt, q_proc);
    f.step_estimate(y, a, r, dt);
}

template <class Scalar>
void gradient_filter_step(GradientFilter<Scalar>& f, const VectorField<Scalar>& y_g,
                          const GradientDynamics<Scalar>& a_g, const NoiseModel<Scalar>& r_g,
                          Scalar dt, Scalar q_proc = Scalar(0), Scalar total_mass = Scalar(1)) {
    f.step_covariance(a_g, r_g, dt, q_proc);
    f.step_estimate(y_g, a_g, r_g, dt, total_mass);
}

template <class Scalar>
struct GainGapSeries {
    std::vector<Scalar> cov_gap;   // ||P_true - P_approx||_2 per step
    std::vector<Scalar> gain_gap;  // ||L_true - L_approx||_2 per step
};

/// Runs the approximate and oracle Riccati flows side by side from the same
/// start and records per-step operator-norm gaps.
template <class Scalar>
GainGapSeries<Scalar> gain_gap(const NoiseModel<Scalar>& r_approx, const NoiseModel<Scalar>& r_true,
                               const Eigen::MatrixX<Scalar>& a, const Eigen::MatrixX<Scalar>& p0,
                               Scalar horizon, Scalar dt, Scalar q_proc = Scalar(0)) {
    const Eigen::VectorX<Scalar> ra = r_approx.inverse(), rt = r_true.inverse();
    Eigen::MatrixX<Scalar> p = p0, pbar = p0;
    GainGapSeries<Scalar> out;
    const int steps = int(std::llround(horizon / dt));
    out.cov_gap.reserve(steps);
    out.gain_gap.reserve(steps);
    for (int k = 0; k < steps; ++k) {
        p = riccati_step(p, a, ra, q_proc, dt);
        pbar = riccati_step(pbar, a, rt, q_proc, dt);
        out.cov_gap.push_back(spectral_norm<Scalar>(pbar - p));
        const Eigen::MatrixX<Scalar> gain = p * ra.asDiagonal();
        const Eigen::MatrixX<Scalar> gain_true = pbar * rt.asDiagonal();
        out.gain_gap.push_back(spectral_norm<Scalar>(gain_true - gain));
    }
    return out;
}

}  // namespace meanfield
