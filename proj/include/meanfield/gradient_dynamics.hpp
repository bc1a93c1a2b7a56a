/// @file gradient_dynamics.hpp
/// @brief Generator of the density-gradient evolution.
///
/// The gradient q = grad(p) of a density evolving under the Fokker-Planck
/// generator A obeys dq/dt = G A I(q) where I recovers the density from its
/// gradient. With the mass-pinned recovery the map splits into a linear part
/// A_g = G A K (K the zero-mass anti-gradient) and a constant drift
/// G A u0 carrying the known total mass; the drift vanishes whenever the
/// discrete flux divergence of the velocity is zero.

#pragma once

#include "meanfield/generator.hpp"
#include "meanfield/integration.hpp"

namespace meanfield {

template <class Scalar>
class GradientDynamics {
  public:
    GradientDynamics(const IntegrationOperator<Scalar>& integ, const VectorField<Scalar>& v,
                     Scalar sigma, Scalar cfl_safety = Scalar(0.9))
        : integ_(&integ), fp_(v, sigma, cfl_safety) {
        if (v.grid != integ.grid())
            throw std::invalid_argument("GradientDynamics: grid mismatch");
    }

    const Grid<Scalar>& grid() const { return integ_->grid(); }
    const FokkerPlanckOperator<Scalar>& fp() const { return fp_; }
    Scalar max_dt() const { return fp_.max_dt(); }

    /// A_g q for one stacked gradient column (length 2M).
    Eigen::VectorX<Scalar> apply(const Eigen::VectorX<Scalar>& q) const {
        Eigen::VectorX<Scalar> mid = integ_->apply_linear(q);
        Eigen::VectorX<Scalar> rate(grid().cells());
        fp_.apply_column(mid, rate);
        Eigen::MatrixX<Scalar> col = rate;
        return gradient_columns(grid(), col).col(0);
    }

    /// Constant drift completing the affine dynamics for a known total mass.
    Eigen::VectorX<Scalar> drift(Scalar total_mass = Scalar(1)) const {
        const int m = grid().cells();
        Eigen::VectorX<Scalar> uniform =
            Eigen::VectorX<Scalar>::Constant(m, total_mass / grid().bounds.area());
        Eigen::VectorX<Scalar> rate(m);
        fp_.apply_column(uniform, rate);
        Eigen::MatrixX<Scalar> col = rate;
        return gradient_columns(grid(), col).col(0);
    }

    /// Dense A_g = G A K, (2M x 2M).
    Eigen::MatrixX<Scalar> matrix() const {
        return gradient_columns(grid(), fp_.apply_columns(integ_->linear_matrix()));
    }

    /// Phi Q Phi^T with Phi = I + dt A_g + dt^2/2 A_g^2, evaluated without
    /// forming A_g: two dense products through K, stencils elsewhere.
    Eigen::MatrixX<Scalar> congruence(const Eigen::MatrixX<Scalar>& q, Scalar dt) const {
        const int m2 = 2 * grid().cells();
        if (q.rows() != m2 || q.cols() != m2)
            throw std::invalid_argument("GradientDynamics: covariance dimension mismatch");
        const auto& integ = *integ_;

        // B x = G A x (per column); pi removes the mass component.
        auto apply_a = [&](const Eigen::MatrixX<Scalar>& x) { return fp_.apply_columns(x); };
        auto apply_b = [&](const Eigen::MatrixX<Scalar>& x) {
            return gradient_columns(grid(), apply_a(x));
        };
        auto project = [&](Eigen::MatrixX<Scalar> x) {
            integ.remove_mass_columns(x);
            return x;
        };

        const Eigen::MatrixX<Scalar> t = integ.apply_linear_columns(q);       // K Q
        const Eigen::MatrixX<Scalar> w = integ.apply_linear_columns(t.transpose());  // K Q K^T
        const Eigen::MatrixX<Scalar> m1 = apply_b(t);                          // A_g Q
        const Eigen::MatrixX<Scalar> m2m = apply_b(project(apply_a(t)));       // A_g^2 Q
        const Eigen::MatrixX<Scalar> y1 = apply_b(w);                          // B W
        const Eigen::MatrixX<Scalar> m3 = apply_b(y1.transpose()).transpose(); // A_g Q A_g^T
        const Eigen::MatrixX<Scalar> u = apply_b(project(apply_a(w)));         // G A pi A W
        const Eigen::MatrixX<Scalar> m4 = apply_b(u.transpose()).transpose();  // A_g^2 Q A_g^T
        const Eigen::MatrixX<Scalar> m5 =
            apply_b(project(apply_a(u.transpose()))).transpose();              // A_g^2 Q A_g^2T

        const Scalar t2 = dt * dt, t3 = t2 * dt, t4 = t3 * dt;
        Eigen::MatrixX<Scalar> out = q;
        out += dt * (m1 + m1.transpose());
        out += t2 * m3 + (t2 / 2) * (m2m + m2m.transpose());
        out += (t3 / 2) * (m4 + m4.transpose());
        out += (t4 / 4) * m5;
        return out;
    }

  private:
    const IntegrationOperator<Scalar>* integ_;
    FokkerPlanckOperator<Scalar> fp_;
};

/// Dense gradient-dynamics generator for (v, sigma).
template <class Scalar>
Eigen::MatrixX<Scalar> assemble_gradient_operator(const IntegrationOperator<Scalar>& integ,
                                                  const VectorField<Scalar>& v, Scalar sigma) {
    return GradientDynamics<Scalar>(integ, v, sigma).matrix();
}

}  // namespace meanfield
