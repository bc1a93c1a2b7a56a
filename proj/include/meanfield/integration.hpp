/// @file integration.hpp
/// @brief Recovery of a scalar field from its gradient (discrete anti-gradient).
///
/// Solves the normal equations G^T G f = G^T q of the discrete gradient in
/// least-squares sense. The one-dimensional nullspace of constants is pinned by
/// total mass: the linear part returns the zero-mass solution and the affine
/// recovery adds mass/|Omega|. Regularizing G^T G with gamma*a*a^T (a = cell
/// area weights) makes the system positive definite without disturbing the
/// zero-mass solution, since gradients of constants vanish.

#pragma once

#include "meanfield/fd_ops.hpp"
#include "meanfield/grid.hpp"

namespace meanfield {

template <class Scalar>
class IntegrationOperator {
  public:
    explicit IntegrationOperator(const Grid<Scalar>& grid) : grid_(grid) {
        if (grid.nx < 2 || grid.ny < 2)
            throw std::invalid_argument("IntegrationOperator: need at least 2 cells per axis");
        const int m = grid.cells();
        grad_ = gradient_matrix(grid);
        Eigen::MatrixX<Scalar> normal = grad_.transpose() * grad_;
        const Scalar da = grid.cell_area();
        const Scalar a_sq = Scalar(m) * da * da;  // ||a||^2 for a = da * ones
        const Scalar gamma = normal.trace() / (Scalar(m) * a_sq);
        normal += (gamma * da * da) * Eigen::MatrixX<Scalar>::Ones(m, m);
        llt_.compute(normal);
        if (llt_.info() != Eigen::Success)
            throw std::runtime_error("IntegrationOperator: Poisson solve failed to factorize");
        linear_ = llt_.solve(grad_.transpose());
        if (llt_.info() != Eigen::Success)
            throw std::runtime_error("IntegrationOperator: Poisson solve did not converge");
    }

    const Grid<Scalar>& grid() const { return grid_; }

    /// Linear part (M x 2M): maps a vector field to the zero-mass potential.
    const Eigen::MatrixX<Scalar>& linear_matrix() const { return linear_; }

    /// Dense discrete gradient (2M x M).
    const Eigen::MatrixX<Scalar>& grad_matrix() const { return grad_; }

    Eigen::VectorX<Scalar> apply_linear(const Eigen::VectorX<Scalar>& q) const {
        return linear_ * q;
    }

    Eigen::MatrixX<Scalar> apply_linear_columns(const Eigen::MatrixX<Scalar>& q) const {
        return linear_ * q;
    }

    /// Full recovery: linear part plus the constant fixed by total mass.
    ScalarField<Scalar> recover(const VectorField<Scalar>& q, Scalar total_mass) const {
        if (q.grid != grid_) throw std::invalid_argument("IntegrationOperator: grid mismatch");
        Eigen::VectorX<Scalar> f = linear_ * q.values;
        f.array() += total_mass / grid_.bounds.area();
        return {grid_, std::move(f)};
    }

    /// Subtract each column's mean (projector onto zero-mass fields).
    void remove_mass_columns(Eigen::MatrixX<Scalar>& m) const {
        const Eigen::RowVectorX<Scalar> mu = m.colwise().mean();
        m.rowwise() -= mu;
    }

  private:
    Grid<Scalar> grid_;
    Eigen::MatrixX<Scalar> grad_;
    Eigen::MatrixX<Scalar> linear_;
    Eigen::LLT<Eigen::MatrixX<Scalar>> llt_;
};

/// Free-function form of the recovery.
template <class Scalar>
ScalarField<Scalar> integration_op(const VectorField<Scalar>& q, Scalar total_mass) {
    return IntegrationOperator<Scalar>(q.grid).recover(q, total_mass);
}

}  // namespace meanfield
