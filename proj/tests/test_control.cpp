#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "meanfield/control.hpp"
#include "meanfield/diagnostics.hpp"

#include <cmath>

using namespace meanfield;

namespace {

GridD unit_grid(int n) { return GridD(n, n, {0, 1, 0, 1}); }

TargetSpec<double> two_bump_spec() {
    TargetSpec<double> spec;
    spec.kind = TargetSpec<double>::Kind::GaussianMixture;
    spec.components = {{0.5, 0.3, 0.3, 0.02, 0.02, 0.0}, {0.5, 0.7, 0.7, 0.02, 0.02, 0.0}};
    return spec;
}

}  // namespace

TEST_CASE("uniform target is flat with zero gradient") {
    const GridD g = unit_grid(16);
    const auto target = make_target(TargetSpec<double>{}, g, 0.1);
    CHECK((target.p_star.values.array() - 1.0).abs().maxCoeff() < 1e-13);
    CHECK(target.grad_p_star.values.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("every target spec yields unit mass above the floor") {
    const GridD g = unit_grid(24);
    TargetSpec<double> ring;
    ring.kind = TargetSpec<double>::Kind::Ring;
    ring.ring_radius = 0.25;
    ring.ring_width = 0.06;
    for (const auto& spec : {TargetSpec<double>{}, two_bump_spec(), ring}) {
        const auto target = make_target(spec, g, 0.07);
        CHECK(std::abs(target.p_star.mass() - 1.0) <= 1e-12);
        CHECK(target.p_star.values.minCoeff() >= 0.07 * (1 - 1e-12));
        // gradient recomputed from the final field
        CHECK((target.grad_p_star.values - gradient(target.p_star).values)
                  .lpNorm<Eigen::Infinity>() == 0.0);
    }
}

TEST_CASE("symmetric single gaussian has antisymmetric gradient") {
    const GridD g = unit_grid(20);
    TargetSpec<double> spec;
    spec.kind = TargetSpec<double>::Kind::GaussianMixture;
    spec.components = {{1.0, 0.5, 0.5, 0.03, 0.03, 0.0}};
    const auto target = make_target(spec, g, 0.05);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            CHECK(target.grad_p_star.x(ix, iy) ==
                  doctest::Approx(-target.grad_p_star.x(g.nx - 1 - ix, iy)).epsilon(1e-10));
            CHECK(target.grad_p_star.y(ix, iy) ==
                  doctest::Approx(-target.grad_p_star.y(ix, g.ny - 1 - iy)).epsilon(1e-10));
        }
}

TEST_CASE("make_target validates inputs") {
    const GridD g = unit_grid(8);
    CHECK_THROWS_AS(make_target(TargetSpec<double>{}, g, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_target(TargetSpec<double>{}, g, 1.0), std::invalid_argument);
    TargetSpec<double> bad;
    bad.kind = TargetSpec<double>::Kind::GaussianMixture;
    bad.components = {{1.0, 0.5, 0.5, -0.01, 0.02, 0.0}};
    CHECK_THROWS_AS(make_target(bad, g, 0.1), std::invalid_argument);
}

TEST_CASE("feedback at the target reduces to the seeding term") {
    const GridD g = unit_grid(18);
    const auto target = make_target(two_bump_spec(), g, 0.1);
    const double sigma = 5e-5;
    const VectorFieldD v =
        feedback_velocity(target.p_star, target.grad_p_star, target, 0.003, sigma);
    const int m = g.cells();
    for (int block = 0; block < 2; ++block) {
        const Eigen::ArrayXd expect = sigma *
                                      target.grad_p_star.values.segment(block * m, m).array() /
                                      target.p_star.values.array();
        CHECK((v.values.segment(block * m, m).array() - expect).abs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("uniform target with matching estimate gives zero velocity") {
    const GridD g = unit_grid(10);
    const auto target = make_target(TargetSpec<double>{}, g, 0.2);
    const VectorFieldD v =
        feedback_velocity(target.p_star, VectorFieldD(g), target, 0.003, 5e-5);
    CHECK(v.values.lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("alpha = 0 removes all dependence on the estimates") {
    const GridD g = unit_grid(12);
    const auto target = make_target(two_bump_spec(), g, 0.1);
    ScalarFieldD p1(g, 0.7), p2(g, 2.0);
    VectorFieldD q1(g), q2(g);
    q2.values.setConstant(3.0);
    const VectorFieldD a = feedback_velocity(p1, q1, target, 0.0, 5e-5);
    const VectorFieldD b = feedback_velocity(p2, q2, target, 0.0, 5e-5);
    CHECK((a.values - b.values).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("feedback term is positively homogeneous in alpha") {
    const GridD g = unit_grid(14);
    const auto target = make_target(two_bump_spec(), g, 0.1);
    ScalarFieldD p(g, 1.0);
    p.values += 0.3 * target.p_star.values;
    const VectorFieldD q = gradient(p);

    // with sigma = 0 the law is the bare feedback term: doubling is bitwise
    const VectorFieldD v1 = feedback_velocity(p, q, target, 0.003, 0.0);
    const VectorFieldD v2 = feedback_velocity(p, q, target, 0.006, 0.0);
    CHECK((v2.values - 2.0 * v1.values).lpNorm<Eigen::Infinity>() == 0.0);

    // with sigma > 0, subtracting the seeding term recovers the same scaling
    const double sigma = 5e-5;
    const VectorFieldD base = feedback_velocity(p, q, target, 0.0, sigma);
    const VectorFieldD w1 = feedback_velocity(p, q, target, 0.003, sigma);
    const VectorFieldD w2 = feedback_velocity(p, q, target, 0.006, sigma);
    const Eigen::VectorXd lhs = w2.values - base.values;
    const Eigen::VectorXd rhs = 2.0 * (w1.values - base.values);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-13 * lhs.lpNorm<Eigen::Infinity>() + 1e-18);
}

TEST_CASE("exact feedback law at the target and for uniform targets") {
    const GridD g = unit_grid(16);
    const auto target = make_target(two_bump_spec(), g, 0.1);
    const double sigma = 4e-4;
    const VectorFieldD v = exact_feedback_velocity(target.p_star, target, 0.003, sigma);
    const int m = g.cells();
    for (int block = 0; block < 2; ++block) {
        const Eigen::ArrayXd expect = sigma *
                                      target.grad_p_star.values.segment(block * m, m).array() /
                                      target.p_star.values.array();
        CHECK((v.values.segment(block * m, m).array() - expect).abs().maxCoeff() < 1e-12);
    }

    const auto uniform = make_target(TargetSpec<double>{}, g, 0.2);
    ScalarFieldD p(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            p(ix, iy) = 1.0 + 0.2 * std::sin(3 * g.cell_x(ix)) * std::cos(2 * g.cell_y(iy));
    const double alpha = 0.01;
    const VectorFieldD law = exact_feedback_velocity(p, uniform, alpha, 0.0);
    // p_star is uniform one, so v = -alpha * grad p
    CHECK((law.values + alpha * gradient(p).values).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("estimate-form and ratio-form laws agree at second order") {
    const double alpha = 0.003, sigma = 5e-5;
    auto gap = [&](int n) {
        const GridD g = unit_grid(n);
        const auto target = make_target(two_bump_spec(), g, 0.1);
        ScalarFieldD p(g);
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const double x = g.cell_x(ix), y = g.cell_y(iy);
                p(ix, iy) = 1.0 + 0.4 * std::cos(std::numbers::pi * x) *
                                      std::cos(std::numbers::pi * y);
            }
        const VectorFieldD a = feedback_velocity(p, gradient(p), target, alpha, sigma);
        const VectorFieldD b = exact_feedback_velocity(p, target, alpha, sigma);
        return (a.values - b.values).lpNorm<Eigen::Infinity>();
    };
    const double g15 = gap(15), g30 = gap(30);
    CHECK(g15 / g30 > 2.5);
    CHECK(g15 / g30 < 6.0);
}

TEST_CASE("velocity magnitude cap") {
    const GridD g = unit_grid(12);
    const auto target = make_target(two_bump_spec(), g, 0.05);
    ScalarFieldD p(g, 2.0);
    VectorFieldD q(g);
    q.values.setConstant(50.0);
    const VectorFieldD capped = feedback_velocity(p, q, target, 0.01, 5e-5, 0.25);
    CHECK(capped.max_norm() <= 0.25 + 1e-12);
    const VectorFieldD raw = feedback_velocity(p, q, target, 0.01, 5e-5);
    CHECK(raw.max_norm() > 0.25);
}

TEST_CASE("feedback rejects invalid inputs") {
    const GridD g = unit_grid(6);
    const auto target = make_target(TargetSpec<double>{}, g, 0.1);
    ScalarFieldD p(g, 1.0);
    VectorFieldD q(g);
    CHECK_THROWS_AS(feedback_velocity(p, q, target, -0.1, 1e-4), std::invalid_argument);
    ScalarFieldD bad = p;
    bad.values[0] = std::nan("");
    CHECK_THROWS_AS(feedback_velocity(bad, q, target, 0.1, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(exact_feedback_velocity(bad, target, 0.1, 1e-4), std::invalid_argument);
}

TEST_CASE("control config forwards through the convenience overload") {
    const GridD g = unit_grid(8);
    const auto target = make_target(two_bump_spec(), g, 0.1);
    ScalarFieldD p(g, 1.0);
    const VectorFieldD q = gradient(p);
    ControlConfig<double> cfg{0.004, 0.0};
    const VectorFieldD a = feedback_velocity(p, q, target, cfg, 1e-4);
    const VectorFieldD b = feedback_velocity(p, q, target, 0.004, 1e-4);
    CHECK(a.values == b.values);
}
