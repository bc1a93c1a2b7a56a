#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "meanfield/diagnostics.hpp"
#include "meanfield/fd_ops.hpp"
#include "meanfield/kde.hpp"
#include "meanfield/swarm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace meanfield;

namespace {

constexpr double pi = std::numbers::pi;

GridD unit_grid(int n) { return GridD(n, n, {0, 1, 0, 1}); }

using Samples = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Direct double-loop KDE, the independence oracle for the separable path.
double brute_kde(const Samples& pts, double h, double x, double y) {
    double sum = 0;
    for (int a = 0; a < pts.rows(); ++a) {
        const double dx = (x - pts(a, 0)) / h, dy = (y - pts(a, 1)) / h;
        sum += std::exp(-0.5 * (dx * dx + dy * dy)) / (2 * pi);
    }
    return sum / (double(pts.rows()) * h * h);
}

}  // namespace

TEST_CASE("single sample at a cell center hits the kernel peak value") {
    const GridD g = unit_grid(30);
    Samples pts(1, 2);
    pts << g.cell_x(12), g.cell_y(7);
    const double h = 0.04;
    const ScalarFieldD f = kde_density(pts, h, g);
    CHECK(f(12, 7) == doctest::Approx(1.0 / (2 * pi * h * h)).epsilon(1e-12));
    CHECK(f.values.minCoeff() >= 0.0);

    const VectorFieldD grad = kde_gradient(pts, h, g);
    CHECK(std::abs(grad.x(12, 7)) < 1e-12);
    CHECK(std::abs(grad.y(12, 7)) < 1e-12);
}

TEST_CASE("separable evaluation equals the direct double loop") {
    const GridD g(9, 11, {0, 1, 0, 1});
    Swarm<double> s = init_swarm<double>(23, {0.1, 0.9, 0.2, 0.8}, 5, {0, 1, 0, 1});
    const double h = 0.07;
    const ScalarFieldD f = kde_density(s.positions, h, g);
    const VectorFieldD grad = kde_gradient(s.positions, h, g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const double x = g.cell_x(ix), y = g.cell_y(iy);
            CHECK(f(ix, iy) == doctest::Approx(brute_kde(s.positions, h, x, y)).epsilon(1e-12));
            const double d = 1e-6;
            const double fd_x =
                (brute_kde(s.positions, h, x + d, y) - brute_kde(s.positions, h, x - d, y)) /
                (2 * d);
            CHECK(grad.x(ix, iy) == doctest::Approx(fd_x).epsilon(1e-5));
        }
}

TEST_CASE("uniform sample mass lands in the boundary-truncation window") {
    const GridD g = unit_grid(30);
    const Swarm<double> s = init_swarm<double>(1024, {0, 1, 0, 1}, 17, {0, 1, 0, 1});
    const ScalarFieldD f = kde_density(s.positions, 0.04, g);
    CHECK(f.mass() >= 0.9);
    CHECK(f.mass() <= 1.0);
}

TEST_CASE("kde gradient is consistent with grid differentiation of the density") {
    Samples pts(3, 2);
    pts << 0.3, 0.4, 0.6, 0.55, 0.45, 0.7;
    const double h = 0.08;
    auto err = [&](int n) {
        const GridD g = unit_grid(n);
        const VectorFieldD analytic = kde_gradient(pts, h, g);
        const VectorFieldD fd = gradient(kde_density(pts, h, g));
        double worst = 0;
        for (int iy = 1; iy < g.ny - 1; ++iy)
            for (int ix = 1; ix < g.nx - 1; ++ix) {
                worst = std::max(worst, std::abs(analytic.x(ix, iy) - fd.x(ix, iy)));
                worst = std::max(worst, std::abs(analytic.y(ix, iy) - fd.y(ix, iy)));
            }
        return worst;
    };
    const double e30 = err(30), e60 = err(60);
    CHECK(e30 / e60 > 3.0);
    CHECK(e30 / e60 < 5.0);
}

TEST_CASE("mirror pair makes the x-gradient antisymmetric") {
    const GridD g = unit_grid(20);
    Samples pts(2, 2);
    const double a = 0.18, y0 = 0.5;
    pts << 0.5 - a, y0, 0.5 + a, y0;
    const VectorFieldD grad = kde_gradient(pts, 0.06, g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            CHECK(grad.x(ix, iy) == doctest::Approx(-grad.x(g.nx - 1 - ix, iy)).epsilon(1e-10));
}

TEST_CASE("kde is invariant under sample permutation") {
    const GridD g = unit_grid(15);
    Swarm<double> s = init_swarm<double>(64, {0.2, 0.8, 0.2, 0.8}, 8, {0, 1, 0, 1});
    const ScalarFieldD f1 = kde_density(s.positions, 0.05, g);
    Samples shuffled = s.positions.colwise().reverse().eval();
    const ScalarFieldD f2 = kde_density(shuffled, 0.05, g);
    CHECK((f1.values - f2.values).lpNorm<Eigen::Infinity>() <
          1e-12 * f1.values.lpNorm<Eigen::Infinity>());
}

TEST_CASE("covariance scale constants match the quadrature oracle") {
    // ||K||^2 and ||grad K||^2 for the standard 2-D Gaussian kernel
    double norm_sq = 0, grad_norm_sq = 0;
    const int nq = 1200;
    const double lo = -8.0, step = 16.0 / nq;
    for (int i = 0; i < nq; ++i) {
        const double u = lo + (i + 0.5) * step;
        for (int j = 0; j < nq; ++j) {
            const double w = lo + (j + 0.5) * step;
            const double k = std::exp(-0.5 * (u * u + w * w)) / (2 * pi);
            norm_sq += k * k * step * step;
            grad_norm_sq += (u * u + w * w) * k * k * step * step;
        }
    }
    CHECK(norm_sq == doctest::Approx(1.0 / (4 * pi)).epsilon(1e-9));
    CHECK(grad_norm_sq == doctest::Approx(1.0 / (4 * pi)).epsilon(1e-9));

    const int n = 1024;
    const double h = 0.04;
    const auto cfg = KdeConfig<double>::for_sample_count(h, n);
    CHECK(cfg.k == doctest::Approx(norm_sq / (n * h * h)).epsilon(1e-8));
    CHECK(cfg.k == doctest::Approx(0.04857).epsilon(1e-3));
    CHECK(cfg.k_g == doctest::Approx(grad_norm_sq / (n * h * h * h * h)).epsilon(1e-8));
}

TEST_CASE("noise models floor and scale correctly") {
    const GridD g = unit_grid(6);
    KdeConfig<double> cfg;
    cfg.k = 0.01;
    cfg.k_g = 2.0;
    cfg.floor_eps = 1e-6;

    ScalarFieldD uniform(g, 1.0);
    const NoiseModel<double> r = noise_cov_density(uniform, cfg);
    CHECK((r.diag.array() == 0.01).all());

    ScalarFieldD with_hole = uniform;
    with_hole(2, 3) = 0.0;
    const NoiseModel<double> r2 = noise_cov_density(with_hole, cfg);
    CHECK(r2.diag[g.index(2, 3)] == 1e-6);

    const NoiseModel<double> rg = noise_cov_gradient(VectorFieldD(g), cfg);
    CHECK((rg.diag.array() == 1e-6).all());

    VectorFieldD mixed(g);
    mixed.values.setLinSpaced(2 * g.cells(), -0.4, 0.4);
    const NoiseModel<double> rg2 = noise_cov_gradient(mixed, cfg);
    CHECK(rg2.diag.minCoeff() >= 1e-6);
    CHECK(rg2.diag.maxCoeff() == doctest::Approx(0.8));

    // two-sided bounds on the inverse, as the filter stability assumptions need
    const auto inv = r2.inverse();
    CHECK(inv.maxCoeff() <= 1.0 / cfg.floor_eps + 1e-9);
    CHECK(inv.minCoeff() >= 1.0 / (cfg.k * with_hole.values.maxCoeff()) - 1e-9);
}

TEST_CASE("kde error against the smoothed truth shrinks with sample count") {
    const GridD g = unit_grid(30);
    const double h = 0.04, s0 = 0.15;
    auto density = [&](double x, double y) {
        const double dx = x - 0.5, dy = y - 0.5;
        return std::exp(-(dx * dx + dy * dy) / (2 * s0 * s0));
    };
    // normalize on a fine quadrature grid and smooth with the kernel
    const int nf = 160;
    const double df = 1.0 / nf;
    double mass = 0;
    Eigen::MatrixXd fine(nf, nf);
    for (int j = 0; j < nf; ++j)
        for (int i = 0; i < nf; ++i) {
            fine(i, j) = density((i + 0.5) * df, (j + 0.5) * df);
            mass += fine(i, j) * df * df;
        }
    fine /= mass;
    ScalarFieldD smoothed(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            double acc = 0;
            for (int j = 0; j < nf; ++j)
                for (int i = 0; i < nf; ++i) {
                    const double dx = (g.cell_x(ix) - (i + 0.5) * df) / h;
                    const double dy = (g.cell_y(iy) - (j + 0.5) * df) / h;
                    acc += fine(i, j) * std::exp(-0.5 * (dx * dx + dy * dy)) / (2 * pi * h * h);
                }
            smoothed(ix, iy) = acc * df * df;
        }

    const double peak = 1.0 / (2 * pi * s0 * s0 * mass);
    auto sample_n = [&](int n, std::uint64_t seed) {
        Samples pts(n, 2);
        int got = 0;
        std::uint64_t trial = 0;
        while (got < n) {
            const double x = rng::uniform01(rng::hash(seed, 10, trial, 0));
            const double y = rng::uniform01(rng::hash(seed, 10, trial, 1));
            const double u = rng::uniform01(rng::hash(seed, 10, trial, 2));
            ++trial;
            if (u * peak <= density(x, y) / mass) {
                pts(got, 0) = x;
                pts(got, 1) = y;
                ++got;
            }
        }
        return pts;
    };

    const int seeds = 20;
    double mean_prev = std::numeric_limits<double>::infinity();
    for (int n : {1000, 10000, 100000}) {
        double mean = 0;
        for (int s = 0; s < seeds; ++s) {
            const ScalarFieldD est = kde_density(sample_n(n, 1000 + s), h, g);
            ScalarFieldD diff = est;
            diff.values -= smoothed.values;
            mean += l2_norm(diff);
        }
        mean /= seeds;
        CHECK(mean < mean_prev);
        mean_prev = mean;
    }
}
