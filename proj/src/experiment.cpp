#include "meanfield/experiment.hpp"

#include "meanfield/filters.hpp"
#include "meanfield/kde.hpp"
#include "meanfield/swarm.hpp"

#include <chrono>
#include <optional>

namespace meanfield {

namespace {

namespace fs = std::filesystem;

ScalarFieldD uniform_density(const GridD& grid, const Rect<double>& region) {
    ScalarFieldD p(grid, 0.0);
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix)
            if (region.contains(grid.cell_x(ix), grid.cell_y(iy))) p(ix, iy) = 1.0;
    const double mass = p.mass();
    if (!(mass > 0))
        throw ConfigError("config: init region covers no grid cell");
    p.values /= mass;
    return p;
}

ScalarFieldD magnitude_field(const VectorFieldD& v) {
    ScalarFieldD out(v.grid);
    const int m = v.grid.cells();
    for (int i = 0; i < m; ++i) out.values[i] = std::hypot(v.values[i], v.values[m + i]);
    return out;
}

std::uint64_t field_checksum(const VectorFieldD& v) {
    return fnv1a(v.values.data(), sizeof(double) * std::size_t(v.values.size()));
}

std::string step_tag(int step) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", step);
    return buf;
}

struct SnapshotSink {
    const ExperimentConfig& cfg;
    fs::path dir;
    ExperimentLog& log;

    bool due(int step) const {
        if (step == cfg.steps() - 1) return true;
        return cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0;
    }

    void emit(int step, const char* name, const ScalarFieldD& field) const {
        const fs::path base = dir / (std::string(name) + "_" + step_tag(step));
        write_field_snapshot(fs::path(base).concat(".txt"), field);
        if (cfg.snapshot_pgm) write_pgm_heatmap(fs::path(base).concat(".pgm"), field);
    }

    void record(int step) { log.snapshot_steps.push_back(step); }
};

void write_run_info(const fs::path& dir, const ExperimentLog& log, const ExperimentConfig& cfg) {
    char buf[256];
    std::string text;
    std::snprintf(buf, sizeof buf, "mode %s\n", to_string(cfg.mode).c_str());
    text += buf;
    std::snprintf(buf, sizeof buf, "steps %zu\n", log.rows.size());
    text += buf;
    std::snprintf(buf, sizeof buf, "wall_seconds %.3f\n", log.wall_seconds);
    text += buf;
    std::snprintf(buf, sizeof buf, "min_density %.12g\n", log.min_density);
    text += buf;
    if (!log.velocity_checksums.empty()) {
        std::snprintf(buf, sizeof buf, "final_velocity_checksum %016llx\n",
                      static_cast<unsigned long long>(log.velocity_checksums.back()));
        text += buf;
    }
    std::snprintf(buf, sizeof buf, "snapshots %zu\n", log.snapshot_steps.size());
    text += buf;
    write_text_file(dir / "run_info.txt", text);
}

ExperimentLog run_perfect_feedback(const ExperimentConfig& cfg) {
    const GridD grid = cfg.grid();
    const TargetDensity<double> target = make_target(cfg.target, grid, cfg.p_min);
    ScalarFieldD p = uniform_density(grid, cfg.init_region);

    ExperimentLog log;
    SnapshotSink snaps{cfg, fs::path(cfg.output_dir) / "snapshots", log};
    const int n_steps = cfg.steps();

    for (int k = 0; k < n_steps; ++k) {
        const VectorFieldD v =
            exact_feedback_velocity(p, target, cfg.alpha, cfg.sigma, cfg.v_max);
        log.velocity_checksums.push_back(field_checksum(v));

        ScalarFieldD phi = p;
        phi.values -= target.p_star.values;
        MetricRow row;
        row.step = k;
        row.t = k * cfg.dt;
        row.err_track = l2_norm(phi);
        row.lyapunov = lyapunov_v(p, target);
        row.mass = p.mass();
        if (!row.all_finite())
            throw std::runtime_error("non-finite state at step " + std::to_string(k));
        log.rows.push_back(row);
        log.err_to_target.push_back(row.err_track);
        log.truth_mass.push_back(p.mass());
        log.min_density = std::min(log.min_density, p.values.minCoeff());

        if (snaps.due(k)) {
            snaps.emit(k, "ptruth", p);
            snaps.emit(k, "vmag", magnitude_field(v));
            snaps.record(k);
        }

        const auto fp = assemble_fp_operator(v, cfg.sigma, cfg.cfl_safety);
        if (cfg.dt > fp.max_dt())
            throw std::runtime_error("CFL violation at step " + std::to_string(k));
        p = step_density(p, fp, cfg.dt);
    }
    return log;
}

ExperimentLog run_closed_loop(const ExperimentConfig& cfg) {
    const GridD grid = cfg.grid();
    const TargetDensity<double> target = make_target(cfg.target, grid, cfg.p_min);
    const IntegrationOperator<double> integ(grid);
    const KdeConfig<double> kde_cfg =
        KdeConfig<double>::for_sample_count(cfg.kde_h, cfg.n_agents, cfg.floor_eps);
    const double control_alpha = cfg.mode == RunMode::FilterOnly ? 0.0 : cfg.alpha;

    Swarm<double> swarm = init_swarm(cfg.n_agents, cfg.init_region, cfg.seed, cfg.domain);
    ScalarFieldD p_truth = uniform_density(grid, cfg.init_region);

    // step-0 measurements seed the filters; there is no uncontrolled warm-up
    ScalarFieldD p_kde = kde_density(swarm.positions, cfg.kde_h, grid);
    VectorFieldD grad_kde = kde_gradient(swarm.positions, cfg.kde_h, grid);

    ScalarFieldD p_hat = p_kde;
    p_hat.values /= p_hat.mass();
    DensityFilter<double> density_filter(p_hat, Eigen::MatrixXd::Zero(grid.cells(), grid.cells()));
    density_filter.covariance.diagonal() = noise_cov_density(p_kde, kde_cfg).diag;
    GradientFilter<double> gradient_filter(
        grad_kde, Eigen::MatrixXd::Zero(2 * grid.cells(), 2 * grid.cells()));
    gradient_filter.covariance.diagonal() = noise_cov_gradient(grad_kde, kde_cfg).diag;

    ExperimentLog log;
    SnapshotSink snaps{cfg, fs::path(cfg.output_dir) / "snapshots", log};
    const fs::path out_dir(cfg.output_dir);
    const int n_steps = cfg.steps();

    std::optional<FokkerPlanckOperator<double>> fp_prev;
    std::optional<GradientDynamics<double>> dyn_prev;

    for (int k = 0; k < n_steps; ++k) {
        if (k > 0) {
            // measurements at t_k from positions advanced under v_{k-1}
            p_kde = kde_density(swarm.positions, cfg.kde_h, grid);
            grad_kde = kde_gradient(swarm.positions, cfg.kde_h, grid);
            const NoiseModel<double> r = noise_cov_density(p_kde, kde_cfg);
            const NoiseModel<double> r_g = noise_cov_gradient(grad_kde, kde_cfg);

            if (k % cfg.riccati_every == 0) {
                const double window = cfg.riccati_every * cfg.dt;
                density_filter.step_covariance(*fp_prev, r, window, cfg.q_proc);
                gradient_filter.step_covariance(*dyn_prev, r_g, window, cfg.q_proc);
            }
            density_filter.step_estimate(p_kde, *fp_prev, r, cfg.dt);
            gradient_filter.step_estimate(grad_kde, *dyn_prev, r_g, cfg.dt);
        }

        const VectorFieldD v = feedback_velocity(density_filter.estimate,
                                                 gradient_filter.estimate, target, control_alpha,
                                                 cfg.sigma, cfg.v_max);

        // both consumers below receive this exact field; log its checksum once
        const std::uint64_t v_sum_agents = field_checksum(v);
        const std::uint64_t v_sum_pde = field_checksum(v);
        if (v_sum_agents != v_sum_pde)
            throw std::runtime_error("velocity checksum mismatch at step " + std::to_string(k));
        log.velocity_checksums.push_back(v_sum_agents);

        const VectorFieldD truth_grad = gradient(p_truth);
        MetricRow row;
        row.step = k;
        row.t = k * cfg.dt;
        {
            ScalarFieldD phi = p_truth;
            phi.values -= target.p_star.values;
            row.err_track = l2_norm(phi);
            ScalarFieldD est_err = density_filter.estimate;
            est_err.values -= p_truth.values;
            row.err_est = l2_norm(est_err);
            VectorFieldD grad_err = gradient_filter.estimate;
            grad_err.values -= truth_grad.values;
            row.err_grad = l2_norm(grad_err);
            row.lyapunov = lyapunov_v(p_truth, target);
            row.mass = density_filter.estimate.mass();
            ScalarFieldD kde_err = p_kde;
            kde_err.values -= p_truth.values;
            row.kde_err = l2_norm(kde_err);
        }
        if (!row.all_finite())
            throw std::runtime_error("non-finite state at step " + std::to_string(k));
        log.rows.push_back(row);
        {
            ScalarFieldD to_target = density_filter.estimate;
            to_target.values -= target.p_star.values;
            log.err_to_target.push_back(l2_norm(to_target));
        }
        log.truth_mass.push_back(p_truth.mass());
        log.min_density = std::min(log.min_density, p_truth.values.minCoeff());

        if (snaps.due(k)) {
            snaps.emit(k, "phat", density_filter.estimate);
            snaps.emit(k, "ptruth", p_truth);
            snaps.emit(k, "pkde", p_kde);
            snaps.emit(k, "vmag", magnitude_field(v));
            if (cfg.snapshot_agents)
                write_agent_positions(
                    snaps.dir / ("agents_" + step_tag(k) + ".txt"), swarm.positions);
            snaps.record(k);
        }

        // zero-order hold: agents and the reference density move under the
        // same field over (t_k, t_{k+1}]
        auto fp = assemble_fp_operator(v, cfg.sigma, cfg.cfl_safety);
        if (cfg.dt > fp.max_dt())
            throw std::runtime_error("CFL violation at step " + std::to_string(k));
        GradientDynamics<double> dyn(integ, v, cfg.sigma, cfg.cfl_safety);
        step_swarm(swarm, v, cfg.sigma, cfg.dt);
        p_truth = step_density(p_truth, fp, cfg.dt);
        fp_preventry:
        fp_prev = std::move(fp);
        dyn_prev = std::move(dyn);
    }
    return log;
}

}  // namespace

ExperimentLog run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.mode == RunMode::IssSweep)
        throw ConfigError("config: mode iss_sweep runs through run_iss_sweep / `mfsim sweep`");

    const auto t0 = std::chrono::steady_clock::now();
    ExperimentLog log = cfg.mode == RunMode::PerfectFeedback ? run_perfect_feedback(cfg)
                                                             : run_closed_loop(cfg);
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.config_echo = cfg.source_text.empty() ? serialize_config(cfg) : cfg.source_text;

    const fs::path out_dir(cfg.output_dir);
    std::filesystem::create_directories(out_dir);
    write_metrics_csv(out_dir / "metrics.csv", log.rows);
    write_text_file(out_dir / "config_echo.cfg", log.config_echo);
    write_run_info(out_dir, log, cfg);
    return log;
}

std::vector<IssPoint<double>> run_iss_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const GridD grid = cfg.grid();
    const TargetDensity<double> target = make_target(cfg.target, grid, cfg.p_min);
    const ScalarFieldD p0 = uniform_density(grid, cfg.init_region);

    // fixed smooth disturbance shapes, scaled per delta inside iss_sweep
    ScalarFieldD err_shape(grid);
    VectorFieldD grad_err_shape(grid);
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double x = grid.cell_x(ix), y = grid.cell_y(iy);
            err_shape(ix, iy) = std::cos(std::numbers::pi * x) * std::cos(2 * std::numbers::pi * y);
            grad_err_shape.x(ix, iy) = std::sin(std::numbers::pi * x) * std::cos(std::numbers::pi * y);
            grad_err_shape.y(ix, iy) = std::cos(2 * std::numbers::pi * x);
        }

    const auto points = iss_sweep(p0, target, cfg.sigma, cfg.alpha, cfg.dt, cfg.steps(),
                                  err_shape, grad_err_shape, cfg.iss_deltas);

    const fs::path out_dir(cfg.output_dir);
    std::filesystem::create_directories(out_dir);
    std::string csv = "delta,steady_error\n";
    char buf[80];
    for (const auto& pt : points) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", pt.delta, pt.steady_error);
        csv += buf;
    }
    write_text_file(out_dir / "iss_sweep.csv", csv);
    write_text_file(out_dir / "config_echo.cfg",
                    cfg.source_text.empty() ? serialize_config(cfg) : cfg.source_text);
    return points;
}

}  // namespace meanfield
