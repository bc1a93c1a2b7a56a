/// @file experiment.hpp
/// @brief Experiment configuration, the closed-loop orchestrator, and artifact
/// emission.
///
/// Configuration files are flat "key = value" text with dotted section keys
/// (see parse_config). A run emits metrics.csv, periodic field snapshots, an
/// echo of the configuration, and a run_info.txt summary into output_dir.

#pragma once

#include "meanfield/control.hpp"
#include "meanfield/diagnostics.hpp"
#include "meanfield/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace meanfield {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RunMode { Interconnected, PerfectFeedback, FilterOnly, IssSweep };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& name);

struct ExperimentConfig {
    int nx = 30, ny = 30;
    Rect<double> domain{0, 1, 0, 1};
    int n_agents = 1024;
    std::uint64_t seed = 1;
    double dt = 0.01;       // s
    double t_end = 60.0;    // s
    double sigma = 5e-5;    // sqrt(2 sigma) = 0.01
    double alpha = 0.003;
    double v_max = 0.0;     // 0 disables the cap
    double cfl_safety = 0.9;
    double kde_h = 0.04;
    double floor_eps = 1e-6;
    double q_proc = 1e-8;          // covariance inflation per second
    int riccati_every = 20;        // covariance refresh cadence in loop steps
    TargetSpec<double> target;     // defaults set by default_config()
    double p_min = 0.1;
    Rect<double> init_region{0.15, 0.85, 0.15, 0.85};
    RunMode mode = RunMode::Interconnected;
    int snapshot_every = 1000;     // steps; 0 disables periodic snapshots
    bool snapshot_pgm = false;
    bool snapshot_agents = false;
    std::string output_dir = "out";
    std::vector<double> iss_deltas{0.0, 0.01, 0.05, 0.1};
    std::string source_text;       // verbatim config text when loaded from file

    GridD grid() const { return GridD(nx, ny, domain); }
    int steps() const { return int(std::llround(t_end / dt)); }

    /// Throws ConfigError on invalid combinations, including a CFL precheck
    /// against the target-law velocity scale.
    void validate() const;
};

/// Paper-default setup: 30x30 unit square, 1024 agents, two-mode mixture target.
ExperimentConfig default_config();

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

struct MetricRow {
    int step = 0;
    double t = 0;
    double err_track = 0;  // ||p - p_star||
    double err_est = 0;    // ||p_hat - p||
    double err_grad = 0;   // ||q_hat - grad p||
    double lyapunov = 0;
    double mass = 0;       // estimate mass
    double kde_err = 0;    // ||p_kde - p||

    bool all_finite() const {
        for (double v : {t, err_track, err_est, err_grad, lyapunov, mass, kde_err})
            if (!std::isfinite(v)) return false;
        return true;
    }
};

struct ExperimentLog {
    std::vector<MetricRow> rows;
    std::vector<double> err_to_target;  // ||p_hat - p_star|| per step
    std::vector<double> truth_mass;     // reference-density mass per step
    std::vector<std::uint64_t> velocity_checksums;
    std::vector<int> snapshot_steps;
    std::string config_echo;
    double wall_seconds = 0;
    double min_density = std::numeric_limits<double>::infinity();
};

/// Runs one closed-loop experiment (interconnected, perfect_feedback, or
/// filter_only) and writes all artifacts into cfg.output_dir.
ExperimentLog run_experiment(const ExperimentConfig& cfg);

/// Disturbance-injection sweep over cfg.iss_deltas; writes iss_sweep.csv.
std::vector<IssPoint<double>> run_iss_sweep(const ExperimentConfig& cfg);

// -- artifact writers ------------------------------------------------------

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
void write_field_snapshot(const std::filesystem::path& path, const ScalarFieldD& field);
ScalarFieldD read_field_snapshot(const std::filesystem::path& path, const GridD& grid);
void write_pgm_heatmap(const std::filesystem::path& path, const ScalarFieldD& field);
void write_agent_positions(const std::filesystem::path& path,
                           const Eigen::Matrix<double, Eigen::Dynamic, 2>& positions);
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::uint64_t fnv1a(const void* data, std::size_t size);

// -- self-check suite for the `validate` subcommand -------------------------

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

std::vector<CheckResult> run_validation_suite();

}  // namespace meanfield
