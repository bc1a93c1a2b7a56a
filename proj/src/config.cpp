#include "meanfield/experiment.hpp"

#include "meanfield/generator.hpp"

#include <cctype>
#include <cstdio>
#include <map>
#include <sstream>

namespace meanfield {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_number(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double x = std::stod(value, &used);
        if (trim(value.substr(used)).empty()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("config: key '" + key + "' has non-numeric value '" + value + "'");
}

long long parse_integer(const std::string& key, const std::string& value) {
    const double x = parse_number(key, value);
    const long long n = std::llround(x);
    if (double(n) != x)
        throw ConfigError("config: key '" + key + "' must be an integer, got '" + value + "'");
    return n;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "on" || value == "1") return true;
    if (value == "false" || value == "off" || value == "0") return false;
    throw ConfigError("config: key '" + key + "' must be a boolean, got '" + value + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::string normalized = value;
    for (char& c : normalized)
        if (c == ',') c = ' ';
    std::istringstream in(normalized);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_number(key, tok));
    if (out.empty()) throw ConfigError("config: key '" + key + "' has an empty list");
    return out;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// target.c<i>.<field> -> (i, field), or nullopt
bool component_key(const std::string& key, int& index, std::string& field) {
    if (key.rfind("target.c", 0) != 0) return false;
    const size_t dot = key.find('.', 8);
    if (dot == std::string::npos) return false;
    const std::string idx = key.substr(8, dot - 8);
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) return false;
    index = std::stoi(idx);
    field = key.substr(dot + 1);
    return true;
}

}  // namespace

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Interconnected: return "interconnected";
        case RunMode::PerfectFeedback: return "perfect_feedback";
        case RunMode::FilterOnly: return "filter_only";
        case RunMode::IssSweep: return "iss_sweep";
    }
    return "interconnected";
}

RunMode run_mode_from_string(const std::string& name) {
    if (name == "interconnected") return RunMode::Interconnected;
    if (name == "perfect_feedback") return RunMode::PerfectFeedback;
    if (name == "filter_only") return RunMode::FilterOnly;
    if (name == "iss_sweep") return RunMode::IssSweep;
    throw ConfigError("config: unknown mode '" + name + "'");
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.target.kind = TargetSpec<double>::Kind::GaussianMixture;
    cfg.target.components = {{0.5, 0.3, 0.3, 0.02, 0.02, 0.0},
                             {0.5, 0.7, 0.7, 0.02, 0.02, 0.0}};
    return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg = default_config();
    bool saw_sqrt_2sigma = false;
    double sqrt_2sigma = 0;
    bool saw_components = false;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not of the form 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " has an empty key or value");

        int ci = 0;
        std::string cfield;
        if (key == "grid.nx") cfg.nx = int(parse_integer(key, value));
        else if (key == "grid.ny") cfg.ny = int(parse_integer(key, value));
        else if (key == "grid.x_min") cfg.domain.x_min = parse_number(key, value);
        else if (key == "grid.x_max") cfg.domain.x_max = parse_number(key, value);
        else if (key == "grid.y_min") cfg.domain.y_min = parse_number(key, value);
        else if (key == "grid.y_max") cfg.domain.y_max = parse_number(key, value);
        else if (key == "agents.n") cfg.n_agents = int(parse_integer(key, value));
        else if (key == "seed") cfg.seed = std::uint64_t(parse_integer(key, value));
        else if (key == "dt") cfg.dt = parse_number(key, value);
        else if (key == "t_end") cfg.t_end = parse_number(key, value);
        else if (key == "sigma") cfg.sigma = parse_number(key, value);
        else if (key == "sqrt_2sigma") {
            saw_sqrt_2sigma = true;
            sqrt_2sigma = parse_number(key, value);
        } else if (key == "alpha") cfg.alpha = parse_number(key, value);
        else if (key == "control.v_max") cfg.v_max = parse_number(key, value);
        else if (key == "cfl_safety") cfg.cfl_safety = parse_number(key, value);
        else if (key == "kde.h") cfg.kde_h = parse_number(key, value);
        else if (key == "kde.floor_eps") cfg.floor_eps = parse_number(key, value);
        else if (key == "kde.q_proc") cfg.q_proc = parse_number(key, value);
        else if (key == "filters.riccati_every")
            cfg.riccati_every = int(parse_integer(key, value));
        else if (key == "target.kind") {
            if (value == "uniform") cfg.target.kind = TargetSpec<double>::Kind::Uniform;
            else if (value == "gaussian-mixture")
                cfg.target.kind = TargetSpec<double>::Kind::GaussianMixture;
            else if (value == "ring") cfg.target.kind = TargetSpec<double>::Kind::Ring;
            else throw ConfigError("config: unknown target.kind '" + value + "'");
        } else if (key == "target.p_min") cfg.p_min = parse_number(key, value);
        else if (key == "target.ring.center") {
            const auto xy = parse_list(key, value);
            if (xy.size() != 2) throw ConfigError("config: target.ring.center needs two values");
            cfg.target.ring_cx = xy[0];
            cfg.target.ring_cy = xy[1];
        } else if (key == "target.ring.radius") cfg.target.ring_radius = parse_number(key, value);
        else if (key == "target.ring.width") cfg.target.ring_width = parse_number(key, value);
        else if (component_key(key, ci, cfield)) {
            if (!saw_components) {
                cfg.target.components.clear();  // file defines its own mixture
                saw_components = true;
            }
            if (ci > 63) throw ConfigError("config: too many mixture components");
            if (int(cfg.target.components.size()) <= ci)
                cfg.target.components.resize(ci + 1);
            auto& comp = cfg.target.components[size_t(ci)];
            if (cfield == "weight") comp.weight = parse_number(key, value);
            else if (cfield == "mean") {
                const auto xy = parse_list(key, value);
                if (xy.size() != 2)
                    throw ConfigError("config: " + key + " needs two values");
                comp.mean_x = xy[0];
                comp.mean_y = xy[1];
            } else if (cfield == "cov") {
                const auto c = parse_list(key, value);
                if (c.size() != 2 && c.size() != 3)
                    throw ConfigError("config: " + key + " needs 'sxx syy [sxy]'");
                comp.cov_xx = c[0];
                comp.cov_yy = c[1];
                comp.cov_xy = c.size() == 3 ? c[2] : 0.0;
            } else throw ConfigError("config: unknown component field '" + cfield + "'");
        } else if (key == "init.x_min") cfg.init_region.x_min = parse_number(key, value);
        else if (key == "init.x_max") cfg.init_region.x_max = parse_number(key, value);
        else if (key == "init.y_min") cfg.init_region.y_min = parse_number(key, value);
        else if (key == "init.y_max") cfg.init_region.y_max = parse_number(key, value);
        else if (key == "mode") cfg.mode = run_mode_from_string(value);
        else if (key == "snapshot_every") cfg.snapshot_every = int(parse_integer(key, value));
        else if (key == "snapshot.pgm") cfg.snapshot_pgm = parse_bool(key, value);
        else if (key == "snapshot.agents") cfg.snapshot_agents = parse_bool(key, value);
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "iss.deltas") cfg.iss_deltas = parse_list(key, value);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    if (saw_sqrt_2sigma) cfg.sigma = sqrt_2sigma * sqrt_2sigma / 2.0;
    cfg.source_text = text;
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw ConfigError("config: cannot open file '" + path + "'");
    std::string text;
    char buf[4096];
    size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
    std::fclose(f);
    try {
        return parse_config(text);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + " (in '" + path + "')");
    }
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "grid.nx = " << cfg.nx << "\n";
    out << "grid.ny = " << cfg.ny << "\n";
    out << "grid.x_min = " << format_number(cfg.domain.x_min) << "\n";
    out << "grid.x_max = " << format_number(cfg.domain.x_max) << "\n";
    out << "grid.y_min = " << format_number(cfg.domain.y_min) << "\n";
    out << "grid.y_max = " << format_number(cfg.domain.y_max) << "\n";
    out << "agents.n = " << cfg.n_agents << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "dt = " << format_number(cfg.dt) << "\n";
    out << "t_end = " << format_number(cfg.t_end) << "\n";
    out << "sigma = " << format_number(cfg.sigma) << "\n";
    out << "alpha = " << format_number(cfg.alpha) << "\n";
    out << "control.v_max = " << format_number(cfg.v_max) << "\n";
    out << "cfl_safety = " << format_number(cfg.cfl_safety) << "\n";
    out << "kde.h = " << format_number(cfg.kde_h) << "\n";
    out << "kde.floor_eps = " << format_number(cfg.floor_eps) << "\n";
    out << "kde.q_proc = " << format_number(cfg.q_proc) << "\n";
    out << "filters.riccati_every = " << cfg.riccati_every << "\n";
    switch (cfg.target.kind) {
        case TargetSpec<double>::Kind::Uniform:
            out << "target.kind = uniform\n";
            break;
        case TargetSpec<double>::Kind::GaussianMixture:
            out << "target.kind = gaussian-mixture\n";
            for (size_t i = 0; i < cfg.target.components.size(); ++i) {
                const auto& c = cfg.target.components[i];
                out << "target.c" << i << ".weight = " << format_number(c.weight) << "\n";
                out << "target.c" << i << ".mean = " << format_number(c.mean_x) << " "
                    << format_number(c.mean_y) << "\n";
                out << "target.c" << i << ".cov = " << format_number(c.cov_xx) << " "
                    << format_number(c.cov_yy) << " " << format_number(c.cov_xy) << "\n";
            }
            break;
        case TargetSpec<double>::Kind::Ring:
            out << "target.kind = ring\n";
            out << "target.ring.center = " << format_number(cfg.target.ring_cx) << " "
                << format_number(cfg.target.ring_cy) << "\n";
            out << "target.ring.radius = " << format_number(cfg.target.ring_radius) << "\n";
            out << "target.ring.width = " << format_number(cfg.target.ring_width) << "\n";
            break;
    }
    out << "target.p_min = " << format_number(cfg.p_min) << "\n";
    out << "init.x_min = " << format_number(cfg.init_region.x_min) << "\n";
    out << "init.x_max = " << format_number(cfg.init_region.x_max) << "\n";
    out << "init.y_min = " << format_number(cfg.init_region.y_min) << "\n";
    out << "init.y_max = " << format_number(cfg.init_region.y_max) << "\n";
    out << "mode = " << to_string(cfg.mode) << "\n";
    out << "snapshot_every = " << cfg.snapshot_every << "\n";
    out << "snapshot.pgm = " << (cfg.snapshot_pgm ? "true" : "false") << "\n";
    out << "snapshot.agents = " << (cfg.snapshot_agents ? "true" : "false") << "\n";
    out << "output_dir = " << cfg.output_dir << "\n";
    out << "iss.deltas =";
    for (double d : cfg.iss_deltas) out << " " << format_number(d);
    out << "\n";
    return out.str();
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (nx < 2 || ny < 2) fail("grid needs at least 2 cells per axis");
    if (!(domain.width() > 0) || !(domain.height() > 0)) fail("domain must have positive extent");
    if (n_agents < 1) fail("agents.n must be >= 1");
    if (!(dt > 0)) fail("dt must be positive");
    if (steps() < 1) fail("t_end must cover at least one step");
    if (!(sigma >= 0) || !std::isfinite(sigma)) fail("sigma must be finite and >= 0");
    if (!(alpha >= 0)) fail("alpha must be >= 0");
    if (!(v_max >= 0)) fail("control.v_max must be >= 0");
    if (!(cfl_safety > 0) || cfl_safety > 1) fail("cfl_safety must be in (0, 1]");
    if (!(kde_h > 0)) fail("kde.h must be positive");
    if (!(floor_eps > 0)) fail("kde.floor_eps must be positive");
    if (!(q_proc >= 0)) fail("kde.q_proc must be >= 0");
    if (riccati_every < 1) fail("filters.riccati_every must be >= 1");
    if (!(p_min > 0) || !(p_min * domain.area() < 1))
        fail("target.p_min must satisfy 0 < p_min < 1/area");
    if (!domain.contains(init_region)) fail("init region must lie inside the domain");
    if (!(init_region.width() >= 0) || !(init_region.height() >= 0))
        fail("init region must have nonnegative extent");
    if (snapshot_every < 0) fail("snapshot_every must be >= 0");
    for (size_t i = 0; i < iss_deltas.size(); ++i) {
        if (!(iss_deltas[i] >= 0)) fail("iss.deltas must be >= 0");
        if (i > 0 && iss_deltas[i] < iss_deltas[i - 1]) fail("iss.deltas must be ascending");
    }

    // CFL precheck against the target-law velocity scale
    TargetDensity<double> tgt;
    try {
        tgt = make_target(target, grid(), p_min);
    } catch (const std::invalid_argument& e) {
        fail(std::string("invalid target: ") + e.what());
    }
    const VectorFieldD seeding =
        feedback_velocity(tgt.p_star, tgt.grad_p_star, tgt, 0.0, sigma);
    const double bound = cfl_max_dt(grid(), sigma, seeding.max_norm(), cfl_safety);
    if (dt > bound)
        fail("dt " + format_number(dt) + " violates the CFL bound " + format_number(bound) +
             " for the configured sigma and target-law velocity scale");
}

}  // namespace meanfield
