#include "meanfield/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace meanfield {

namespace {

struct FileHandle {
    std::FILE* f = nullptr;
    explicit FileHandle(const std::filesystem::path& path, const char* mode) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        f = std::fopen(path.string().c_str(), mode);
        if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    ~FileHandle() {
        if (f) std::fclose(f);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
    FileHandle out(path, "wb");
    std::fputs("step,t,err_track,err_est,err_grad,lyapunov,mass,kde_err\n", out.f);
    for (const MetricRow& r : rows)
        std::fprintf(out.f, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.step, r.t,
                     r.err_track, r.err_est, r.err_grad, r.lyapunov, r.mass, r.kde_err);
}

void write_field_snapshot(const std::filesystem::path& path, const ScalarFieldD& field) {
    FileHandle out(path, "wb");
    const GridD& g = field.grid;
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix)
            std::fprintf(out.f, ix ? " %.12g" : "%.12g", field(ix, iy));
        std::fputc('\n', out.f);
    }
}

ScalarFieldD read_field_snapshot(const std::filesystem::path& path, const GridD& grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    ScalarFieldD field(grid);
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix)
            if (!(in >> field(ix, iy)))
                throw std::runtime_error("snapshot '" + path.string() + "' is truncated");
    return field;
}

void write_pgm_heatmap(const std::filesystem::path& path, const ScalarFieldD& field) {
    const GridD& g = field.grid;
    const double lo = field.values.minCoeff(), hi = field.values.maxCoeff();
    const double span = hi - lo;
    {
        FileHandle out(path, "wb");
        std::fprintf(out.f, "P5\n%d %d\n255\n", g.nx, g.ny);
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const double u = span > 0 ? (field(ix, iy) - lo) / span : 0.0;
                std::fputc(int(std::lround(u * 255.0)), out.f);
            }
    }
    std::filesystem::path sidecar = path;
    sidecar += ".minmax.txt";
    FileHandle out(sidecar, "wb");
    std::fprintf(out.f, "%.12g %.12g\n", lo, hi);
}

void write_agent_positions(const std::filesystem::path& path,
                           const Eigen::Matrix<double, Eigen::Dynamic, 2>& positions) {
    FileHandle out(path, "wb");
    for (Eigen::Index a = 0; a < positions.rows(); ++a)
        std::fprintf(out.f, "%.12g %.12g\n", positions(a, 0), positions(a, 1));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    FileHandle out(path, "wb");
    std::fwrite(text.data(), 1, text.size(), out.f);
}

std::uint64_t fnv1a(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace meanfield
