#include "plumeinv/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

#include <spdlog/spdlog.h>

#include "plumeinv/errors.hpp"

namespace plumeinv {

void TimeGrid::validate() const {
    if (!(std::isfinite(dt) && dt > 0.0)) throw ValidationError("time grid: dt must be > 0");
    if (count < 2) throw ValidationError("time grid: at least two nodes are required");
    if (!std::isfinite(t0)) throw ValidationError("time grid: t0 must be finite");
}

void WindSeries::validate() const {
    grid.validate();
    const auto n = static_cast<std::size_t>(grid.count);
    if (ux.size() != n || uy.size() != n)
        throw ValidationError("wind series: component length must equal the grid size");
    for (std::size_t j = 0; j < n; ++j)
        if (!std::isfinite(ux[j]) || !std::isfinite(uy[j]))
            throw ValidationError("wind series: non-finite component at step " + std::to_string(j));
}

ForwardModel::ForwardModel(std::vector<SourceSite> sites, WindSeries wind,
                           ParticleProperties particle, StabilityClass stability,
                           KernelOptions options)
    : sites_(std::move(sites)),
      wind_(std::move(wind)),
      particle_(particle),
      stability_(stability),
      options_(options) {
    wind_.validate();
    particle_.validate();
    for (const auto& s : sites_)
        if (!(s.height >= 0.0)) throw ValidationError("source '" + s.id + "': height must be >= 0");
    calm_.resize(wind_.grid.count);
    for (int j = 0; j < wind_.grid.count; ++j)
        calm_[j] = std::hypot(wind_.ux[j], wind_.uy[j]) < options_.calm_wind;
    if (const int n = calm_steps(); n > 0)
        spdlog::warn("forward model: {} of {} steps have calm wind (< {} m/s) and contribute zero",
                     n, wind_.grid.count, options_.calm_wind);
}

int ForwardModel::calm_steps() const {
    return static_cast<int>(std::count(calm_.begin(), calm_.end(), char{1}));
}

double ForwardModel::unit_kernel(const Point3& point, int site, int step) const {
    if (calm_[step]) return 0.0;
    const auto& s = sites_[site];
    const auto lc = rotate_to_wind(point, s, wind_.ux[step], wind_.uy[step]);
    return plume_kernel(lc, particle_, stability_, s.height, options_);
}

double ForwardModel::concentration(const Point3& point, int step, std::span<const double> q) const {
    if (q.size() != static_cast<std::size_t>(unknowns()))
        throw ValidationError("concentration: emission vector has wrong length");
    double c = 0.0;
    for (int i = 0; i < source_count(); ++i) c += q[column(i, step)] * unit_kernel(point, i, step);
    return c;
}

namespace kernels {

Eigen::MatrixXd kernel_table_serial(const ForwardModel& model, std::span<const Point3> points) {
    const int n_pts = static_cast<int>(points.size());
    Eigen::MatrixXd table(n_pts, model.unknowns());
    for (int p = 0; p < n_pts; ++p)
        for (int i = 0; i < model.source_count(); ++i)
            for (int j = 0; j < model.step_count(); ++j)
                table(p, model.column(i, j)) = model.unit_kernel(points[p], i, j);
    return table;
}

void kernel_rows_parallel(const ForwardModel& model, std::span<const Point3> points,
                          Eigen::Ref<Eigen::MatrixXd> out) {
    const int n_pts = static_cast<int>(points.size());
    const int n_src = model.source_count();
    const int n_t = model.step_count();
    if (out.rows() != n_pts || out.cols() != model.unknowns())
        throw ValidationError("kernel_rows_parallel: output block has wrong shape");
    // Exceptions must not escape an OpenMP region; keep the first and rethrow.
    std::exception_ptr failure;
#pragma omp parallel for collapse(2) schedule(static)
    for (int p = 0; p < n_pts; ++p)
        for (int j = 0; j < n_t; ++j) {
            try {
                for (int i = 0; i < n_src; ++i)
                    out(p, model.column(i, j)) = model.unit_kernel(points[p], i, j);
            } catch (...) {
#pragma omp critical(plumeinv_kernel_failure)
                if (!failure) failure = std::current_exception();
            }
        }
    if (failure) std::rethrow_exception(failure);
}

Eigen::MatrixXd kernel_table_parallel(const ForwardModel& model, std::span<const Point3> points) {
    Eigen::MatrixXd table(static_cast<Eigen::Index>(points.size()), model.unknowns());
    kernel_rows_parallel(model, points, table);
    return table;
}

}  // namespace kernels

}  // namespace plumeinv
