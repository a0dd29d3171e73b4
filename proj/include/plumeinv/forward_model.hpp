#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "plumeinv/plume.hpp"
#include "plumeinv/time_grid.hpp"

namespace plumeinv {

// Everything needed to evaluate unit-emission plume kernels G_i(x; t_j) for a
// fixed wind history. Immutable after construction; safe to share across threads.
class ForwardModel {
public:
    ForwardModel(std::vector<SourceSite> sites, WindSeries wind, ParticleProperties particle,
                 StabilityClass stability, KernelOptions options = {});

    const std::vector<SourceSite>& sites() const { return sites_; }
    const WindSeries& wind() const { return wind_; }
    const TimeGrid& grid() const { return wind_.grid; }
    const ParticleProperties& particle() const { return particle_; }
    StabilityClass stability() const { return stability_; }
    const KernelOptions& options() const { return options_; }

    int source_count() const { return static_cast<int>(sites_.size()); }
    int step_count() const { return wind_.grid.count; }
    // Length of the stacked emission vector, N = N_s * N_T.
    int unknowns() const { return source_count() * step_count(); }
    // Source-major index of q_i(t_j).
    int column(int site, int step) const { return site * step_count() + step; }

    bool calm(int step) const { return calm_[step]; }
    int calm_steps() const;

    // Unit-emission kernel of one source at one step, s m^-3. Zero for calm steps.
    double unit_kernel(const Point3& point, int site, int step) const;

    // Concentration at `point` during step j for source-major rates q (length N).
    double concentration(const Point3& point, int step, std::span<const double> q) const;

private:
    std::vector<SourceSite> sites_;
    WindSeries wind_;
    ParticleProperties particle_;
    StabilityClass stability_;
    KernelOptions options_;
    std::vector<char> calm_;
};

namespace kernels {

// Table of unit kernels: row p is point p, column site*N_T + step.
// The serial version is the reference; the parallel one splits rows and steps
// across OpenMP threads and must agree with it bit for bit.
Eigen::MatrixXd kernel_table_serial(const ForwardModel& model, std::span<const Point3> points);
Eigen::MatrixXd kernel_table_parallel(const ForwardModel& model, std::span<const Point3> points);

// Row-major evaluation into a caller-provided block (rows = points.size(), cols = N).
void kernel_rows_parallel(const ForwardModel& model, std::span<const Point3> points,
                          Eigen::Ref<Eigen::MatrixXd> out);

}  // namespace kernels

}  // namespace plumeinv
