#pragma once

#include <vector>

#include <Eigen/Core>

#include "plumeinv/forward_model.hpp"
#include "plumeinv/observation.hpp"

namespace plumeinv {

inline constexpr double kSecondsPerYear = 31536000.0;

struct GridSpec {
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;
    int nx = 0, ny = 0;

    void validate() const;
    int cells() const { return nx * ny; }
    double x(int ix) const;
    double y(int iy) const;
    double cell_area() const;
    // Ground-level points, row-major by y then x.
    std::vector<Point3> points() const;
};

struct LowRankFactors {
    Eigen::VectorXd values;   // descending, clamped at 0
    Eigen::MatrixXd vectors;  // N x n_e

    Eigen::Index rank() const { return values.size(); }
    Eigen::MatrixXd reconstruct() const;
};

struct DepositionGrid {
    GridSpec grid;
    Eigen::VectorXd mean;  // kg m^-2 over the period
    Eigen::VectorXd std;   // kg m^-2
};

// H (cells x N): W_dep dt times the ground-level unit kernel.
Eigen::MatrixXd assemble_H(const GridSpec& grid, const ForwardModel& model,
                           Execution exec = Execution::parallel);

// Top n_e eigenpairs of a symmetric matrix; throws ValidationError if the
// input is not symmetric to 1e-8 relative.
LowRankFactors lowrank_truncate(const Eigen::MatrixXd& cov, int n_e);

DepositionGrid deposition_stats(const GridSpec& grid, const Eigen::MatrixXd& H, const Eigen::VectorXd& q,
                                const LowRankFactors& factors);

// Same statistics without storing H: rows are built and consumed in blocks.
DepositionGrid propagate_streaming(const GridSpec& grid, const ForwardModel& model, const Eigen::VectorXd& q,
                                   const LowRankFactors& factors, int block_rows = 512);

// Total annual emission in tonnes: time-mean rate summed over sources times one year.
double annualize(const Eigen::VectorXd& q, int steps);

}  // namespace plumeinv
