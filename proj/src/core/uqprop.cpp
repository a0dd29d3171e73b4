#include "plumeinv/uqprop.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <lapacke.h>
#include <spdlog/spdlog.h>

#include "plumeinv/errors.hpp"

namespace plumeinv {

void GridSpec::validate() const {
    if (!(x_max > x_min) || !(y_max > y_min)) throw ValidationError("grid: upper bounds must exceed lower bounds");
    if (nx < 2 || ny < 2) throw ValidationError("grid: nx and ny must be >= 2");
}

double GridSpec::x(int ix) const { return x_min + (x_max - x_min) * ix / (nx - 1); }
double GridSpec::y(int iy) const { return y_min + (y_max - y_min) * iy / (ny - 1); }

double GridSpec::cell_area() const { return (x_max - x_min) / (nx - 1) * (y_max - y_min) / (ny - 1); }

std::vector<Point3> GridSpec::points() const {
    validate();
    std::vector<Point3> pts;
    pts.reserve(static_cast<std::size_t>(cells()));
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) pts.push_back({x(ix), y(iy), 0.0});
    return pts;
}

Eigen::MatrixXd LowRankFactors::reconstruct() const {
    return vectors * values.asDiagonal() * vectors.transpose();
}

Eigen::MatrixXd assemble_H(const GridSpec& grid, const ForwardModel& model, Execution exec) {
    const auto pts = grid.points();
    Eigen::MatrixXd H = exec == Execution::parallel ? kernels::kernel_table_parallel(model, pts)
                                                    : kernels::kernel_table_serial(model, pts);
    H *= model.particle().w_dep * model.grid().dt;
    return H;
}

LowRankFactors lowrank_truncate(const Eigen::MatrixXd& cov, int n_e) {
    const auto n = static_cast<lapack_int>(cov.rows());
    if (cov.cols() != cov.rows()) throw ValidationError("lowrank: matrix must be square");
    if (n_e < 1 || n_e > n) throw ValidationError("lowrank: n_e must lie in [1, N]");
    const double norm = cov.norm();
    if ((cov - cov.transpose()).norm() > 1e-8 * std::max(norm, 1e-300))
        throw ValidationError("lowrank: matrix is not symmetric");

    Eigen::MatrixXd a = cov;  // overwritten by LAPACK
    Eigen::VectorXd w(n);
    Eigen::MatrixXd z(n, n_e);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n_e));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, a.data(), n, 0.0, 0.0,
                                           n - n_e + 1, n, 0.0, &found, w.data(), z.data(), n,
                                           support.data());
    if (info != 0 || found != n_e)
        throw NumericalError("lowrank: symmetric eigensolver failed (info " + std::to_string(info) + ")");

    LowRankFactors f;
    f.values.resize(n_e);
    f.vectors.resize(n, n_e);
    for (int e = 0; e < n_e; ++e) {  // LAPACK returns ascending order
        f.values[e] = w[n_e - 1 - e];
        f.vectors.col(e) = z.col(n_e - 1 - e);
    }
    const double top = std::max(f.values[0], 0.0);
    int clamped = 0;
    for (int e = 0; e < n_e; ++e)
        if (f.values[e] < 0.0) {
            if (f.values[e] < -1e-8 * top)
                spdlog::warn("lowrank: eigenvalue {} = {:.3g} is significantly negative", e, f.values[e]);
            f.values[e] = 0.0;
            ++clamped;
        }
    if (clamped > 0) spdlog::info("lowrank: clamped {} negative eigenvalues to zero", clamped);
    return f;
}

namespace {

void stats_rows(const Eigen::MatrixXd& Hb, const Eigen::VectorXd& q, const LowRankFactors& f,
                Eigen::Ref<Eigen::VectorXd> mean, Eigen::Ref<Eigen::VectorXd> sd) {
    mean = Hb * q;
    if (f.rank() == 0) {
        sd.setZero();
        return;
    }
    const Eigen::MatrixXd P = Hb * f.vectors;  // one forward application per eigenvector
    sd = (P.array().square().rowwise() * f.values.transpose().array()).rowwise().sum().sqrt();
}

}  // namespace

DepositionGrid deposition_stats(const GridSpec& grid, const Eigen::MatrixXd& H, const Eigen::VectorXd& q,
                                const LowRankFactors& factors) {
    grid.validate();
    if (H.rows() != grid.cells() || H.cols() != q.size() || (factors.rank() > 0 && factors.vectors.rows() != q.size()))
        throw ValidationError("deposition_stats: dimension mismatch");
    DepositionGrid out{grid, Eigen::VectorXd(H.rows()), Eigen::VectorXd(H.rows())};
    stats_rows(H, q, factors, out.mean, out.std);
    return out;
}

DepositionGrid propagate_streaming(const GridSpec& grid, const ForwardModel& model, const Eigen::VectorXd& q,
                                   const LowRankFactors& factors, int block_rows) {
    if (q.size() != model.unknowns() || (factors.rank() > 0 && factors.vectors.rows() != q.size()))
        throw ValidationError("propagate: dimension mismatch");
    const auto pts = grid.points();
    const int cells = grid.cells();
    const int block = std::max(1, block_rows);
    const double scale = model.particle().w_dep * model.grid().dt;
    DepositionGrid out{grid, Eigen::VectorXd(cells), Eigen::VectorXd(cells)};
    Eigen::MatrixXd Hb;
    for (int r0 = 0; r0 < cells; r0 += block) {
        const int rows = std::min(block, cells - r0);
        Hb.resize(rows, model.unknowns());
        kernels::kernel_rows_parallel(model, std::span<const Point3>(pts).subspan(r0, rows), Hb);
        Hb *= scale;
        stats_rows(Hb, q, factors, out.mean.segment(r0, rows), out.std.segment(r0, rows));
    }
    return out;
}

double annualize(const Eigen::VectorXd& q, int steps) {
    if (steps < 1 || q.size() % steps != 0) throw ValidationError("annualize: q length is not a multiple of N_T");
    return q.sum() / steps * kSecondsPerYear / 1000.0;
}

}  // namespace plumeinv
