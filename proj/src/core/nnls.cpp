#include "plumeinv/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/QR>
#include <spdlog/spdlog.h>

#include "plumeinv/errors.hpp"

namespace plumeinv {

namespace {

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& A, const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd out(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    return out;
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const NnlsOptions& opts) {
    if (A.rows() != b.size()) throw ValidationError("nnls: A and b have incompatible shapes");
    if (!A.allFinite() || !b.allFinite()) throw ValidationError("nnls: non-finite input");
    const Eigen::Index n = A.cols();
    const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(3 * n + 10);
    const double scale = std::max(1.0, (A.transpose() * b).cwiseAbs().maxCoeff());
    const double tol = opts.tolerance * scale;

    NnlsResult res;
    res.x = Eigen::VectorXd::Zero(n);
    std::vector<char> passive(n, 0);
    Eigen::VectorXd w = A.transpose() * (b - A * res.x);

    while (res.iterations < max_iter) {
        Eigen::Index j = -1;
        double best = tol;
        for (Eigen::Index k = 0; k < n; ++k)
            if (!passive[k] && w[k] > best) {
                best = w[k];
                j = k;
            }
        if (j < 0) break;
        passive[j] = 1;
        ++res.iterations;

        // Inner loop: keep the passive-set least-squares solution feasible.
        for (;;) {
            std::vector<Eigen::Index> cols;
            for (Eigen::Index k = 0; k < n; ++k)
                if (passive[k]) cols.push_back(k);
            const Eigen::VectorXd zp = gather_columns(A, cols).colPivHouseholderQr().solve(b);
            bool feasible = true;
            for (Eigen::Index k = 0; k < zp.size(); ++k)
                if (zp[k] <= 0.0) feasible = false;
            if (feasible) {
                res.x.setZero();
                for (std::size_t k = 0; k < cols.size(); ++k) res.x[cols[k]] = zp[static_cast<Eigen::Index>(k)];
                break;
            }
            double alpha = 1.0;
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const double z = zp[static_cast<Eigen::Index>(k)];
                const double x = res.x[cols[k]];
                if (z <= 0.0 && x - z > 0.0) alpha = std::min(alpha, x / (x - z));
            }
            for (std::size_t k = 0; k < cols.size(); ++k)
                res.x[cols[k]] += alpha * (zp[static_cast<Eigen::Index>(k)] - res.x[cols[k]]);
            const double zero = 1e-14 * std::max(1.0, res.x.cwiseAbs().maxCoeff());
            for (const Eigen::Index k : cols)
                if (res.x[k] <= zero) {
                    res.x[k] = 0.0;
                    passive[k] = 0;
                }
        }
        w = A.transpose() * (b - A * res.x);
    }

    const Eigen::VectorXd g = A.transpose() * (A * res.x - b);
    double kkt = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) kkt = std::max(kkt, std::abs(std::min(res.x[k], g[k])));
    res.kkt_residual = kkt / scale;
    res.converged = res.kkt_residual <= opts.tolerance;
    res.residual_norm = (A * res.x - b).norm();

    std::vector<Eigen::Index> free_cols;
    for (Eigen::Index k = 0; k < n; ++k)
        if (res.x[k] > 0.0 || std::abs(g[k]) <= tol) free_cols.push_back(k);
    if (!free_cols.empty()) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gather_columns(A, free_cols));
        res.non_unique = qr.rank() < static_cast<Eigen::Index>(free_cols.size());
    }
    if (!res.converged)
        spdlog::warn("nnls: KKT residual {:.3g} above tolerance after {} iterations", res.kkt_residual,
                     res.iterations);
    if (res.non_unique) spdlog::warn("nnls: minimizer is not unique (rank-deficient active columns)");
    return res;
}

}  // namespace plumeinv
