#pragma once

#include <Eigen/Core>

namespace plumeinv {

struct NnlsOptions {
    double tolerance = 1e-10;  // on the scaled KKT residual
    int max_iterations = 0;    // 0 means 3 * columns
};

struct NnlsResult {
    Eigen::VectorXd x;
    double residual_norm = 0.0;  // ||A x - b||
    double kkt_residual = 0.0;   // max_j |min(x_j, g_j)| / max(1, ||A^T b||_inf), g = A^T(Ax - b)
    int iterations = 0;
    bool converged = false;
    // The columns that are free or sit on a zero-gradient bound are linearly
    // dependent, so other minimizers exist.
    bool non_unique = false;
};

// min ||A x - b|| subject to x >= 0 (Lawson-Hanson active set).
NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const NnlsOptions& opts = {});

}  // namespace plumeinv
