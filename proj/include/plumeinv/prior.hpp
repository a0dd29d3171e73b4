#pragma once

#include <memory>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace plumeinv {

// Symmetric positive semi-definite covariance that can be applied and sampled
// without necessarily being stored.
class CovarianceOperator {
public:
    virtual ~CovarianceOperator() = default;

    virtual Eigen::Index dim() const = 0;
    // C x for each column of x.
    virtual Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const = 0;
    virtual Eigen::MatrixXd dense() const = 0;
    virtual Eigen::VectorXd diagonal() const = 0;
    // Maps a standard normal vector xi to a draw from N(0, C).
    virtual Eigen::VectorXd sample(const Eigen::VectorXd& xi) const = 0;
};

class DenseCovariance final : public CovarianceOperator {
public:
    // Throws NumericalError if cov is not positive semi-definite.
    explicit DenseCovariance(Eigen::MatrixXd cov);

    Eigen::Index dim() const override { return cov_.rows(); }
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const override { return cov_ * x; }
    Eigen::MatrixXd dense() const override { return cov_; }
    Eigen::VectorXd diagonal() const override { return cov_.diagonal(); }
    Eigen::VectorXd sample(const Eigen::VectorXd& xi) const override { return factor_ * xi; }

private:
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd factor_;  // factor_ * factor_^T = cov_
};

struct PriorSpec {
    double alpha = 1.0;
    double gamma = 5e-3;
    double dt = 3600.0;  // s
    int steps = 0;       // N_T
    int sources = 0;     // N_s

    double span() const { return steps * dt; }
    void validate() const;
};

// Neumann second-difference matrix scaled to the unit interval: (T/dt)^2 times
// the tridiagonal stencil with rows (-1, 1), (1, -2, 1), ..., (1, -1).
Eigen::SparseMatrix<double> neumann_laplacian(int steps, double dt);

// L = alpha sqrt(dt/T) (I - gamma Delta), symmetric positive definite.
Eigen::SparseMatrix<double> smoothness_operator(const PriorSpec& spec);

// C = I_{N_s} (x) L^{-2} on source-major vectors, applied with sparse solves.
class SmoothnessPrior final : public CovarianceOperator {
public:
    explicit SmoothnessPrior(const PriorSpec& spec);
    ~SmoothnessPrior() override;

    const PriorSpec& spec() const { return spec_; }
    const Eigen::SparseMatrix<double>& operator_L() const { return L_; }

    Eigen::Index dim() const override;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const override;
    Eigen::MatrixXd dense() const override;
    Eigen::VectorXd diagonal() const override;
    // w = L^{-1} xi per source block, so Cov(w) = L^{-2}.
    Eigen::VectorXd sample(const Eigen::VectorXd& xi) const override;

    // The N_T x N_T block L^{-2}.
    Eigen::MatrixXd block() const;

private:
    struct Solver;
    PriorSpec spec_;
    Eigen::SparseMatrix<double> L_;
    std::unique_ptr<Solver> solver_;
};

}  // namespace plumeinv
