#include "plumeinv/prior.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "plumeinv/errors.hpp"

namespace plumeinv {

DenseCovariance::DenseCovariance(Eigen::MatrixXd cov) : cov_(std::move(cov)) {
    if (cov_.rows() != cov_.cols()) throw ValidationError("covariance must be square");
    if (!cov_.isApprox(cov_.transpose(), 1e-10)) throw ValidationError("covariance must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_);
    const Eigen::VectorXd lambda = es.eigenvalues();
    const double lmax = std::max(lambda.cwiseAbs().maxCoeff(), 0.0);
    if (lambda.minCoeff() < -1e-8 * lmax) throw NumericalError("covariance is not positive semi-definite");
    factor_ = es.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

void PriorSpec::validate() const {
    if (!(alpha > 0.0) || !(gamma > 0.0)) throw ValidationError("prior: alpha and gamma must be > 0");
    if (!(dt > 0.0)) throw ValidationError("prior: dt must be > 0");
    if (steps < 2) throw ValidationError("prior: at least two time steps are required");
    if (sources < 0) throw ValidationError("prior: negative source count");
}

Eigen::SparseMatrix<double> neumann_laplacian(int steps, double dt) {
    const double s = std::pow(steps * dt / dt, 2);
    std::vector<Eigen::Triplet<double>> t;
    for (int j = 0; j < steps; ++j) {
        const bool edge = j == 0 || j == steps - 1;
        t.emplace_back(j, j, edge ? -s : -2.0 * s);
        if (j > 0) t.emplace_back(j, j - 1, s);
        if (j + 1 < steps) t.emplace_back(j, j + 1, s);
    }
    Eigen::SparseMatrix<double> d(steps, steps);
    d.setFromTriplets(t.begin(), t.end());
    return d;
}

Eigen::SparseMatrix<double> smoothness_operator(const PriorSpec& spec) {
    spec.validate();
    Eigen::SparseMatrix<double> eye(spec.steps, spec.steps);
    eye.setIdentity();
    const double scale = spec.alpha * std::sqrt(spec.dt / spec.span());
    return scale * (eye - spec.gamma * neumann_laplacian(spec.steps, spec.dt));
}

struct SmoothnessPrior::Solver {
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
};

SmoothnessPrior::SmoothnessPrior(const PriorSpec& spec)
    : spec_(spec), L_(smoothness_operator(spec)), solver_(std::make_unique<Solver>()) {
    solver_->llt.compute(L_);
    if (solver_->llt.info() != Eigen::Success) throw NumericalError("prior: L is not positive definite");
}

SmoothnessPrior::~SmoothnessPrior() = default;

Eigen::Index SmoothnessPrior::dim() const { return static_cast<Eigen::Index>(spec_.steps) * spec_.sources; }

Eigen::MatrixXd SmoothnessPrior::apply(const Eigen::MatrixXd& x) const {
    if (x.rows() != dim()) throw ValidationError("prior: vector has wrong length");
    const int n_t = spec_.steps;
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (int i = 0; i < spec_.sources; ++i) {
        const Eigen::MatrixXd once = solver_->llt.solve(x.middleRows(i * n_t, n_t));
        out.middleRows(i * n_t, n_t) = solver_->llt.solve(once);
    }
    return out;
}

Eigen::MatrixXd SmoothnessPrior::block() const {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(spec_.steps, spec_.steps);
    const Eigen::MatrixXd inv = solver_->llt.solve(eye);
    return solver_->llt.solve(inv);
}

Eigen::MatrixXd SmoothnessPrior::dense() const {
    const Eigen::MatrixXd b = block();
    const int n_t = spec_.steps;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim(), dim());
    for (int i = 0; i < spec_.sources; ++i) c.block(i * n_t, i * n_t, n_t, n_t) = b;
    return c;
}

Eigen::VectorXd SmoothnessPrior::diagonal() const {
    const Eigen::VectorXd b = block().diagonal();
    return b.replicate(spec_.sources, 1);
}

Eigen::VectorXd SmoothnessPrior::sample(const Eigen::VectorXd& xi) const {
    if (xi.size() != dim()) throw ValidationError("prior: noise vector has wrong length");
    const int n_t = spec_.steps;
    Eigen::VectorXd w(xi.size());
    for (int i = 0; i < spec_.sources; ++i) w.segment(i * n_t, n_t) = solver_->llt.solve(xi.segment(i * n_t, n_t));
    return w;
}

}  // namespace plumeinv
