#include <doctest.h>

#include <limits>
#include <random>

#include <Eigen/Dense>

#include "plumeinv/nnls.hpp"

using namespace plumeinv;

namespace {

// Exhaustive search over passive sets: unconstrained least squares on each
// subset, keep the best feasible one.
Eigen::VectorXd brute_force_nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    const int n = static_cast<int>(A.cols());
    Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
    double best_obj = b.squaredNorm();
    for (int mask = 1; mask < (1 << n); ++mask) {
        std::vector<int> cols;
        for (int j = 0; j < n; ++j)
            if (mask & (1 << j)) cols.push_back(j);
        Eigen::MatrixXd sub(A.rows(), cols.size());
        for (std::size_t k = 0; k < cols.size(); ++k) sub.col(k) = A.col(cols[k]);
        const Eigen::VectorXd z = sub.colPivHouseholderQr().solve(b);
        if ((z.array() < 0.0).any()) continue;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < cols.size(); ++k) x[cols[k]] = z[k];
        const double obj = (A * x - b).squaredNorm();
        if (obj < best_obj) {
            best_obj = obj;
            best = x;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("single column examples") {
    Eigen::MatrixXd A(2, 1);
    A << 1, 2;
    auto r = nnls(A, Eigen::Vector2d(1, 2));
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.converged);
    r = nnls(A, Eigen::Vector2d(-1, -2));
    CHECK(r.x[0] == 0.0);
    CHECK(r.converged);
    CHECK(r.residual_norm == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("noiseless data are recovered exactly") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd A(30, 6);
        for (int i = 0; i < A.size(); ++i) A.data()[i] = n(rng);
        Eigen::VectorXd p(6);
        for (int j = 0; j < 6; ++j) p[j] = j % 3 == 0 ? 0.0 : std::abs(n(rng));
        const auto r = nnls(A, A * p);
        CHECK((r.x - p).lpNorm<Eigen::Infinity>() < 1e-8);
    }
}

TEST_CASE("matches exhaustive active-set search and satisfies KKT") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::MatrixXd A(12, 5);
        Eigen::VectorXd b(12);
        for (int i = 0; i < A.size(); ++i) A.data()[i] = n(rng);
        for (int i = 0; i < b.size(); ++i) b[i] = n(rng);
        const auto r = nnls(A, b);
        const Eigen::VectorXd ref = brute_force_nnls(A, b);
        CHECK((r.x - ref).lpNorm<Eigen::Infinity>() < 1e-9);
        CHECK((r.x.array() >= 0.0).all());
        const Eigen::VectorXd g = A.transpose() * (A * r.x - b);
        for (int j = 0; j < 5; ++j) {
            CHECK(g[j] > -1e-9);
            CHECK(std::abs(r.x[j] * g[j]) < 1e-9);
        }
        CHECK(r.kkt_residual <= 1e-10);
        CHECK_FALSE(r.non_unique);
    }
}

TEST_CASE("rank-deficient problems return a minimizer and flag non-uniqueness") {
    Eigen::MatrixXd A(3, 2);
    A << 1, 1, 2, 2, 3, 3;
    const Eigen::Vector3d b(1, 2, 3);
    const auto r = nnls(A, b);
    CHECK(r.x.sum() == doctest::Approx(1.0));
    CHECK(r.residual_norm < 1e-10);
    CHECK(r.non_unique);
}

TEST_CASE("zero right-hand side") {
    const auto r = nnls(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3));
    CHECK(r.x.isZero());
    CHECK(r.converged);
}
