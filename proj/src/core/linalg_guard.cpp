#include "plumeinv/linalg_guard.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <spdlog/spdlog.h>

#include "plumeinv/errors.hpp"

namespace plumeinv {

namespace {

constexpr const char* kCoreTypeVar = "OPENBLAS_CORETYPE";
constexpr const char* kFallbackCore = "Haswell";
constexpr double kTolerance = 1e-10;

}  // namespace

double blas_self_check() {
    const int n = 96;
    Eigen::MatrixXd a(n, n), b(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            a(i, j) = std::sin(0.37 * i + 1.3 * j) + (i == j ? 2.0 : 0.0);
            b(i, j) = std::cos(0.11 * i - 0.7 * j);
        }
    const Eigen::MatrixXd blas = a * b;
    const Eigen::MatrixXd ref = a.lazyProduct(b);
    double worst = (blas - ref).norm() / ref.norm();

    Eigen::MatrixXd spd = a.lazyProduct(a.transpose());
    spd.diagonal().array() += 1.0;
    const Eigen::LLT<Eigen::MatrixXd> llt(spd);
    if (llt.info() != Eigen::Success) return INFINITY;
    const Eigen::MatrixXd l = llt.matrixL();
    worst = std::max(worst, (l.lazyProduct(l.transpose()) - spd).norm() / spd.norm());
    return std::isfinite(worst) ? worst : INFINITY;
}

void ensure_sane_blas(char** argv) {
    const double err = blas_self_check();
    if (err <= kTolerance) return;
    if (std::getenv(kCoreTypeVar) == nullptr && argv != nullptr) {
        spdlog::warn("BLAS self check failed (relative error {:.3g}); restarting with {}={}", err,
                     kCoreTypeVar, kFallbackCore);
        ::setenv(kCoreTypeVar, kFallbackCore, 1);
        ::execv("/proc/self/exe", argv);
        spdlog::warn("re-exec failed; continuing with the faulty BLAS is not possible");
    }
    throw NumericalError("BLAS self check failed (relative error " + std::to_string(err) +
                         "); set " + kCoreTypeVar + " to a working kernel family");
}

}  // namespace plumeinv
