#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "plumeinv/errors.hpp"
#include "plumeinv/observation.hpp"
#include "plumeinv/uqprop.hpp"

using namespace plumeinv;

namespace {

const ParticleProperties kLead{9530.0, 5e-6, 0.005, 0.0026};

ForwardModel small_model(int steps = 6) {
    const TimeGrid g{0.0, 3600.0, steps};
    WindSeries w{g, {}, {}};
    for (int j = 0; j < steps; ++j) {
        w.ux.push_back(3.0 + 0.5 * std::sin(j));
        w.uy.push_back(1.0 * std::cos(0.7 * j));
    }
    return ForwardModel({{"a", 0.0, 0.0, 5.0}, {"b", 80.0, -40.0, 2.0}}, w, kLead, StabilityClass::D);
}

Eigen::MatrixXd random_cov(int n, int rank, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, rank);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    return a * a.transpose() / rank;
}

}  // namespace

TEST_CASE("grid geometry") {
    const GridSpec g{-10.0, 10.0, 0.0, 4.0, 3, 2};
    CHECK(g.cells() == 6);
    CHECK(g.x(0) == -10.0);
    CHECK(g.x(2) == 10.0);
    CHECK(g.y(1) == 4.0);
    CHECK(g.cell_area() == doctest::Approx(10.0 * 4.0));
    const auto p = g.points();
    CHECK(p[1].x == 0.0);
    CHECK(p[1].y == 0.0);
    CHECK(p[3].y == 4.0);
    CHECK(p[3].z == 0.0);
    CHECK_THROWS_AS((GridSpec{0.0, 0.0, 0.0, 1.0, 2, 2}.validate()), ValidationError);
    CHECK_THROWS_AS((GridSpec{0.0, 1.0, 0.0, 1.0, 1, 2}.validate()), ValidationError);
}

TEST_CASE("H rows equal unit-area dust-fall jars at the cell") {
    const auto model = small_model();
    const GridSpec g{50.0, 400.0, -150.0, 150.0, 4, 3};
    const Eigen::MatrixXd H = assemble_H(g, model);
    std::vector<SensorSpec> jars;
    for (const auto& p : g.points()) jars.push_back({"c", p, DustfallJar{1.0}, 10.0, ""});
    const auto F = assemble_F(jars, model);
    CHECK((H - F.matrix).norm() <= 1e-12 * F.matrix.norm());
    CHECK(H == assemble_H(g, model, Execution::serial));
    CHECK((H * Eigen::VectorXd::Zero(model.unknowns())).isZero());
    CHECK((H.array() >= 0.0).all());
}

TEST_CASE("deposition cannot exceed emission") {
    const auto model = small_model(4);
    // Domain large enough to catch essentially all of the deposited mass.
    const GridSpec g{-200.0, 6000.0, -2500.0, 2500.0, 311, 251};
    const Eigen::VectorXd q = Eigen::VectorXd::Constant(model.unknowns(), 1e-3);
    const auto stats = deposition_stats(g, assemble_H(g, model), q, LowRankFactors{});
    const double deposited = stats.mean.sum() * g.cell_area();
    const double emitted = q.sum() * model.grid().dt;
    CHECK(deposited <= emitted);
    CHECK(deposited > 0.0);
    CHECK((stats.mean.array() >= 0.0).all());
}

TEST_CASE("full-rank truncation reconstructs the covariance") {
    const Eigen::MatrixXd C = random_cov(30, 40, 1);
    const auto f = lowrank_truncate(C, 30);
    CHECK((C - f.reconstruct()).norm() / C.norm() < 1e-8);
    for (int k = 1; k < f.rank(); ++k) CHECK(f.values[k] <= f.values[k - 1]);
    CHECK((f.values.array() >= 0.0).all());
}

TEST_CASE("truncation is the best low-rank approximation") {
    const Eigen::MatrixXd C = random_cov(25, 25, 2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    const Eigen::VectorXd ev = es.eigenvalues().reverse();
    double prev = std::numeric_limits<double>::infinity();
    for (int n_e = 1; n_e <= 25; ++n_e) {
        const double err = (C - lowrank_truncate(C, n_e).reconstruct()).norm();
        const double tail = std::sqrt(ev.tail(25 - n_e).squaredNorm());
        CHECK(err == doctest::Approx(tail).epsilon(1e-8).scale(C.norm()));
        CHECK(err <= prev + 1e-12);
        prev = err;
    }
}

TEST_CASE("truncation input checks and clamping") {
    Eigen::MatrixXd C = random_cov(6, 3, 3);  // rank 3: tail eigenvalues near zero
    const auto f = lowrank_truncate(C, 6);
    CHECK((f.values.array() >= 0.0).all());
    C(0, 1) += 1.0;
    CHECK_THROWS_AS(lowrank_truncate(C, 2), ValidationError);
    CHECK_THROWS_AS(lowrank_truncate(random_cov(6, 3, 3), 0), ValidationError);
    CHECK_THROWS_AS(lowrank_truncate(random_cov(6, 3, 3), 7), ValidationError);
}

TEST_CASE("deposition std matches the dense propagated covariance") {
    const auto model = small_model();
    const GridSpec g{-100.0, 500.0, -300.0, 300.0, 20, 20};
    const Eigen::MatrixXd H = assemble_H(g, model);
    const int n = model.unknowns();
    const Eigen::MatrixXd C = random_cov(n, n, 4) * 1e-8;
    const Eigen::VectorXd q = Eigen::VectorXd::Constant(n, 2e-4);
    const auto f = lowrank_truncate(C, n);
    const auto stats = deposition_stats(g, H, q, f);
    const Eigen::VectorXd dense = (H * C * H.transpose()).diagonal().cwiseSqrt();
    CHECK((stats.std - dense).norm() <= 1e-8 * dense.norm());
    CHECK((stats.mean - H * q).norm() <= 1e-14 * stats.mean.norm());

    const auto doubled = deposition_stats(g, H, 2.0 * q, f);
    CHECK((doubled.mean - 2.0 * stats.mean).norm() <= 1e-14 * stats.mean.norm());
    CHECK(doubled.std == stats.std);

    LowRankFactors flipped = f;
    flipped.vectors.col(0) *= -1.0;
    flipped.vectors.col(3) *= -1.0;
    CHECK((deposition_stats(g, H, q, flipped).std - stats.std).norm() <= 1e-14 * stats.std.norm());

    LowRankFactors zero = f;
    zero.values.setZero();
    CHECK(deposition_stats(g, H, q, zero).std.isZero());

    const auto streamed = propagate_streaming(g, model, q, f, 7);
    CHECK((streamed.mean - stats.mean).norm() <= 1e-12 * stats.mean.norm());
    CHECK((streamed.std - stats.std).norm() <= 1e-12 * stats.std.norm());
}

TEST_CASE("annualize") {
    CHECK(annualize(Eigen::VectorXd::Ones(5), 5) == doctest::Approx(31536.0));
    CHECK(annualize(Eigen::VectorXd::Zero(10), 5) == 0.0);
    // Two sources: mean rates 1 and 3 kg/s.
    Eigen::VectorXd q(4);
    q << 0.5, 1.5, 3.0, 3.0;
    CHECK(annualize(q, 2) == doctest::Approx(4.0 * 31536.0));
    CHECK_THROWS_AS(annualize(Eigen::VectorXd::Ones(5), 2), ValidationError);
}
