#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "plumeinv/errors.hpp"
#include "plumeinv/plume.hpp"
#include "plumeinv/special_functions.hpp"

using namespace plumeinv;

namespace {

ParticleProperties inert() { return {1000.0, 0.0, 0.0, 0.0}; }

ParticleProperties lead_oxide() { return {9530.0, 5e-6, 0.005, 0.0026}; }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("settling velocity examples") {
    CHECK(settling_velocity(9530.0, 5e-6) == doctest::Approx(7.206e-3).epsilon(1e-3));
    CHECK(settling_velocity(9530.0, 5e-6) == doctest::Approx(9530.0 * 9.8 * 25e-12 / (18 * 1.8e-5)).epsilon(1e-15));
    CHECK(settling_velocity(2500.0, 0.0) == 0.0);
    CHECK(settling_velocity(1000.0, 1e-5) == doctest::Approx(3.0247e-3).epsilon(1e-4));
    CHECK_THROWS_AS(settling_velocity(-1.0, 1e-6), ValidationError);
    CHECK_THROWS_AS(settling_velocity(1000.0, -1e-6), ValidationError);
    CHECK_THROWS_AS(settling_velocity(std::nan(""), 1e-6), ValidationError);
}

TEST_CASE("particle properties validation") {
    CHECK_NOTHROW(lead_oxide().validate());
    CHECK_THROWS_AS((ParticleProperties{0.0, 1e-6, 0.0, 0.0}.validate()), ValidationError);
    CHECK_THROWS_AS((ParticleProperties{1.0, 1e-6, -1.0, 0.0}.validate()), ValidationError);
    CHECK_THROWS_AS((ParticleProperties{1.0, 1e-6, 0.0, -1.0}.validate()), ValidationError);
}

TEST_CASE("Briggs table snapshot") {
    // Pasquill classes A-F: crosswind (a, b, c), vertical (a, b, c).
    const double expected[6][6] = {
        {0.22, 1.0e-4, 0.50, 0.20, 0.0, 0.0},     {1.60, 1.0e-4, 0.50, 1.2, 0.0, 0.0},
        {0.11, 1.0e-4, 0.50, 0.08, 2.0e-4, 0.5},  {0.08, 1.0e-4, 0.50, 0.06, 1.5e-3, 0.5},
        {0.06, 1.0e-4, 0.50, 0.03, 3.0e-4, 1.0},  {0.04, 1.0e-4, 0.50, 0.016, 3.0e-4, 1.0},
    };
    const auto& table = briggs_table();
    for (int k = 0; k < 6; ++k) {
        CAPTURE(k);
        CHECK(static_cast<int>(table[k].cls) == k);
        CHECK(table[k].crosswind.a == expected[k][0]);
        CHECK(table[k].crosswind.b == expected[k][1]);
        CHECK(table[k].crosswind.c == expected[k][2]);
        CHECK(table[k].vertical.a == expected[k][3]);
        CHECK(table[k].vertical.b == expected[k][4]);
        CHECK(table[k].vertical.c == expected[k][5]);
        CHECK(table[k].crosswind.a > 0.0);
        CHECK(table[k].vertical.a > 0.0);
    }
}

TEST_CASE("briggs_sigma examples") {
    CHECK(std::abs(briggs_sigma(StabilityClass::A, Axis::vertical, 50.0) - 10.0) <= 1e-12 * 10.0);
    CHECK(std::abs(briggs_sigma(StabilityClass::C, Axis::vertical, 100.0) - 8.0 / std::sqrt(1.02)) <= 1e-12 * 8.0);
    CHECK(briggs_sigma(StabilityClass::C, Axis::vertical, 100.0) == doctest::Approx(7.9212).epsilon(1e-5));
    for (int k = 0; k < 6; ++k)
        for (auto axis : {Axis::crosswind, Axis::vertical})
            CHECK(briggs_sigma(static_cast<StabilityClass>(k), axis, 0.0) == 0.0);
    CHECK_THROWS_AS(briggs_sigma(StabilityClass::D, Axis::crosswind, -1.0), DomainError);
}

TEST_CASE("stability class parsing") {
    CHECK(parse_stability_class("D") == StabilityClass::D);
    CHECK(parse_stability_class("a") == StabilityClass::A);
    CHECK(to_char(StabilityClass::F) == 'F');
    CHECK_THROWS_AS(parse_stability_class("G"), ValidationError);
    CHECK_THROWS_AS(parse_stability_class("AB"), ValidationError);
}

TEST_CASE("eddy diffusivity examples") {
    CHECK(eddy_diffusivity_z(StabilityClass::A, 100.0, 5.0) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(eddy_diffusivity_z(StabilityClass::A, 1.0, 2.0) == doctest::Approx(0.04).epsilon(1e-14));
    CHECK(eddy_diffusivity_z(StabilityClass::F, 1e-9, 3.0) < 1e-9);
    CHECK_THROWS_AS(eddy_diffusivity_z(StabilityClass::F, 0.0, 3.0), DomainError);
    CHECK_THROWS_AS(eddy_diffusivity_z(StabilityClass::F, 10.0, 0.0), DomainError);
}

TEST_CASE("rotate_to_wind examples") {
    const SourceSite origin{"s", 0.0, 0.0, 0.0};
    auto lc = rotate_to_wind({1, 0, 0}, origin, 3.0, 0.0);
    CHECK(lc.x == doctest::Approx(1.0));
    CHECK(std::abs(lc.y) < 1e-15);
    CHECK(lc.speed == 3.0);
    lc = rotate_to_wind({0, 1, 0}, origin, 0.0, 2.0);
    CHECK(lc.x == doctest::Approx(1.0));
    CHECK(std::abs(lc.y) < 1e-15);
    CHECK(lc.speed == 2.0);
    // Crosswind offset to the left of the wind is positive.
    lc = rotate_to_wind({0, 1, 0}, origin, 1.0, 0.0);
    CHECK(lc.y == doctest::Approx(1.0));
    // Height is measured from the source.
    lc = rotate_to_wind({5, 5, 2}, {"h", 5, 5, 12}, 1.0, 1.0);
    CHECK(lc.z == -10.0);
    CHECK(lc.x == 0.0);
    CHECK_THROWS_AS(rotate_to_wind({1, 0, 0}, origin, 0.0, 0.0), CalmWindError);
}

TEST_CASE("rotation maps the wind to (U, 0) and preserves distances") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double ux = u(rng), uy = u(rng);
        const SourceSite site{"s", u(rng) * 100, u(rng) * 100, 0.0};
        const double speed = std::hypot(ux, uy);
        // The wind vector seen from the source.
        const auto w = rotate_to_wind({site.x + ux, site.y + uy, 0.0}, site, ux, uy);
        CHECK(std::abs(w.x - speed) <= 1e-12 * speed);
        CHECK(std::abs(w.y) <= 1e-12 * speed);
        const Point3 p{u(rng) * 300, u(rng) * 300, 0.0};
        const auto lc = rotate_to_wind(p, site, ux, uy);
        const double d = std::hypot(p.x - site.x, p.y - site.y);
        CHECK(std::abs(std::hypot(lc.x, lc.y) - d) <= 1e-12 * std::max(1.0, d));
    }
}

TEST_CASE("plume kernel is zero upwind and at the cutoff") {
    const auto p = lead_oxide();
    CHECK(plume_kernel({-5.0, 0.0, 0.0, 3.0}, p, StabilityClass::D, 10.0) == 0.0);
    CHECK(plume_kernel({0.0, 0.0, 0.0, 3.0}, p, StabilityClass::D, 10.0) == 0.0);
    CHECK(plume_kernel({1.0, 0.0, 0.0, 3.0}, p, StabilityClass::D, 10.0) == 0.0);
    CHECK(plume_kernel({1.5, 0.0, 0.0, 3.0}, p, StabilityClass::D, 10.0, {2.0, 0.1}) == 0.0);
    CHECK(plume_kernel({50.0, 0.0, -10.0, 3.0}, p, StabilityClass::D, 10.0) > 0.0);
}

TEST_CASE("ground-level centreline value without deposition") {
    for (int k = 0; k < 6; ++k) {
        const auto cls = static_cast<StabilityClass>(k);
        for (double x : {5.0, 50.0, 500.0, 5000.0}) {
            const double u = 2.5;
            const double sy = briggs_sigma(cls, Axis::crosswind, x);
            const double sz = briggs_sigma(cls, Axis::vertical, x);
            const double v = plume_kernel({x, 0.0, 0.0, u}, inert(), cls, 0.0);
            CHECK(rel(v, 1.0 / (std::numbers::pi * u * sy * sz)) <= 1e-14);
        }
    }
}

TEST_CASE("reduction to the reflecting plume") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ux(2.0, 3000.0), uy(-200.0, 200.0), uz(0.0, 60.0), us(0.5, 12.0),
        uh(0.0, 40.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto cls = static_cast<StabilityClass>(trial % 6);
        const double x = ux(rng), y = uy(rng), u = us(rng), h = uh(rng);
        const double z_ground = uz(rng);
        const double z_rel = z_ground - h;
        const double v = plume_kernel({x, y, z_rel, u}, inert(), cls, h);
        const double ref = oracle::reflecting_plume(x, y, z_rel, u, h, cls);
        if (ref < 1e-280) continue;
        CAPTURE(x);
        CAPTURE(h);
        CHECK(rel(v, ref) <= 1e-12);
    }
}

TEST_CASE("mass conservation without deposition") {
    for (double x : {10.0, 100.0, 1000.0}) {
        for (int k = 0; k < 6; ++k) {
            const auto cls = static_cast<StabilityClass>(k);
            for (double h : {0.0, 15.0}) {
                CAPTURE(x);
                CAPTURE(k);
                CAPTURE(h);
                const double mass = oracle::plume_mass(x, 3.0, h, cls, inert());
                CHECK(std::abs(mass - 1.0) <= 1e-6);
            }
        }
    }
}

TEST_CASE("deposition removes mass and settling lowers the plume") {
    const double x = 500.0, u = 3.0, h = 10.0;
    const double with_dep = oracle::plume_mass(x, u, h, StabilityClass::D, {9530.0, 5e-6, 0.005, 0.0});
    CHECK(with_dep < 1.0);
    CHECK(with_dep > 0.5);
    // Far above the plume, settling moves mass down.
    const double aloft = 40.0;
    const double no_settle = plume_kernel({x, 0.0, aloft, u}, inert(), StabilityClass::D, h);
    const double settle = plume_kernel({x, 0.0, aloft, u}, {9530.0, 5e-6, 0.0026 * 2, 0.0026}, StabilityClass::D, h);
    CHECK(settle < no_settle);
}

TEST_CASE("deposition term stays finite where exp times erfc would overflow") {
    // W_o sigma_z / K_z is large for tiny x and stable classes.
    const ParticleProperties heavy{9530.0, 5e-5, 5.0, 0.1};
    for (double x : {1.01, 2.0, 10.0, 100.0, 1e4})
        for (double z : {-5.0, 0.0, 5.0, 50.0}) {
            const double v = plume_kernel({x, 0.0, z, 0.5}, heavy, StabilityClass::F, 5.0);
            CHECK(std::isfinite(v));
        }
}

TEST_CASE("erfcx matches exp(x^2) erfc(x) where the latter is representable") {
    for (double x = -5.0; x <= 25.0; x += 0.173) {
        const double ref = std::exp(x * x) * std::erfc(x);
        CHECK(rel(erfcx(x), ref) <= 1e-13);
    }
    CHECK(rel(erfcx(1e4), 1.0 / (1e4 * std::sqrt(std::numbers::pi))) <= 1e-8);
    CHECK(erfcx(0.0) == 1.0);
}

TEST_CASE("concentration_at superposition") {
    const std::vector<SourceSite> one{{"a", 0, 0, 10}};
    const std::vector<SourceSite> two{{"a", 0, 0, 10}, {"b", 0, 0, 10}};
    const Point3 p{300, 20, 1.5};
    const auto part = lead_oxide();
    const std::vector<double> zero{0.0, 0.0};
    CHECK(concentration_at(p, two, zero, 3, 1, part, StabilityClass::C) == 0.0);
    const double q = 2.5e-3;
    const std::vector<double> full{q};
    const std::vector<double> halves{q / 2, q / 2};
    const double c1 = concentration_at(p, one, full, 3, 1, part, StabilityClass::C);
    const double k = plume_kernel(rotate_to_wind(p, one[0], 3, 1), part, StabilityClass::C, 10);
    CHECK(c1 == q * k);
    CHECK(rel(concentration_at(p, two, halves, 3, 1, part, StabilityClass::C), c1) <= 1e-15);
    // Calm wind contributes nothing.
    CHECK(concentration_at(p, one, full, 0.01, 0.0, part, StabilityClass::C) == 0.0);
    const std::vector<double> bad{std::nan("")};
    CHECK_THROWS_AS(concentration_at(p, one, bad, 3, 1, part, StabilityClass::C), ValidationError);
}

TEST_CASE("concentration_at is linear in the rates") {
    const std::vector<SourceSite> sites{{"a", 0, 0, 10}, {"b", 100, -50, 5}, {"c", -80, 40, 2}};
    const Point3 p{400, -60, 1.5};
    const auto part = lead_oxide();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1e-3);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)}, s(3);
        const double alpha = u(rng) * 1e3;
        for (int i = 0; i < 3; ++i) s[i] = alpha * a[i] + b[i];
        const double ca = concentration_at(p, sites, a, 4, -1, part, StabilityClass::B);
        const double cb = concentration_at(p, sites, b, 4, -1, part, StabilityClass::B);
        const double cs = concentration_at(p, sites, s, 4, -1, part, StabilityClass::B);
        CHECK(rel(cs, alpha * ca + cb) <= 1e-13);
    }
}
