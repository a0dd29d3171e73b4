#include "plumeinv/plume.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <spdlog/spdlog.h>

#include "plumeinv/errors.hpp"
#include "plumeinv/special_functions.hpp"

namespace plumeinv {

namespace {

constexpr double kPi = std::numbers::pi;

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

// Briggs rural coefficients as tabulated for the six Pasquill classes.
constexpr std::array<BriggsRow, 6> kBriggs{{
    {StabilityClass::A, {0.22, 1.0e-4, 0.50}, {0.20, 0.0, 0.0}},
    {StabilityClass::B, {1.60, 1.0e-4, 0.50}, {1.2, 0.0, 0.0}},
    {StabilityClass::C, {0.11, 1.0e-4, 0.50}, {0.08, 2.0e-4, 0.5}},
    {StabilityClass::D, {0.08, 1.0e-4, 0.50}, {0.06, 1.5e-3, 0.5}},
    {StabilityClass::E, {0.06, 1.0e-4, 0.50}, {0.03, 3.0e-4, 1.0}},
    {StabilityClass::F, {0.04, 1.0e-4, 0.50}, {0.016, 3.0e-4, 1.0}},
}};

}  // namespace

void ParticleProperties::validate() const {
    if (!(std::isfinite(density) && density > 0.0))
        throw ValidationError("particle density must be positive and finite");
    if (!finite_nonneg(diameter)) throw ValidationError("particle diameter must be >= 0");
    if (!finite_nonneg(w_dep)) throw ValidationError("deposition velocity must be >= 0");
    if (!finite_nonneg(w_set)) throw ValidationError("settling velocity must be >= 0");
}

double settling_velocity(double density, double diameter) {
    if (!(std::isfinite(density) && density > 0.0))
        throw ValidationError("settling_velocity: density must be positive and finite");
    if (!finite_nonneg(diameter))
        throw ValidationError("settling_velocity: diameter must be >= 0 and finite");
    return density * kGravity * diameter * diameter / (18.0 * kAirViscosity);
}

const std::array<BriggsRow, 6>& briggs_table() { return kBriggs; }

BriggsCoefficients briggs_coefficients(StabilityClass cls, Axis axis) {
    const auto& row = kBriggs[static_cast<std::size_t>(cls)];
    return axis == Axis::crosswind ? row.crosswind : row.vertical;
}

StabilityClass parse_stability_class(std::string_view text) {
    if (text.size() == 1) {
        char c = text[0];
        if (c >= 'a' && c <= 'f') c = static_cast<char>(c - 'a' + 'A');
        if (c >= 'A' && c <= 'F') return static_cast<StabilityClass>(c - 'A');
    }
    throw ValidationError("unknown stability class '" + std::string(text) + "' (expected A-F)");
}

char to_char(StabilityClass cls) { return static_cast<char>('A' + static_cast<int>(cls)); }

double briggs_sigma(StabilityClass cls, Axis axis, double downwind) {
    if (!(downwind >= 0.0)) throw DomainError("briggs_sigma: downwind distance must be >= 0");
    const auto k = briggs_coefficients(cls, axis);
    if (k.c == 0.0) return k.a * downwind;
    return k.a * downwind * std::pow(1.0 + k.b * downwind, -k.c);
}

double eddy_diffusivity_z(StabilityClass cls, double downwind, double speed) {
    if (!(downwind > 0.0)) throw DomainError("eddy_diffusivity_z: downwind distance must be > 0");
    if (!(speed > 0.0)) throw DomainError("eddy_diffusivity_z: wind speed must be > 0");
    const double sz = briggs_sigma(cls, Axis::vertical, downwind);
    return speed * sz * sz / (2.0 * downwind);
}

LocalCoords rotate_to_wind(const Point3& point, const SourceSite& source, double ux, double uy) {
    const double speed = std::hypot(ux, uy);
    if (!(speed > 0.0)) throw CalmWindError("rotate_to_wind: zero horizontal wind");
    const double cx = ux / speed;
    const double cy = uy / speed;
    const double dx = point.x - source.x;
    const double dy = point.y - source.y;
    return {cx * dx + cy * dy, -cy * dx + cx * dy, point.z - source.height, speed};
}

double plume_kernel(const LocalCoords& lc, const ParticleProperties& particle,
                    StabilityClass cls, double source_height, const KernelOptions& opts) {
    if (!(lc.x > 0.0) || lc.x <= opts.min_downwind) return 0.0;
    if (!(lc.speed > 0.0)) throw DomainError("plume_kernel: wind speed must be > 0");

    const double u = lc.speed;
    const double sy = briggs_sigma(cls, Axis::crosswind, lc.x);
    const double sz = briggs_sigma(cls, Axis::vertical, lc.x);
    const double kz = u * sz * sz / (2.0 * lc.x);
    const double ws = particle.w_set;
    const double wo = particle.w_dep - 0.5 * ws;

    const double z = lc.z;                     // height above the source
    const double r = lc.z + 2.0 * source_height;  // image distance
    const double e0 = -lc.y * lc.y / (2.0 * sy * sy) - ws * z / (2.0 * kz) -
                      ws * ws * sz * sz / (8.0 * kz * kz);

    const double direct = std::exp(e0 - z * z / (2.0 * sz * sz));
    const double image_exp = e0 - r * r / (2.0 * sz * sz);
    const double image = std::exp(image_exp);

    double deposition = 0.0;
    if (wo != 0.0) {
        // exp(A) erfc(X) = exp(-r^2 / 2 sz^2) erfcx(X), with X^2 = A + r^2 / 2 sz^2.
        const double ratio = wo * sz / kz;
        const double arg = ratio / std::numbers::sqrt2 + r / (std::numbers::sqrt2 * sz);
        double scaled;
        if (arg >= 0.0) {
            scaled = std::exp(image_exp) * erfcx(arg);
        } else {
            const double a = wo * r / kz + wo * wo * sz * sz / (2.0 * kz * kz);
            scaled = 2.0 * std::exp(e0 + a) - std::exp(image_exp) * erfcx(-arg);
        }
        deposition = std::sqrt(2.0 * kPi) * ratio * scaled;
    }

    const double value = (direct + image - deposition) / (2.0 * kPi * u * sy * sz);
    if (!std::isfinite(value))
        throw NumericalError("plume_kernel: non-finite value at x=" + std::to_string(lc.x));
    return value;
}

double concentration_at(const Point3& point, std::span<const SourceSite> sites,
                        std::span<const double> rates, double ux, double uy,
                        const ParticleProperties& particle, StabilityClass cls,
                        const KernelOptions& opts) {
    if (sites.size() != rates.size())
        throw ValidationError("concentration_at: one rate per source is required");
    if (std::hypot(ux, uy) < opts.calm_wind) {
        spdlog::warn("concentration_at: calm wind ({:.3g} m/s), step skipped", std::hypot(ux, uy));
        return 0.0;
    }
    double c = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (!std::isfinite(rates[i])) throw ValidationError("concentration_at: non-finite rate");
        if (rates[i] == 0.0) continue;
        const auto lc = rotate_to_wind(point, sites[i], ux, uy);
        c += rates[i] * plume_kernel(lc, particle, cls, sites[i].height, opts);
    }
    return c;
}

}  // namespace plumeinv
