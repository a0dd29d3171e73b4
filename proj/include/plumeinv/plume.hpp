#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

namespace plumeinv {

inline constexpr double kAirViscosity = 1.8e-5;  // kg m^-1 s^-1
inline constexpr double kGravity = 9.8;          // m s^-2

struct ParticleProperties {
    double density = 0.0;   // kg m^-3
    double diameter = 0.0;  // m
    double w_dep = 0.0;     // deposition velocity, m s^-1
    double w_set = 0.0;     // settling velocity, m s^-1

    // Throws ValidationError when an invariant is violated.
    void validate() const;
};

// Stokes settling velocity rho g d^2 / (18 mu) for a spherical particle.
double settling_velocity(double density, double diameter);

enum class StabilityClass { A, B, C, D, E, F };
enum class Axis { crosswind, vertical };

struct BriggsCoefficients {
    double a;
    double b;  // m^-1
    double c;
};

struct BriggsRow {
    StabilityClass cls;
    BriggsCoefficients crosswind;
    BriggsCoefficients vertical;
};

// Pasquill classes A..F, in order.
const std::array<BriggsRow, 6>& briggs_table();
BriggsCoefficients briggs_coefficients(StabilityClass cls, Axis axis);

StabilityClass parse_stability_class(std::string_view text);
char to_char(StabilityClass cls);

// sigma(x) = a x (1 + b x)^(-c). Throws DomainError for x < 0.
double briggs_sigma(StabilityClass cls, Axis axis, double downwind);

// Constant-K inversion of sigma_z^2 = (2/U) int_0^x K ds, i.e. U sigma_z^2 / (2x).
// Throws DomainError unless downwind > 0 and speed > 0.
double eddy_diffusivity_z(StabilityClass cls, double downwind, double speed);

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct SourceSite {
    std::string id;
    double x = 0.0;
    double y = 0.0;
    double height = 0.0;
};

// Plume-aligned frame: x along the wind, origin below the source, z relative
// to the source height.
struct LocalCoords {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double speed = 0.0;
};

// Throws CalmWindError for a zero horizontal wind vector.
LocalCoords rotate_to_wind(const Point3& point, const SourceSite& source, double ux, double uy);

struct KernelOptions {
    double min_downwind = 1.0;  // kernel is exactly zero for x <= this (m)
    double calm_wind = 0.1;     // steps with |u| below this contribute nothing (m s^-1)
};

// Ground-deposition Gaussian plume (Ermak) concentration per unit emission rate,
// in s m^-3. Zero for x <= opts.min_downwind. Requires lc.speed > 0.
double plume_kernel(const LocalCoords& lc, const ParticleProperties& particle,
                    StabilityClass cls, double source_height, const KernelOptions& opts = {});

// Superposition over sources for a single wind state. Rates in kg s^-1, result in kg m^-3.
// A calm wind contributes zero.
double concentration_at(const Point3& point, std::span<const SourceSite> sites,
                        std::span<const double> rates, double ux, double uy,
                        const ParticleProperties& particle, StabilityClass cls,
                        const KernelOptions& opts = {});

}  // namespace plumeinv
