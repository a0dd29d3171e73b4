#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "plumeinv/forward_model.hpp"

namespace plumeinv {

// Passive collector: one accumulated deposition value (kg) per study period.
struct DustfallJar {
    double area = 0.0;  // m^2
};

// Scheduled sampler: average concentration (kg m^-3) over (tau_l, tau_l + window].
struct RealTimeSampler {
    std::vector<double> start_times;  // epoch seconds, strictly increasing
    double window = 0.0;              // s
};

struct SensorSpec {
    std::string id;
    Point3 location;
    std::variant<DustfallJar, RealTimeSampler> kind;
    double snr = 1.0;
    // Sensors sharing a noise group share one signal-variance estimate.
    // Empty means "dustfall" for jars and the sensor id for samplers.
    std::string group;

    bool is_jar() const { return std::holds_alternative<DustfallJar>(kind); }
    int measurement_count() const;
    std::string noise_group() const;
    const char* units() const { return is_jar() ? "kg" : "kg/m3"; }
    void validate() const;
};

// Window function f_{l,k}(t): A*W_dep on (t0, t0+T] for jars, 1/window on
// (tau_l, tau_l + window] for samplers. Index l is 0-based.
double window_weight(const SensorSpec& sensor, int index, double t, const TimeGrid& grid,
                     double w_dep);

// Quadrature matrix M_k (m_k x N_T). Entry (l, j) is dt times the value the
// window function takes on the interval [t_j, t_j + dt) (its right limit at
// t_j), i.e. a one-sided rectangle rule on the left endpoints.
Eigen::MatrixXd assemble_M(const SensorSpec& sensor, const TimeGrid& grid, double w_dep);

// Compact form of the block-diagonal G_k: row j holds (G_1(x_k; t_j), ..., G_Ns(x_k; t_j)).
struct SensorKernels {
    Eigen::MatrixXd g;  // N_T x N_s

    // Dense G_k of shape N_T x N with source-major columns.
    Eigen::MatrixXd dense() const;
};

std::vector<SensorKernels> assemble_G(std::span<const SensorSpec> sensors, const ForwardModel& model);

// Stacked F = M G. Rows follow sensor declaration order and, within a
// sensor, measurement order; columns are source-major.
struct ObservationMap {
    struct Row {
        int sensor = 0;
        int index = 0;
    };
    Eigen::MatrixXd matrix;
    std::vector<Row> rows;

    Eigen::Index size() const { return matrix.rows(); }
};

enum class Execution { serial, parallel };

ObservationMap assemble_F(std::span<const SensorSpec> sensors, const ForwardModel& model,
                          Execution exec = Execution::parallel);

struct Measurement {
    std::string sensor_id;
    int index = 0;
    double value = 0.0;
    std::string units;
};

struct MeasurementSet {
    std::vector<Measurement> entries;
    Eigen::VectorXd values;    // stacked d
    Eigen::VectorXd variance;  // diagonal of Sigma

    Eigen::Index size() const { return values.size(); }
    void validate() const;
};

struct NoiseOptions {
    double noise_floor = 1e-12;  // std used when a group's clean signal has zero variance
};

// d = F q + eps with eps_r ~ N(0, var_group(r) / snr_r), where var_group is the
// population variance of the clean entries in the row's noise group.
MeasurementSet simulate_measurements(const ObservationMap& F, std::span<const SensorSpec> sensors,
                                     const Eigen::VectorXd& q, std::uint64_t seed,
                                     const NoiseOptions& opts = {});

// Per-row noise variance var_group / snr from a vector of (clean or measured) values.
Eigen::VectorXd noise_variance_from_signal(const ObservationMap& F,
                                           std::span<const SensorSpec> sensors,
                                           const Eigen::VectorXd& signal, double noise_floor);

}  // namespace plumeinv
