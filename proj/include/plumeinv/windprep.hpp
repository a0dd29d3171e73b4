#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "plumeinv/time_grid.hpp"

namespace plumeinv {

struct RawWindRecord {
    double timestamp = 0.0;       // epoch seconds
    double speed = 0.0;           // m s^-1
    double direction_from = 0.0;  // degrees clockwise from north, [0, 360)

    void validate() const;
};

struct WindComponents {
    double ux = 0.0;
    double uy = 0.0;
};

// Meteorological convention: the wind blows *from* direction_from.
WindComponents to_components(const RawWindRecord& r);

// Squared-exponential GP hyperparameters, in the units of the fitted values
// (variances) and seconds (length scale).
struct GPConfig {
    double signal_var = 1.0;
    double length_scale = 3600.0;
    double noise_var = 0.01;

    void validate() const;
};

// Cross-validation grid. Variances are multiples of the second moment of the
// data about zero, which is the natural scale for a zero-mean prior.
struct GPSearchSpace {
    std::vector<double> signal_var_factors{0.25, 1.0, 4.0};
    std::vector<double> length_scales{1800.0, 3600.0, 7200.0, 14400.0, 28800.0};
    std::vector<double> noise_var_factors{0.01, 0.1, 0.5};
    int folds = 10;
    // Cross-validation runs on an evenly strided subset of at most this many
    // points; the final fit always uses every record.
    int cv_max_points = 800;

    void validate() const;
};

std::vector<GPConfig> candidate_grid(std::span<const double> values, const GPSearchSpace& space);

// Zero-mean GP regression mean at `query`. Adds jitter and logs if the kernel
// matrix fails to factor.
Eigen::VectorXd gp_posterior_mean(std::span<const double> times, std::span<const double> values,
                                  const GPConfig& cfg, std::span<const double> query);

struct CrossValidation {
    GPConfig best;
    double best_score = 0.0;
    std::vector<double> scores;  // mean held-out squared error per candidate
    int folds = 0;
};

// k-fold cross-validation with contiguous folds over a seeded permutation.
// Falls back to leave-one-out below `folds` points. Ties go to the smaller
// length scale.
CrossValidation cross_validate(std::span<const double> times, std::span<const double> values,
                               std::span<const GPConfig> candidates, std::uint64_t seed,
                               int folds = 10, int max_points = 0);

struct WindFitReport {
    CrossValidation ux;
    CrossValidation uy;
    bool extrapolated = false;
};

// Cross-validates the GP hyperparameters per component and evaluates the GP
// mean on the grid. With `reuse`, its selected hyperparameters are taken as
// given and no cross-validation is run.
WindSeries regularize_wind(std::vector<RawWindRecord> records, const TimeGrid& grid,
                           const GPSearchSpace& space, std::uint64_t seed,
                           WindFitReport* report = nullptr, const WindFitReport* reuse = nullptr);

}  // namespace plumeinv
