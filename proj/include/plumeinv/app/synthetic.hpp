#pragma once

#include <vector>

#include <Eigen/Core>

#include "plumeinv/app/config.hpp"
#include "plumeinv/observation.hpp"
#include "plumeinv/windprep.hpp"

namespace plumeinv::app {

// Noisy 10-minute style wind records around the hidden smooth wind.
std::vector<RawWindRecord> synthesize_wind(const RunConfig& cfg);

// Source-major true rates on `grid`.
Eigen::VectorXd true_rates(const SyntheticSpec& spec, const TimeGrid& grid);

struct SyntheticDataset {
    std::vector<RawWindRecord> wind;
    std::vector<SensorSpec> sensors;
    TimeGrid grid;  // generation grid
    WindSeries generation_wind;
    WindFitReport wind_fit;  // hyperparameters selected for the generation wind
    Eigen::VectorXd truth;
    MeasurementSet measurements;
};

// Regularizes the synthetic wind on the generation grid, runs the forward
// model there and adds noise at each sensor's SNR.
SyntheticDataset generate_synthetic(const RunConfig& cfg);

}  // namespace plumeinv::app
