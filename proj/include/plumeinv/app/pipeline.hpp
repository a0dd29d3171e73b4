#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "plumeinv/app/config.hpp"
#include "plumeinv/forward_model.hpp"
#include "plumeinv/inversion.hpp"
#include "plumeinv/observation.hpp"
#include "plumeinv/prior.hpp"

namespace plumeinv::app {

// Everything the inversion stages share: forward model on the inversion
// grid, the observation map and the noise model.
struct Problem {
    std::vector<SensorSpec> sensors;
    MeasurementSet measurements;
    std::optional<ForwardModel> model;
    ObservationMap F;
    Eigen::VectorXd variance;  // diagonal of Sigma actually used

    const TimeGrid& grid() const { return model->grid(); }
};

// Drops excluded sensors, assembles F and builds Sigma. `known_variance`
// (synthetic mode) is the clean-signal noise variance; otherwise the measured
// values' variance per noise group is used. The result is scaled by noise_scale^2.
Problem build_problem(const RunConfig& cfg, const WindSeries& wind, std::vector<SensorSpec> sensors,
                      MeasurementSet measurements, std::optional<Eigen::VectorXd> known_variance);

SmoothnessPrior make_prior(const RunConfig& cfg, const Problem& problem);

ConstantEstimate stage_constant(const Problem& p);
GaussianPosterior stage_smooth(const Problem& p, const SmoothnessPrior& prior, const Eigen::VectorXd& q_c,
                               bool with_covariance = false);
PositivePosterior stage_positive(const Problem& p, const SmoothnessPrior& prior, const Eigen::VectorXd& q_s,
                                 const SamplerConfig& sampler, const PositiveOptions& opts = {});

enum class Stage { constant, smooth, positive };

struct CommandOptions {
    bool dump_chain = false;
};

// CLI commands. Each writes its artifacts to cfg.out_dir and chains any
// missing upstream stage.
void cmd_synth(const RunConfig& cfg);
void cmd_wind_fit(const RunConfig& cfg);
void cmd_invert(const RunConfig& cfg, Stage stage, const CommandOptions& opts = {});
void cmd_propagate(const RunConfig& cfg, const CommandOptions& opts = {});

}  // namespace plumeinv::app
