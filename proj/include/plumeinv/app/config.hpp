#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plumeinv/plume.hpp"
#include "plumeinv/sampling.hpp"
#include "plumeinv/time_grid.hpp"
#include "plumeinv/uqprop.hpp"
#include "plumeinv/windprep.hpp"

namespace plumeinv::app {

// q_i(t) = max(0, offset + amplitude sin(2 pi t / period + phase)), t from the grid start.
struct SyntheticSource {
    std::string id;
    double amplitude = 0.0;  // kg/s
    double period = 86400.0; // s
    double phase = 0.0;      // rad
    double offset = 0.0;     // kg/s

    double rate(double t) const;
    double angular_frequency() const;
};

// Hidden "true" wind: prevailing direction and speed with slow periodic
// swings, observed every `interval` seconds with Gaussian noise.
struct SyntheticWind {
    double interval = 600.0;
    double speed_mean = 4.0;
    double speed_amplitude = 1.5;
    double speed_period = 86400.0;
    double direction_from = 315.0;
    double direction_amplitude = 45.0;
    double direction_period = 4.0 * 86400.0;
    double diurnal_amplitude = 15.0;
    double speed_noise = 0.4;
    double direction_noise = 10.0;
};

struct SyntheticSpec {
    std::vector<SyntheticSource> sources;
    bool clip = true;
    SyntheticWind wind;
    std::filesystem::path sensors;  // sensor layout used to generate data
    bool allow_inverse_crime = false;
};

struct RunConfig {
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    // Empty input paths default to the synthetic outputs in out_dir.
    std::filesystem::path wind_csv;
    std::filesystem::path sensors;
    std::filesystem::path measurements;

    double start = 0.0;     // epoch seconds
    double duration = 0.0;  // s
    double dt_inversion = 3600.0;
    double dt_generation = 1800.0;

    ParticleProperties particle;
    StabilityClass stability = StabilityClass::D;
    KernelOptions kernel;
    std::vector<SourceSite> sources;

    double alpha = 1.0;
    double gamma = 5e-3;
    SamplerConfig sampler;
    bool tune_beta = false;
    TuneOptions tune;

    GPSearchSpace wind_fit;
    double noise_floor = 1e-12;
    double noise_scale = 1.0;  // multiplies the assumed noise std in Sigma

    GridSpec grid;
    int n_e = 100;
    bool display_mg = true;  // deposition output in mg/m^2 (else kg/m^2)

    std::vector<std::string> exclude_sensors;
    std::uint64_t seed = 1;
    std::optional<SyntheticSpec> synthetic;

    TimeGrid inversion_grid() const;
    TimeGrid generation_grid() const;
    std::filesystem::path wind_path() const;
    std::filesystem::path sensors_path() const;
    std::filesystem::path measurements_path() const;

    void validate() const;
};

// Nested key-value (YAML) config. Relative paths resolve against the config
// file's directory.
RunConfig load_config(const std::filesystem::path& path);

// Canonical echo of every setting that influences results.
nlohmann::json to_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// PLUME_SEED and PLUME_THREADS.
void apply_environment(RunConfig& cfg);

}  // namespace plumeinv::app
