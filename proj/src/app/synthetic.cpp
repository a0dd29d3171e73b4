#include "plumeinv/app/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "plumeinv/app/io.hpp"
#include "plumeinv/errors.hpp"
#include "plumeinv/forward_model.hpp"
#include "plumeinv/random.hpp"

namespace plumeinv::app {

namespace {
constexpr std::uint32_t kWindNoiseStream = 0x5701;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

std::vector<RawWindRecord> synthesize_wind(const RunConfig& cfg) {
    if (!cfg.synthetic) throw ValidationError("synthetic wind requested without a synthetic section");
    const auto& w = cfg.synthetic->wind;
    if (!(w.interval > 0.0)) throw ValidationError("synthetic wind interval must be > 0");
    const CounterRng rng(cfg.seed, kWindNoiseStream);
    const auto count = static_cast<long>(std::floor(cfg.duration / w.interval + 1e-9)) + 1;
    std::vector<RawWindRecord> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) {
        const double t = k * w.interval;
        const double dir = w.direction_from + w.direction_amplitude * std::sin(kTwoPi * t / w.direction_period) +
                           w.diurnal_amplitude * std::sin(kTwoPi * t / 86400.0 + 1.0);
        const double speed = w.speed_mean + w.speed_amplitude * std::sin(kTwoPi * t / w.speed_period + 0.5);
        double xi[2];
        rng.normals(static_cast<std::uint64_t>(k), xi);
        RawWindRecord r;
        r.timestamp = cfg.start + t;
        r.speed = std::max(0.0, speed + w.speed_noise * xi[0]);
        r.direction_from = std::fmod(std::fmod(dir + w.direction_noise * xi[1], 360.0) + 360.0, 360.0);
        if (r.direction_from >= 360.0) r.direction_from = 0.0;
        out.push_back(r);
    }
    return out;
}

Eigen::VectorXd true_rates(const SyntheticSpec& spec, const TimeGrid& grid) {
    const auto n_s = static_cast<Eigen::Index>(spec.sources.size());
    Eigen::VectorXd q(n_s * grid.count);
    for (Eigen::Index i = 0; i < n_s; ++i)
        for (int j = 0; j < grid.count; ++j) {
            const double r = spec.sources[i].rate(j * grid.dt);
            q[i * grid.count + j] = spec.clip ? std::max(0.0, r) : r;
        }
    return q;
}

SyntheticDataset generate_synthetic(const RunConfig& cfg) {
    if (!cfg.synthetic) throw ValidationError("config has no synthetic section");
    SyntheticDataset ds;
    ds.wind = synthesize_wind(cfg);
    ds.sensors = load_sensors(cfg.synthetic->sensors);
    ds.grid = cfg.generation_grid();
    ds.generation_wind = regularize_wind(ds.wind, ds.grid, cfg.wind_fit, cfg.seed, &ds.wind_fit);
    const ForwardModel model(cfg.sources, ds.generation_wind, cfg.particle, cfg.stability, cfg.kernel);
    const auto F = assemble_F(ds.sensors, model);
    ds.truth = true_rates(*cfg.synthetic, ds.grid);
    NoiseOptions noise;
    noise.noise_floor = cfg.noise_floor;
    ds.measurements = simulate_measurements(F, ds.sensors, ds.truth, cfg.seed, noise);
    spdlog::info("synthetic: {} measurements from {} sensors on a {} s grid", ds.measurements.size(),
                 ds.sensors.size(), ds.grid.dt);
    return ds;
}

}  // namespace plumeinv::app
