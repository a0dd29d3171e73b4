#include "plumeinv/app/config.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>

#include <omp.h>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include "plumeinv/app/hash.hpp"
#include "plumeinv/app/io.hpp"
#include "plumeinv/errors.hpp"

namespace plumeinv::app {

namespace fs = std::filesystem;

namespace {

template <class T>
void read(const YAML::Node& n, const char* key, T& out) {
    if (const auto v = n[key]) out = v.as<T>();
}

void read_list(const YAML::Node& n, const char* key, std::vector<double>& out) {
    if (const auto v = n[key]) out = v.as<std::vector<double>>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::uint64_t parse_seed(const std::string& s, const char* origin) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw ValidationError(std::string(origin) + ": seed must be a non-negative integer");
    return v;
}

}  // namespace

double SyntheticSource::angular_frequency() const { return 2.0 * std::numbers::pi / period; }

double SyntheticSource::rate(double t) const { return offset + amplitude * std::sin(angular_frequency() * t + phase); }

TimeGrid RunConfig::inversion_grid() const {
    return {start, dt_inversion, static_cast<int>(std::llround(duration / dt_inversion))};
}

TimeGrid RunConfig::generation_grid() const {
    return {start, dt_generation, static_cast<int>(std::llround(duration / dt_generation))};
}

fs::path RunConfig::wind_path() const { return wind_csv.empty() ? out_dir / "wind.csv" : wind_csv; }
fs::path RunConfig::sensors_path() const { return sensors.empty() ? out_dir / "sensors.yaml" : sensors; }
fs::path RunConfig::measurements_path() const {
    return measurements.empty() ? out_dir / "measurements.csv" : measurements;
}

void RunConfig::validate() const {
    if (!(duration > 0.0)) throw ValidationError("config: time.duration must be > 0");
    if (!(dt_inversion > 0.0) || !(dt_generation > 0.0)) throw ValidationError("config: time steps must be > 0");
    for (double dt : {dt_inversion, dt_generation})
        if (std::abs(duration / dt - std::round(duration / dt)) > 1e-9)
            throw ValidationError("config: duration must be a whole number of time steps");
    inversion_grid().validate();
    particle.validate();
    if (sources.empty()) throw ValidationError("config: no sources");
    if (!(alpha > 0.0) || !(gamma > 0.0)) throw ValidationError("config: prior alpha and gamma must be > 0");
    sampler.validate();
    wind_fit.validate();
    if (!(noise_floor > 0.0)) throw ValidationError("config: noise.floor must be > 0");
    if (!(noise_scale > 0.0)) throw ValidationError("config: noise.scale must be > 0");
    grid.validate();
    if (n_e < 1) throw ValidationError("config: grid.n_e must be >= 1");
    if (synthetic) {
        if (synthetic->sources.size() != sources.size())
            throw ValidationError("config: synthetic.sources must list one entry per source");
        for (std::size_t i = 0; i < sources.size(); ++i) {
            const auto& s = synthetic->sources[i];
            if (s.id != sources[i].id) throw ValidationError("config: synthetic source order must match sources");
            if (!(s.amplitude >= 0.0)) throw ValidationError("config: synthetic amplitudes must be >= 0");
            if (!(s.period > 0.0)) throw ValidationError("config: synthetic periods must be > 0");
        }
        if (!synthetic->allow_inverse_crime && dt_generation == dt_inversion)
            throw ValidationError(
                "config: generation and inversion time steps are equal; set synthetic.allow_inverse_crime to proceed");
    }
}

RunConfig load_config(const fs::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    RunConfig c;
    c.config_path = fs::absolute(path);
    const fs::path base = c.config_path.parent_path();
    try {
        if (const auto s = root["seed"]) c.seed = parse_seed(s.as<std::string>(), "config");
        if (const auto p = root["paths"]) {
            c.out_dir = resolve(base, p["out_dir"].as<std::string>("out"));
            c.wind_csv = resolve(base, p["wind_csv"].as<std::string>(""));
            c.sensors = resolve(base, p["sensors"].as<std::string>(""));
            c.measurements = resolve(base, p["measurements"].as<std::string>(""));
        } else {
            c.out_dir = resolve(base, "out");
        }
        const auto t = root["time"];
        if (!t) throw ValidationError("config: missing 'time' section");
        c.start = parse_time(t["start"].as<std::string>());
        if (t["duration_days"]) c.duration = t["duration_days"].as<double>() * 86400.0;
        read(t, "duration_s", c.duration);
        read(t, "dt_inversion", c.dt_inversion);
        read(t, "dt_generation", c.dt_generation);

        const auto p = root["particle"];
        if (!p) throw ValidationError("config: missing 'particle' section");
        c.particle.density = p["density"].as<double>();
        c.particle.diameter = p["diameter"].as<double>();
        c.particle.w_dep = p["w_dep"].as<double>();
        if (p["w_set"]) {
            c.particle.w_set = p["w_set"].as<double>();
        } else {
            c.particle.w_set = settling_velocity(c.particle.density, c.particle.diameter);
            spdlog::info("config: particle.w_set not given, using the Stokes value {:.4g} m/s", c.particle.w_set);
        }
        if (const auto s = root["stability"]) c.stability = parse_stability_class(s.as<std::string>());
        if (const auto k = root["kernel"]) {
            read(k, "min_downwind", c.kernel.min_downwind);
            read(k, "calm_wind", c.kernel.calm_wind);
        }
        for (const auto& s : root["sources"])
            c.sources.push_back({s["id"].as<std::string>(), s["x"].as<double>(), s["y"].as<double>(),
                                 s["height"].as<double>(0.0)});
        if (const auto pr = root["prior"]) {
            read(pr, "alpha", c.alpha);
            read(pr, "gamma", c.gamma);
        }
        if (const auto s = root["sampler"]) {
            read(s, "beta", c.sampler.beta);
            read(s, "steps", c.sampler.steps);
            read(s, "burn_in", c.sampler.burn_in_fraction);
            read(s, "max_covariance_samples", c.sampler.max_covariance_samples);
            read(s, "tune", c.tune_beta);
            read(s, "pilot_steps", c.tune.pilot_steps);
            read(s, "band_low", c.tune.band_low);
            read(s, "band_high", c.tune.band_high);
        }
        if (const auto w = root["wind_fit"]) {
            read_list(w, "signal_var_factors", c.wind_fit.signal_var_factors);
            read_list(w, "length_scales", c.wind_fit.length_scales);
            read_list(w, "noise_var_factors", c.wind_fit.noise_var_factors);
            read(w, "folds", c.wind_fit.folds);
            read(w, "cv_max_points", c.wind_fit.cv_max_points);
        }
        if (const auto n = root["noise"]) {
            read(n, "floor", c.noise_floor);
            read(n, "scale", c.noise_scale);
        }
        if (const auto g = root["grid"]) {
            c.grid = {g["x_min"].as<double>(), g["x_max"].as<double>(), g["y_min"].as<double>(),
                      g["y_max"].as<double>(), g["nx"].as<int>(100),    g["ny"].as<int>(100)};
            read(g, "n_e", c.n_e);
        }
        if (const auto u = root["units"]) {
            const auto dep = u["deposition"].as<std::string>("mg_m2");
            if (dep != "mg_m2" && dep != "kg_m2") throw ValidationError("config: units.deposition must be mg_m2 or kg_m2");
            c.display_mg = dep == "mg_m2";
        }
        if (const auto ex = root["exclude_sensors"]) c.exclude_sensors = ex.as<std::vector<std::string>>();
        if (const auto sy = root["synthetic"]) {
            SyntheticSpec spec;
            read(sy, "clip", spec.clip);
            read(sy, "allow_inverse_crime", spec.allow_inverse_crime);
            spec.sensors = resolve(base, sy["sensors"].as<std::string>(""));
            if (spec.sensors.empty()) throw ValidationError("config: synthetic.sensors is required");
            for (const auto& s : sy["sources"]) {
                SyntheticSource src;
                src.id = s["id"].as<std::string>();
                read(s, "amplitude", src.amplitude);
                read(s, "offset", src.offset);
                read(s, "phase", src.phase);
                if (s["period_days"]) src.period = s["period_days"].as<double>() * 86400.0;
                read(s, "period_s", src.period);
                spec.sources.push_back(src);
            }
            if (const auto w = sy["wind"]) {
                auto& sw = spec.wind;
                read(w, "interval_s", sw.interval);
                read(w, "speed_mean", sw.speed_mean);
                read(w, "speed_amplitude", sw.speed_amplitude);
                read(w, "speed_period_s", sw.speed_period);
                read(w, "direction_from", sw.direction_from);
                read(w, "direction_amplitude", sw.direction_amplitude);
                read(w, "direction_period_s", sw.direction_period);
                read(w, "diurnal_amplitude", sw.diurnal_amplitude);
                read(w, "speed_noise", sw.speed_noise);
                read(w, "direction_noise", sw.direction_noise);
            }
            c.synthetic = spec;
        }
    } catch (const YAML::Exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["paths"] = {{"wind_csv", c.wind_path().filename().string()},
                  {"sensors", c.sensors_path().filename().string()},
                  {"measurements", c.measurements_path().filename().string()}};
    j["time"] = {{"start", format_time(c.start)},
                 {"duration_s", c.duration},
                 {"dt_inversion", c.dt_inversion},
                 {"dt_generation", c.dt_generation}};
    j["particle"] = {{"density", c.particle.density},
                     {"diameter", c.particle.diameter},
                     {"w_dep", c.particle.w_dep},
                     {"w_set", c.particle.w_set}};
    j["stability"] = std::string(1, to_char(c.stability));
    j["kernel"] = {{"min_downwind", c.kernel.min_downwind}, {"calm_wind", c.kernel.calm_wind}};
    j["sources"] = nlohmann::json::array();
    for (const auto& s : c.sources) j["sources"].push_back({{"id", s.id}, {"x", s.x}, {"y", s.y}, {"height", s.height}});
    j["prior"] = {{"alpha", c.alpha}, {"gamma", c.gamma}};
    j["sampler"] = {{"beta", c.sampler.beta},
                    {"steps", c.sampler.steps},
                    {"burn_in", c.sampler.burn_in_fraction},
                    {"max_covariance_samples", c.sampler.max_covariance_samples},
                    {"tune", c.tune_beta},
                    {"pilot_steps", c.tune.pilot_steps},
                    {"band_low", c.tune.band_low},
                    {"band_high", c.tune.band_high}};
    j["wind_fit"] = {{"signal_var_factors", c.wind_fit.signal_var_factors},
                     {"length_scales", c.wind_fit.length_scales},
                     {"noise_var_factors", c.wind_fit.noise_var_factors},
                     {"folds", c.wind_fit.folds},
                     {"cv_max_points", c.wind_fit.cv_max_points}};
    j["noise"] = {{"floor", c.noise_floor}, {"scale", c.noise_scale}};
    j["grid"] = {{"x_min", c.grid.x_min}, {"x_max", c.grid.x_max}, {"y_min", c.grid.y_min}, {"y_max", c.grid.y_max},
                 {"nx", c.grid.nx},       {"ny", c.grid.ny},       {"n_e", c.n_e}};
    j["units"] = {{"deposition", c.display_mg ? "mg_m2" : "kg_m2"}};
    j["exclude_sensors"] = c.exclude_sensors;
    if (c.synthetic) {
        const auto& s = *c.synthetic;
        nlohmann::json src = nlohmann::json::array();
        for (const auto& q : s.sources)
            src.push_back({{"id", q.id}, {"amplitude", q.amplitude}, {"period_s", q.period}, {"phase", q.phase},
                           {"offset", q.offset}});
        const auto& w = s.wind;
        j["synthetic"] = {{"clip", s.clip},
                          {"allow_inverse_crime", s.allow_inverse_crime},
                          {"sensors", s.sensors.filename().string()},
                          {"sources", src},
                          {"wind",
                           {{"interval_s", w.interval},
                            {"speed_mean", w.speed_mean},
                            {"speed_amplitude", w.speed_amplitude},
                            {"speed_period_s", w.speed_period},
                            {"direction_from", w.direction_from},
                            {"direction_amplitude", w.direction_amplitude},
                            {"direction_period_s", w.direction_period},
                            {"diurnal_amplitude", w.diurnal_amplitude},
                            {"speed_noise", w.speed_noise},
                            {"direction_noise", w.direction_noise}}}};
    }
    return j;
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

void apply_environment(RunConfig& cfg) {
    if (const char* s = std::getenv("PLUME_SEED"); s && *s) {
        cfg.seed = parse_seed(s, "PLUME_SEED");
        spdlog::info("PLUME_SEED overrides the seed: {}", cfg.seed);
    }
    if (const char* t = std::getenv("PLUME_THREADS"); t && *t) {
        const int n = std::atoi(t);
        if (n < 1) throw ValidationError("PLUME_THREADS must be a positive integer");
        omp_set_num_threads(n);
    }
}

}  // namespace plumeinv::app
