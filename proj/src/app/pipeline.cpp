#include "plumeinv/app/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "plumeinv/app/io.hpp"
#include "plumeinv/app/synthetic.hpp"
#include "plumeinv/errors.hpp"
#include "plumeinv/uqprop.hpp"

namespace plumeinv::app {

namespace fs = std::filesystem;

Problem build_problem(const RunConfig& cfg, const WindSeries& wind, std::vector<SensorSpec> sensors,
                      MeasurementSet measurements, std::optional<Eigen::VectorXd> known_variance) {
    if (measurements.size() != static_cast<Eigen::Index>(measurements.entries.size()))
        throw ValidationError("measurement set: entries and values disagree");
    if (known_variance && known_variance->size() != measurements.size())
        throw ValidationError("noise variance does not match the measurements");
    const std::set<std::string> excluded(cfg.exclude_sensors.begin(), cfg.exclude_sensors.end());
    for (const auto& id : excluded)
        if (std::none_of(sensors.begin(), sensors.end(), [&](const SensorSpec& s) { return s.id == id; }))
            throw ValidationError("exclude_sensors: unknown sensor '" + id + "'");

    Problem p;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < measurements.size(); ++r)
        if (!excluded.count(measurements.entries[r].sensor_id)) keep.push_back(r);
    for (auto& s : sensors)
        if (!excluded.count(s.id)) p.sensors.push_back(std::move(s));
    if (p.sensors.empty()) throw ValidationError("no sensors left after exclusions");
    if (!excluded.empty()) spdlog::info("excluding {} sensor(s) from the inversion", excluded.size());

    p.measurements.values.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        p.measurements.entries.push_back(measurements.entries[keep[k]]);
        p.measurements.values[static_cast<Eigen::Index>(k)] = measurements.values[keep[k]];
    }

    p.model.emplace(cfg.sources, wind, cfg.particle, cfg.stability, cfg.kernel);
    p.F = assemble_F(p.sensors, *p.model);
    if (p.F.size() != p.measurements.size())
        throw ValidationError("measurements do not match the sensor schedule (" +
                              std::to_string(p.measurements.size()) + " values, " + std::to_string(p.F.size()) +
                              " expected)");
    for (Eigen::Index r = 0; r < p.F.size(); ++r) {
        const auto& e = p.measurements.entries[r];
        if (e.sensor_id != p.sensors[p.F.rows[r].sensor].id || e.index != p.F.rows[r].index)
            throw ValidationError("measurements are not in sensor stacking order");
    }

    if (known_variance) {
        p.variance.resize(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) p.variance[static_cast<Eigen::Index>(k)] = (*known_variance)[keep[k]];
        spdlog::info("noise model: clean-signal variance from the synthetic generator");
    } else {
        p.variance = noise_variance_from_signal(p.F, p.sensors, p.measurements.values, cfg.noise_floor);
        spdlog::info("noise model: measured-value variance per noise group over SNR");
    }
    p.variance *= cfg.noise_scale * cfg.noise_scale;
    p.measurements.variance = p.variance;
    p.measurements.validate();
    return p;
}

SmoothnessPrior make_prior(const RunConfig& cfg, const Problem& problem) {
    PriorSpec spec;
    spec.alpha = cfg.alpha;
    spec.gamma = cfg.gamma;
    spec.dt = problem.grid().dt;
    spec.steps = problem.grid().count;
    spec.sources = problem.model->source_count();
    return SmoothnessPrior(spec);
}

ConstantEstimate stage_constant(const Problem& p) {
    return mle_constant(p.F.matrix, p.measurements.values, p.variance, p.model->source_count(), p.grid().count);
}

GaussianPosterior stage_smooth(const Problem& p, const SmoothnessPrior& prior, const Eigen::VectorXd& q_c,
                               bool with_covariance) {
    return gaussian_posterior(p.F.matrix, p.measurements.values, p.variance, prior, q_c, with_covariance);
}

PositivePosterior stage_positive(const Problem& p, const SmoothnessPrior& prior, const Eigen::VectorXd& q_s,
                                 const SamplerConfig& sampler, const PositiveOptions& opts) {
    return positive_posterior(p.F.matrix, p.measurements.values, p.variance, prior, q_s, sampler, opts);
}

namespace {

using Clock = std::chrono::steady_clock;

struct Paths {
    fs::path out;
    fs::path noise() const { return out / "noise_variance.csv"; }
    fs::path truth() const { return out / "truth.csv"; }
    fs::path wind_reg() const { return out / "wind_regularized.csv"; }
    fs::path emissions(Stage s) const {
        switch (s) {
            case Stage::constant: return out / "emissions_constant.csv";
            case Stage::smooth: return out / "emissions_smooth.csv";
            default: return out / "emissions_positive.csv";
        }
    }
    fs::path run_json(const std::string& name) const { return out / ("run_" + name + ".json"); }
    fs::path factors() const { return out / "lowrank_factors.bin"; }
    fs::path grid_csv() const { return out / "deposition_grid.csv"; }
    fs::path grid_json() const { return out / "deposition_grid.json"; }
    fs::path timing() const { return out / "timing.json"; }
    fs::path chain() const { return out / "chain.csv"; }
};

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::constant: return "constant";
        case Stage::smooth: return "smooth";
        default: return "positive";
    }
}

// Wall-clock timing lives in its own file so every other artifact is
// reproducible byte for byte.
void record_timing(const Paths& paths, const std::string& key, Clock::time_point since) {
    nlohmann::json j = nlohmann::json::object();
    if (fs::exists(paths.timing())) {
        std::ifstream in(paths.timing());
        j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) j = nlohmann::json::object();
    }
    j[key] = std::chrono::duration<double>(Clock::now() - since).count();
    write_json(paths.timing(), j);
}

bool fresh(const fs::path& path, const std::string& hash) {
    return fs::exists(path) && read_csv_hash(path) == hash;
}

std::vector<std::string> source_ids(const RunConfig& cfg) {
    std::vector<std::string> ids;
    for (const auto& s : cfg.sources) ids.push_back(s.id);
    return ids;
}

nlohmann::json per_source_means(const RunConfig& cfg, const Eigen::VectorXd& q, int steps) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < cfg.sources.size(); ++i)
        j[cfg.sources[i].id] = q.segment(static_cast<Eigen::Index>(i) * steps, steps).mean();
    return j;
}

nlohmann::json run_header(const RunConfig& cfg, const std::string& stage, const std::string& hash) {
    return {{"stage", stage}, {"config_hash", hash}, {"config", to_json(cfg)}};
}

bool synthetic_inputs(const RunConfig& cfg) {
    return cfg.synthetic && cfg.wind_csv.empty() && cfg.sensors.empty() && cfg.measurements.empty();
}

void ensure_inputs(const RunConfig& cfg) {
    const std::string hash = config_hash(cfg);
    if (synthetic_inputs(cfg)) {
        if (!fs::exists(cfg.wind_path()) || !fs::exists(cfg.sensors_path()) ||
            !fresh(cfg.measurements_path(), hash)) {
            spdlog::info("synthetic inputs missing or stale, running synth first");
            cmd_synth(cfg);
        }
        return;
    }
    for (const auto& p : {cfg.wind_path(), cfg.sensors_path(), cfg.measurements_path()})
        if (!fs::exists(p)) throw ValidationError("input file not found: " + p.string());
}

WindSeries regularized_wind(const RunConfig& cfg) {
    const Paths paths{cfg.out_dir};
    if (!fresh(paths.wind_reg(), config_hash(cfg))) {
        spdlog::info("regularized wind missing or stale, running wind-fit first");
        cmd_wind_fit(cfg);
    }
    auto w = load_wind_series(paths.wind_reg());
    const auto g = cfg.inversion_grid();
    if (w.grid.count != g.count || w.grid.t0 != g.t0 || std::abs(w.grid.dt - g.dt) > 1e-9)
        throw ValidationError(paths.wind_reg().string() + ": wind series does not match the inversion grid");
    w.grid = g;
    return w;
}

Problem load_problem(const RunConfig& cfg) {
    ensure_inputs(cfg);
    const Paths paths{cfg.out_dir};
    auto sensors = load_sensors(cfg.sensors_path());
    auto meas = load_measurements(cfg.measurements_path(), sensors);
    std::optional<Eigen::VectorXd> known;
    if (synthetic_inputs(cfg) && fresh(paths.noise(), config_hash(cfg)))
        known = load_noise_variance(paths.noise(), sensors);
    return build_problem(cfg, regularized_wind(cfg), std::move(sensors), std::move(meas), known);
}

EmissionTable table(const RunConfig& cfg, const Problem& p, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd,
                    const std::string& hash) {
    return {source_ids(cfg), p.grid(), mean, sd, hash};
}

Eigen::VectorXd run_constant(const RunConfig& cfg, const Problem& p, bool reuse) {
    const Paths paths{cfg.out_dir};
    const std::string hash = config_hash(cfg);
    if (reuse && fresh(paths.emissions(Stage::constant), hash)) return load_emissions(paths.emissions(Stage::constant)).mean;
    const auto t0 = Clock::now();
    const auto est = stage_constant(p);
    write_emissions(paths.emissions(Stage::constant),
                    table(cfg, p, est.q, Eigen::VectorXd::Constant(est.q.size(), std::nan("")), hash));
    auto j = run_header(cfg, "constant", hash);
    j["mean_rate_kg_s"] = per_source_means(cfg, est.q, p.grid().count);
    j["annual_tonnes"] = annualize(est.q, p.grid().count);
    j["nnls"] = {{"kkt_residual", est.solver.kkt_residual},
                 {"iterations", est.solver.iterations},
                 {"converged", est.solver.converged},
                 {"non_unique", est.solver.non_unique}};
    write_json(paths.run_json("constant"), j);
    record_timing(paths, "constant_s", t0);
    spdlog::info("constant stage: annual total {:.4g} t/yr", annualize(est.q, p.grid().count));
    return est.q;
}

Eigen::VectorXd run_smooth(const RunConfig& cfg, const Problem& p, const SmoothnessPrior& prior, bool reuse) {
    const Paths paths{cfg.out_dir};
    const std::string hash = config_hash(cfg);
    if (reuse && fresh(paths.emissions(Stage::smooth), hash)) return load_emissions(paths.emissions(Stage::smooth)).mean;
    const Eigen::VectorXd q_c = run_constant(cfg, p, true);
    const auto t0 = Clock::now();
    const auto post = stage_smooth(p, prior, q_c);
    write_emissions(paths.emissions(Stage::smooth),
                    table(cfg, p, post.mean, post.variance.cwiseMax(0.0).cwiseSqrt(), hash));
    auto j = run_header(cfg, "smooth", hash);
    j["mean_rate_kg_s"] = per_source_means(cfg, post.mean, p.grid().count);
    j["annual_tonnes"] = annualize(post.mean, p.grid().count);
    j["negative_entries"] = (post.mean.array() < 0.0).count();
    write_json(paths.run_json("smooth"), j);
    record_timing(paths, "smooth_s", t0);
    spdlog::info("smooth stage: annual total {:.4g} t/yr", annualize(post.mean, p.grid().count));
    return post.mean;
}

struct PositiveArtifacts {
    Eigen::VectorXd mean;
    LowRankFactors factors;
};

PositiveArtifacts run_positive(const RunConfig& cfg, const Problem& p, const SmoothnessPrior& prior, bool reuse,
                               const CommandOptions& opts) {
    const Paths paths{cfg.out_dir};
    const std::string hash = config_hash(cfg);
    if (reuse && fresh(paths.emissions(Stage::positive), hash) && fs::exists(paths.factors())) {
        std::string fhash;
        auto f = load_factors(paths.factors(), &fhash);
        if (fhash == hash) return {load_emissions(paths.emissions(Stage::positive)).mean, std::move(f)};
    }
    const Eigen::VectorXd q_s = run_smooth(cfg, p, prior, true);
    const auto t0 = Clock::now();

    SamplerConfig sampler = cfg.sampler;
    sampler.seed = cfg.seed;
    nlohmann::json tune_j;
    if (cfg.tune_beta) {
        TuneOptions t = cfg.tune;
        t.seed = cfg.seed;
        const auto phi = data_misfit(p.F.matrix, p.measurements.values, p.variance);
        const auto res = tune_beta(phi, clip_positive(q_s), prior, t);
        sampler.beta = res.beta;
        tune_j = {{"beta", res.beta}, {"acceptance", res.acceptance}, {"in_band", res.in_band}};
        spdlog::info("tuned beta={:.4f} (pilot acceptance {:.3f})", res.beta, res.acceptance);
    }

    PositiveOptions po;
    std::ofstream dump;
    if (opts.dump_chain) {
        dump.open(paths.chain());
        po.hooks.dump = &dump;
        po.hooks.dump_every = std::max(1L, sampler.steps / 2000);
        const int n_t = p.grid().count;
        for (int i = 0; i < p.model->source_count(); ++i) po.hooks.dump_coordinates.push_back(i * n_t + n_t / 2);
    }
    const auto post = stage_positive(p, prior, q_s, sampler, po);
    const auto factors = lowrank_truncate(post.covariance, std::min<int>(cfg.n_e, static_cast<int>(post.mean.size())));

    write_emissions(paths.emissions(Stage::positive),
                    table(cfg, p, post.mean, post.covariance.diagonal().cwiseMax(0.0).cwiseSqrt(), hash));
    write_factors(paths.factors(), factors, hash);
    auto j = run_header(cfg, "positive", hash);
    j["mean_rate_kg_s"] = per_source_means(cfg, post.mean, p.grid().count);
    j["annual_tonnes"] = annualize(post.mean, p.grid().count);
    j["chain"] = {{"steps", post.chain.steps},
                  {"beta", post.chain.beta},
                  {"burn_in", post.chain.burn_in},
                  {"acceptance_rate", post.chain.acceptance_rate},
                  {"effective_sample_size", post.chain.ess},
                  {"nonfinite_rejections", post.chain.nonfinite_rejections}};
    if (!tune_j.is_null()) j["tune"] = tune_j;
    j["n_e"] = factors.rank();
    write_json(paths.run_json("positive"), j);
    record_timing(paths, "positive_s", t0);
    return {post.mean, factors};
}

void write_wind_fit(const RunConfig& cfg, const Paths& paths, const std::string& hash, const WindSeries& wind,
                    const WindFitReport& report) {
    write_wind_series(paths.wind_reg(), wind, hash);
    const auto cv = [](const CrossValidation& c) {
        return nlohmann::json{{"signal_var", c.best.signal_var},
                              {"length_scale_s", c.best.length_scale},
                              {"noise_var", c.best.noise_var},
                              {"cv_mse", c.best_score},
                              {"folds", c.folds}};
    };
    auto j = run_header(cfg, "wind-fit", hash);
    j["ux"] = cv(report.ux);
    j["uy"] = cv(report.uy);
    j["extrapolated"] = report.extrapolated;
    write_json(paths.run_json("wind_fit"), j);
}

}  // namespace

void cmd_synth(const RunConfig& cfg) {
    if (!cfg.synthetic) throw ValidationError("synth: config has no synthetic section");
    const auto t0 = Clock::now();
    const Paths paths{cfg.out_dir};
    const std::string hash = config_hash(cfg);
    const auto ds = generate_synthetic(cfg);
    write_wind_csv(cfg.wind_path(), ds.wind, hash);
    write_sensors(cfg.sensors_path(), ds.sensors, hash);
    write_noise_variance(paths.noise(), ds.measurements, hash);
    write_emissions(paths.truth(), {source_ids(cfg), ds.grid, ds.truth,
                                    Eigen::VectorXd::Constant(ds.truth.size(), std::nan("")), hash});
    // Written last: its hash marks the synthetic set as complete.
    write_measurements(cfg.measurements_path(), ds.measurements, hash);
    auto j = run_header(cfg, "synth", hash);
    j["measurements"] = ds.measurements.size();
    j["wind_records"] = ds.wind.size();
    j["true_mean_rate_kg_s"] = per_source_means(cfg, ds.truth, ds.grid.count);
    j["true_annual_tonnes"] = annualize(ds.truth, ds.grid.count);
    write_json(paths.run_json("synth"), j);
    // The records were just fitted; reuse their hyperparameters on the inversion grid.
    WindFitReport report;
    const auto wind = regularize_wind(ds.wind, cfg.inversion_grid(), cfg.wind_fit, cfg.seed, &report, &ds.wind_fit);
    write_wind_fit(cfg, paths, hash, wind, report);
    record_timing(paths, "synth_s", t0);
}

void cmd_wind_fit(const RunConfig& cfg) {
    ensure_inputs(cfg);
    const auto t0 = Clock::now();
    const Paths paths{cfg.out_dir};
    const std::string hash = config_hash(cfg);
    WindFitReport report;
    const auto wind = regularize_wind(load_wind_csv(cfg.wind_path()), cfg.inversion_grid(), cfg.wind_fit, cfg.seed,
                                      &report);
    write_wind_fit(cfg, paths, hash, wind, report);
    record_timing(paths, "wind_fit_s", t0);
}

void cmd_invert(const RunConfig& cfg, Stage stage, const CommandOptions& opts) {
    const auto t0 = Clock::now();
    const Problem p = load_problem(cfg);
    spdlog::info("inversion: {} measurements, {} unknowns, stage {}", p.F.size(), p.F.matrix.cols(), stage_name(stage));
    if (stage == Stage::constant) {
        run_constant(cfg, p, false);
    } else {
        const SmoothnessPrior prior = make_prior(cfg, p);
        if (stage == Stage::smooth)
            run_smooth(cfg, p, prior, false);
        else
            run_positive(cfg, p, prior, false, opts);
    }
    record_timing(Paths{cfg.out_dir}, std::string("invert_") + stage_name(stage) + "_total_s", t0);
}

void cmd_propagate(const RunConfig& cfg, const CommandOptions& opts) {
    const auto t0 = Clock::now();
    const Paths paths{cfg.out_dir};
    const std::string hash = config_hash(cfg);
    const Problem p = load_problem(cfg);
    const SmoothnessPrior prior = make_prior(cfg, p);
    const auto pos = run_positive(cfg, p, prior, true, opts);
    const auto t1 = Clock::now();
    const auto grid = propagate_streaming(cfg.grid, *p.model, pos.mean, pos.factors);
    const double scale = cfg.display_mg ? 1e6 : 1.0;
    write_grid(paths.grid_csv(), paths.grid_json(), grid, pos.factors, scale, cfg.display_mg ? "mg/m^2" : "kg/m^2",
               hash);
    auto j = run_header(cfg, "propagate", hash);
    j["annual_tonnes"] = annualize(pos.mean, p.grid().count);
    j["deposited_mass_kg"] = grid.mean.sum() * cfg.grid.cell_area();
    j["emitted_mass_kg"] = pos.mean.sum() * p.grid().dt;
    j["max_mean_deposition"] = grid.mean.maxCoeff() * scale;
    j["max_std_deposition"] = grid.std.maxCoeff() * scale;
    write_json(paths.run_json("propagate"), j);
    record_timing(paths, "propagate_s", t1);
    record_timing(paths, "propagate_total_s", t0);
}

}  // namespace plumeinv::app
