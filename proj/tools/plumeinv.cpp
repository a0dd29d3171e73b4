#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>
#include <yaml-cpp/exceptions.h>

#include "plumeinv/app/config.hpp"
#include "plumeinv/app/pipeline.hpp"
#include "plumeinv/errors.hpp"
#include "plumeinv/linalg_guard.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
    using namespace plumeinv;
    try {
        ensure_sane_blas(argv);
    } catch (const NumericalError& e) {
        spdlog::error("{}", e.what());
        return kExitNumerical;
    }

    CLI::App app{"Emission-rate inversion for fugitive particulate sources"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> noise_scale;
    std::string out_dir;
    std::vector<std::string> exclude;
    bool verbose = false;
    bool quiet = false;
    app.add_option("-c,--config", config_path, "Run configuration (YAML)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Override the random seed");
    app.add_option("--out", out_dir, "Override the output directory");
    app.add_option("--noise-scale", noise_scale, "Scale the assumed noise std in Sigma (e.g. 0.5)")
        ->check(CLI::PositiveNumber);
    app.add_option("--exclude-sensor", exclude, "Leave a sensor out of the inversion (repeatable)");
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

    auto* synth = app.add_subcommand("synth", "Generate the synthetic twin dataset");
    auto* wind = app.add_subcommand("wind-fit", "Regularize the wind records onto the inversion grid");
    auto* invert = app.add_subcommand("invert", "Estimate emission rates");
    std::string stage = "positive";
    invert->add_option("--stage", stage, "constant, smooth or positive")
        ->check(CLI::IsMember({"constant", "smooth", "positive"}));
    bool dump_chain = false;
    invert->add_flag("--dump-chain", dump_chain, "Write a thinned MCMC trace to chain.csv");
    auto* propagate = app.add_subcommand("propagate", "Deposition mean and std on the ground grid");
    propagate->add_flag("--dump-chain", dump_chain, "Write a thinned MCMC trace to chain.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        auto cfg = app::load_config(config_path);
        app::apply_environment(cfg);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (noise_scale) cfg.noise_scale = *noise_scale;
        if (!exclude.empty()) cfg.exclude_sensors = exclude;
        cfg.validate();
        app::CommandOptions opts;
        opts.dump_chain = dump_chain;

        if (*synth) {
            app::cmd_synth(cfg);
        } else if (*wind) {
            app::cmd_wind_fit(cfg);
        } else if (*invert) {
            const auto s = stage == "constant" ? app::Stage::constant
                           : stage == "smooth" ? app::Stage::smooth
                                               : app::Stage::positive;
            app::cmd_invert(cfg, s, opts);
        } else if (*propagate) {
            app::cmd_propagate(cfg, opts);
        }
    } catch (const ValidationError& e) {
        spdlog::error("{}", e.what());
        return kExitValidation;
    } catch (const NumericalError& e) {
        spdlog::error("numerical failure: {}", e.what());
        return kExitNumerical;
    } catch (const YAML::Exception& e) {
        spdlog::error("{}", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
