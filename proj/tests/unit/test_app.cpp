#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "plumeinv/app/config.hpp"
#include "plumeinv/app/hash.hpp"
#include "plumeinv/app/io.hpp"
#include "plumeinv/app/pipeline.hpp"
#include "plumeinv/app/synthetic.hpp"
#include "plumeinv/errors.hpp"

#ifndef PLUMEINV_SOURCE_DIR
#error "PLUMEINV_SOURCE_DIR must point at the repository root"
#endif

using namespace plumeinv;
using namespace plumeinv::app;
namespace fs = std::filesystem;

namespace {

const fs::path kSmoke = fs::path(PLUMEINV_SOURCE_DIR) / "tests/cli/smoke.yaml";

struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("plumeinv_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

const char* kSensors = R"(sensors:
  - {id: j1, kind: dustfall_jar, x_m: 10, y_m: 20, z_m: 0, area_m2: 0.01, snr: 10}
  - id: s1
    kind: sampler
    x_m: 5
    y_m: -5
    z_m: 2
    window_s: 3600
    start_times: [2023-06-01T00:00:00Z, 2023-06-01T02:00:00Z]
    snr: 100
)";

}  // namespace

TEST_CASE("timestamps") {
    CHECK(parse_time("1970-01-01T00:00:00Z") == 0.0);
    CHECK(parse_time("2023-06-01T00:00:00Z") == 1685577600.0);
    CHECK(parse_time("2023-06-01T02:00:00+02:00") == 1685577600.0);
    CHECK(parse_time("2023-06-01T00:00:00.25Z") == 1685577600.25);
    CHECK(parse_time("1685577600") == 1685577600.0);
    CHECK(format_time(1685577600.0) == "2023-06-01T00:00:00Z");
    CHECK(parse_time(format_time(1234567890.0)) == 1234567890.0);
    CHECK_THROWS_AS(parse_time("yesterday"), ValidationError);
    CHECK_THROWS_AS(parse_time(""), ValidationError);
    CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("SHA-256 digest") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("wind CSV loading") {
    TempDir dir;
    const auto p = dir.write("w.csv",
                             "timestamp,speed_mps,direction_deg_from\n"
                             "2023-06-01T01:00:00Z,3,90\n"
                             "2023-06-01T00:00:00Z,2,180\n"
                             "2023-06-01T01:00:00Z,4,270\n");
    const auto r = load_wind_csv(p);
    REQUIRE(r.size() == 2);
    CHECK(r[0].speed == 2.0);
    CHECK(r[1].speed == 4.0);  // duplicate timestamp keeps the last row

    write_wind_csv(dir.path / "w2.csv", r, "abc");
    const auto back = load_wind_csv(dir.path / "w2.csv");
    CHECK(back.size() == 2);
    CHECK(back[1].direction_from == 270.0);
    CHECK(read_csv_hash(dir.path / "w2.csv") == "abc");

    CHECK_THROWS_AS(load_wind_csv(dir.write("bad.csv", "timestamp,speed_mps,direction_deg_from\n"
                                                       "2023-06-01T00:00:00Z,2,360\n")),
                    ValidationError);
    CHECK_THROWS_AS(load_wind_csv(dir.write("empty.csv", "")), ValidationError);
    CHECK_THROWS_AS(load_wind_csv(dir.write("hdr.csv", "time,speed,dir\n")), ValidationError);
    try {
        load_wind_csv(dir.write("row.csv", "timestamp,speed_mps,direction_deg_from\n"
                                           "2023-06-01T00:00:00Z,2,10\n"
                                           "2023-06-01T01:00:00Z,abc,10\n"));
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
}

TEST_CASE("sensor and measurement files") {
    TempDir dir;
    const auto sp = dir.write("sensors.yaml", kSensors);
    const auto sensors = load_sensors(sp);
    REQUIRE(sensors.size() == 2);
    CHECK(sensors[0].is_jar());
    CHECK(sensors[0].snr == 10.0);
    CHECK(sensors[1].measurement_count() == 2);
    CHECK(std::get<RealTimeSampler>(sensors[1].kind).start_times[1] == parse_time("2023-06-01T02:00:00Z"));

    write_sensors(dir.path / "s2.yaml", sensors, "h");
    const auto back = load_sensors(dir.path / "s2.yaml");
    REQUIRE(back.size() == 2);
    CHECK(back[1].location.z == 2.0);
    CHECK(std::get<RealTimeSampler>(back[1].kind).start_times == std::get<RealTimeSampler>(sensors[1].kind).start_times);

    // Rows in any order are restacked to sensor order.
    const auto mp = dir.write("m.csv", "sensor_id,index,value\ns1,1,3.5\nj1,0,1e-6\ns1,0,2.5\n");
    const auto m = load_measurements(mp, sensors);
    REQUIRE(m.size() == 3);
    CHECK(m.values[0] == 1e-6);
    CHECK(m.values[1] == 2.5);
    CHECK(m.values[2] == 3.5);

    write_measurements(dir.path / "m2.csv", m, "hash1");
    const auto m2 = load_measurements(dir.path / "m2.csv", sensors);
    CHECK(m2.values == m.values);
    CHECK(read_csv_hash(dir.path / "m2.csv") == "hash1");

    CHECK_THROWS_AS(load_measurements(dir.write("dup.csv", "sensor_id,index,value\nj1,0,1\nj1,1,2\ns1,0,1\ns1,1,1\n"),
                                      sensors),
                    ValidationError);
    CHECK_THROWS_AS(load_measurements(dir.write("unk.csv", "sensor_id,index,value\nzz,0,1\n"), sensors),
                    ValidationError);
    CHECK_THROWS_AS(load_measurements(dir.write("miss.csv", "sensor_id,index,value\nj1,0,1\ns1,0,1\n"), sensors),
                    ValidationError);
    CHECK_THROWS_AS(load_sensors(dir.write("badkind.yaml", "sensors:\n  - {id: a, kind: radar, x_m: 0, y_m: 0, snr: 1}\n")),
                    ValidationError);
    CHECK_THROWS_AS(load_sensors(dir.write("dupid.yaml",
                                           "sensors:\n  - {id: a, kind: jar, x_m: 0, y_m: 0, area_m2: 1, snr: 1}\n"
                                           "  - {id: a, kind: jar, x_m: 1, y_m: 0, area_m2: 1, snr: 1}\n")),
                    ValidationError);
}

TEST_CASE("emission table and factor round trips") {
    TempDir dir;
    EmissionTable t{{"a", "b"}, {1685577600.0, 3600.0, 3}, Eigen::VectorXd::LinSpaced(6, 1e-4, 6e-4),
                    Eigen::VectorXd::Constant(6, 2e-5), "h"};
    t.std[2] = std::nan("");
    write_emissions(dir.path / "e.csv", t);
    const auto back = load_emissions(dir.path / "e.csv");
    CHECK(back.source_ids == t.source_ids);
    CHECK(back.grid.count == 3);
    CHECK(back.grid.dt == 3600.0);
    CHECK(back.mean == t.mean);
    CHECK(std::isnan(back.std[2]));
    CHECK(back.std[3] == t.std[3]);
    CHECK(back.config_hash == "h");

    LowRankFactors f{Eigen::Vector2d(3.0, 1.0), Eigen::MatrixXd::Random(5, 2)};
    write_factors(dir.path / "f.bin", f, "fh");
    std::string hash;
    const auto g = load_factors(dir.path / "f.bin", &hash);
    CHECK(g.values == f.values);
    CHECK(g.vectors == f.vectors);
    CHECK(hash == "fh");
    CHECK_THROWS_AS(load_factors(dir.write("junk.bin", "not a factor file at all, really")), ValidationError);
}

TEST_CASE("config loading, hashing and validation") {
    const auto cfg = load_config(kSmoke);
    CHECK(cfg.sources.size() == 2);
    CHECK(cfg.dt_inversion == 3600.0);
    CHECK(cfg.dt_generation == 1800.0);
    CHECK(cfg.inversion_grid().count == 72);
    CHECK(cfg.generation_grid().count == 144);
    CHECK(cfg.seed == 7);
    REQUIRE(cfg.synthetic);
    CHECK(cfg.synthetic->sources[0].period == 2.0 * 86400.0);
    CHECK(cfg.sensors_path().filename() == "sensors.yaml");

    const auto h = config_hash(cfg);
    CHECK(h.size() == 64);
    CHECK(config_hash(load_config(kSmoke)) == h);
    auto other = cfg;
    other.seed = 8;
    CHECK(config_hash(other) != h);
    other = cfg;
    other.out_dir = "/elsewhere";
    CHECK(config_hash(other) == h);

    auto bad = cfg;
    bad.dt_inversion = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.dt_generation = bad.dt_inversion;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad.synthetic->allow_inverse_crime = true;
    CHECK_NOTHROW(bad.validate());
    bad = cfg;
    bad.synthetic->sources[0].amplitude = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    ::setenv("PLUME_SEED", "99", 1);
    auto env = cfg;
    apply_environment(env);
    ::unsetenv("PLUME_SEED");
    CHECK(env.seed == 99);
}

TEST_CASE("synthetic rates") {
    SyntheticSpec spec;
    spec.sources = {{"a", 0.0, 86400.0, 0.3, 2e-4}, {"b", 3e-4, 43200.0, 0.0, 1e-4}};
    const TimeGrid g{0.0, 1800.0, 48};
    const auto q = true_rates(spec, g);
    REQUIRE(q.size() == 96);
    CHECK(q.head(48).isConstant(2e-4));
    CHECK(q[48] == doctest::Approx(1e-4));
    CHECK((q.array() >= 0.0).all());  // clipped where offset - amplitude < 0
    CHECK(q.tail(48).minCoeff() == 0.0);
    spec.clip = false;
    CHECK(true_rates(spec, g).minCoeff() < 0.0);
}

TEST_CASE("synthetic dataset is reproducible and the stages chain") {
    auto cfg = load_config(kSmoke);
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    CHECK(a.measurements.values == b.measurements.values);
    CHECK(a.truth == b.truth);
    CHECK(a.grid.dt == 1800.0);
    CHECK(a.measurements.size() == 3 + 72 + 3);
    cfg.seed = 8;
    CHECK(generate_synthetic(cfg).measurements.values != a.measurements.values);

    cfg.seed = 7;
    const auto wind = regularize_wind(a.wind, cfg.inversion_grid(), cfg.wind_fit, cfg.seed, nullptr, &a.wind_fit);
    const auto p = build_problem(cfg, wind, a.sensors, a.measurements, a.measurements.variance);
    CHECK(p.F.size() == 78);
    CHECK(p.variance == a.measurements.variance);
    const auto prior = make_prior(cfg, p);
    const auto qc = stage_constant(p);
    const auto qs = stage_smooth(p, prior, qc.q);
    // The smooth stage is centred on the constant estimate.
    const auto direct = gaussian_posterior(p.F.matrix, p.measurements.values, p.variance, prior, qc.q, false);
    CHECK(qs.mean == direct.mean);

    auto excluded = cfg;
    excluded.exclude_sensors = {"hourly"};
    const auto pe = build_problem(excluded, wind, a.sensors, a.measurements, a.measurements.variance);
    CHECK(pe.F.size() == 6);
    excluded.exclude_sensors = {"nope"};
    CHECK_THROWS_AS(build_problem(excluded, wind, a.sensors, a.measurements, a.measurements.variance),
                    ValidationError);
}
