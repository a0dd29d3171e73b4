#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "plumeinv/observation.hpp"
#include "plumeinv/uqprop.hpp"
#include "plumeinv/windprep.hpp"

namespace plumeinv::app {

// ISO-8601 UTC ("2023-06-01T00:00:00Z", optional fractional seconds, "Z" or
// "+hh:mm" offset). Plain numbers are taken as epoch seconds.
double parse_time(std::string_view text);
std::string format_time(double epoch);

// %.17g, so values survive a write/read round trip.
std::string format_double(double v);

// Wind CSV `timestamp,speed_mps,direction_deg_from`. Output is sorted by
// time; duplicate timestamps keep the last row.
std::vector<RawWindRecord> load_wind_csv(const std::filesystem::path& path);
void write_wind_csv(const std::filesystem::path& path, const std::vector<RawWindRecord>& records,
                    const std::string& config_hash = "");

std::vector<SensorSpec> load_sensors(const std::filesystem::path& path);
// A non-empty hash is appended as a trailing comment.
void write_sensors(const std::filesystem::path& path, const std::vector<SensorSpec>& sensors,
                   const std::string& config_hash = "");

// Measurements CSV `sensor_id,index,value`; `index` is 0-based. Rows are
// reordered to the stacking order of `sensors`; every measurement must be present.
MeasurementSet load_measurements(const std::filesystem::path& path, const std::vector<SensorSpec>& sensors);
void write_measurements(const std::filesystem::path& path, const MeasurementSet& set,
                        const std::string& config_hash);

// Optional per-row noise variance sidecar `sensor_id,index,variance`.
Eigen::VectorXd load_noise_variance(const std::filesystem::path& path, const std::vector<SensorSpec>& sensors);
void write_noise_variance(const std::filesystem::path& path, const MeasurementSet& set,
                          const std::string& config_hash);

struct EmissionTable {
    std::vector<std::string> source_ids;
    TimeGrid grid;
    Eigen::VectorXd mean;
    Eigen::VectorXd std;  // NaN where no uncertainty is available
    std::string config_hash;
};
// `source_id,time,mean_kg_s,std_kg_s`, source-major.
void write_emissions(const std::filesystem::path& path, const EmissionTable& table);
EmissionTable load_emissions(const std::filesystem::path& path);

// Regularized wind on the inversion grid: `timestamp,ux_mps,uy_mps`.
void write_wind_series(const std::filesystem::path& path, const WindSeries& wind, const std::string& config_hash);
WindSeries load_wind_series(const std::filesystem::path& path, std::string* config_hash = nullptr);

// `x_m,y_m,mean_mg_m2,std_mg_m2` (values scaled by `unit_scale` from kg/m^2)
// plus a JSON sidecar.
void write_grid(const std::filesystem::path& csv, const std::filesystem::path& sidecar,
                const DepositionGrid& grid, const LowRankFactors& factors, double unit_scale,
                const std::string& unit, const std::string& config_hash);

void write_factors(const std::filesystem::path& path, const LowRankFactors& f, const std::string& config_hash);
LowRankFactors load_factors(const std::filesystem::path& path, std::string* config_hash = nullptr);

// Reads the trailing `# config_hash=` line of a CSV; empty if absent.
std::string read_csv_hash(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace plumeinv::app
