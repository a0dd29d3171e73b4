#include "plumeinv/app/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include "plumeinv/errors.hpp"

namespace plumeinv::app {

namespace fs = std::filesystem;

namespace {

constexpr char kFactorMagic[8] = {'P', 'L', 'U', 'M', 'E', 'L', 'R', '1'};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string where(const fs::path& path, int line) { return path.string() + ":" + std::to_string(line); }

double parse_number(const std::string& s, const fs::path& path, int line, const char* what) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end)
        throw ValidationError(where(path, line) + ": malformed " + std::string(what) + " '" + s + "'");
    return v;
}

int parse_int(const std::string& s, const fs::path& path, int line, const char* what) {
    int v = 0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end)
        throw ValidationError(where(path, line) + ": malformed " + std::string(what) + " '" + s + "'");
    return v;
}

// Calls fn(line_number, fields) for each data row after checking the header.
template <class Fn>
void read_csv(const fs::path& path, const std::string& header, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    int n = 0;
    bool seen_header = false;
    const auto columns = split(header).size();
    while (std::getline(in, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!seen_header) {
            if (t != header)
                throw ValidationError(where(path, n) + ": expected header '" + header + "', found '" + t + "'");
            seen_header = true;
            continue;
        }
        const auto fields = split(t);
        if (fields.size() != columns)
            throw ValidationError(where(path, n) + ": expected " + std::to_string(columns) + " fields, found " +
                                  std::to_string(fields.size()));
        fn(n, fields);
    }
    if (!seen_header) throw ValidationError(path.string() + ": file is empty");
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw ValidationError("cannot write " + path.string());
    return out;
}

void hash_trailer(std::ostream& out, const std::string& hash) { out << "# config_hash=" << hash << '\n'; }

std::map<std::string, int> sensor_index(const std::vector<SensorSpec>& sensors) {
    std::map<std::string, int> idx;
    for (std::size_t k = 0; k < sensors.size(); ++k)
        if (!idx.emplace(sensors[k].id, static_cast<int>(k)).second)
            throw ValidationError("duplicate sensor id '" + sensors[k].id + "'");
    return idx;
}

// Row offsets of each sensor in the stacked measurement vector.
std::vector<int> row_offsets(const std::vector<SensorSpec>& sensors) {
    std::vector<int> off(sensors.size() + 1, 0);
    for (std::size_t k = 0; k < sensors.size(); ++k) off[k + 1] = off[k] + sensors[k].measurement_count();
    return off;
}

template <class Fn>
Eigen::VectorXd load_rows(const fs::path& path, const std::string& header, const std::vector<SensorSpec>& sensors,
                          Fn&& on_row) {
    const auto idx = sensor_index(sensors);
    const auto off = row_offsets(sensors);
    Eigen::VectorXd values = Eigen::VectorXd::Constant(off.back(), std::numeric_limits<double>::quiet_NaN());
    std::vector<char> seen(static_cast<std::size_t>(off.back()), 0);
    read_csv(path, header, [&](int line, const std::vector<std::string>& f) {
        const auto it = idx.find(f[0]);
        if (it == idx.end()) throw ValidationError(where(path, line) + ": unknown sensor '" + f[0] + "'");
        const auto& s = sensors[it->second];
        const int l = parse_int(f[1], path, line, "index");
        if (s.is_jar() && l != 0)
            throw ValidationError(where(path, line) + ": dust-fall jar '" + s.id +
                                  "' yields exactly one value per period (index 0)");
        if (l < 0 || l >= s.measurement_count())
            throw ValidationError(where(path, line) + ": index " + std::to_string(l) + " out of range for '" +
                                  s.id + "'");
        const int row = off[it->second] + l;
        if (seen[row]) {
            if (s.is_jar())
                throw ValidationError(where(path, line) + ": dust-fall jar '" + s.id + "' has more than one value");
            throw ValidationError(where(path, line) + ": duplicate measurement for '" + s.id + "' index " +
                                  std::to_string(l));
        }
        seen[row] = 1;
        values[row] = parse_number(f[2], path, line, "value");
        on_row(row, values[row]);
    });
    for (std::size_t k = 0; k < sensors.size(); ++k)
        for (int l = 0; l < sensors[k].measurement_count(); ++l)
            if (!seen[off[k] + l])
                throw ValidationError(path.string() + ": missing measurement for '" + sensors[k].id + "' index " +
                                      std::to_string(l));
    return values;
}

std::vector<double> parse_start_times(const YAML::Node& node, const std::string& id) {
    std::vector<double> out;
    if (node["start_times"]) {
        for (const auto& t : node["start_times"]) out.push_back(parse_time(t.as<std::string>()));
    }
    if (const auto sch = node["schedule"]) {
        if (!out.empty()) throw ValidationError("sensor '" + id + "': give start_times or schedule, not both");
        const double first = parse_time(sch["start"].as<std::string>());
        const double every = sch["every_s"].as<double>();
        const int count = sch["count"].as<int>();
        if (!(every > 0.0) || count < 1) throw ValidationError("sensor '" + id + "': invalid schedule");
        for (int l = 0; l < count; ++l) out.push_back(first + l * every);
    }
    return out;
}

}  // namespace

double parse_time(std::string_view text) {
    const std::string s = trim(text);
    if (s.empty()) throw ValidationError("empty timestamp");
    {
        double v = 0.0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec == std::errc() && r.ptr == s.data() + s.size()) return v;
    }
    std::tm tm{};
    const char* p = strptime(s.c_str(), "%Y-%m-%dT%H:%M:%S", &tm);
    if (!p) p = strptime(s.c_str(), "%Y-%m-%d %H:%M:%S", &tm);
    if (!p) throw ValidationError("malformed timestamp '" + s + "'");
    double frac = 0.0;
    if (*p == '.') {
        const char* q = p + 1;
        double scale = 0.1;
        while (*q >= '0' && *q <= '9') {
            frac += (*q - '0') * scale;
            scale *= 0.1;
            ++q;
        }
        p = q;
    }
    long offset = 0;
    if (*p == 'Z') {
        ++p;
    } else if (*p == '+' || *p == '-') {
        int hh = 0, mm = 0;
        if (std::sscanf(p + 1, "%2d:%2d", &hh, &mm) != 2) throw ValidationError("malformed UTC offset in '" + s + "'");
        offset = (*p == '+' ? 1 : -1) * (hh * 3600L + mm * 60L);
        p += 6;
    }
    if (*p != '\0') throw ValidationError("trailing characters in timestamp '" + s + "'");
    return static_cast<double>(timegm(&tm) - offset) + frac;
}

std::string format_time(double epoch) {
    const double whole = std::floor(epoch);
    const auto secs = static_cast<std::time_t>(whole);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    std::string out = buf;
    const double frac = epoch - whole;
    if (frac > 0.0) {
        char f[16];
        std::snprintf(f, sizeof f, "%.6f", frac);
        out += std::string(f + 1);  // drop the leading 0
    }
    return out + "Z";
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<RawWindRecord> load_wind_csv(const fs::path& path) {
    std::vector<RawWindRecord> recs;
    read_csv(path, "timestamp,speed_mps,direction_deg_from", [&](int line, const std::vector<std::string>& f) {
        RawWindRecord r;
        try {
            r.timestamp = parse_time(f[0]);
        } catch (const ValidationError& e) {
            throw ValidationError(where(path, line) + ": " + e.what());
        }
        r.speed = parse_number(f[1], path, line, "speed");
        r.direction_from = parse_number(f[2], path, line, "direction");
        try {
            r.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(where(path, line) + ": " + e.what());
        }
        recs.push_back(r);
    });
    if (recs.empty()) throw ValidationError(path.string() + ": no wind records");
    std::stable_sort(recs.begin(), recs.end(),
                     [](const RawWindRecord& a, const RawWindRecord& b) { return a.timestamp < b.timestamp; });
    std::vector<RawWindRecord> out;
    int dups = 0;
    for (const auto& r : recs) {
        if (!out.empty() && out.back().timestamp == r.timestamp) {
            out.back() = r;
            ++dups;
        } else {
            out.push_back(r);
        }
    }
    if (dups > 0) spdlog::warn("{}: {} duplicate timestamps, keeping the last row of each", path.string(), dups);
    return out;
}

void write_wind_csv(const fs::path& path, const std::vector<RawWindRecord>& records,
                    const std::string& config_hash) {
    auto out = open_out(path);
    out << "timestamp,speed_mps,direction_deg_from\n";
    for (const auto& r : records)
        out << format_time(r.timestamp) << ',' << format_double(r.speed) << ',' << format_double(r.direction_from)
            << '\n';
    if (!config_hash.empty()) hash_trailer(out, config_hash);
}

std::vector<SensorSpec> load_sensors(const fs::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    const auto list = root["sensors"];
    if (!list || !list.IsSequence()) throw ValidationError(path.string() + ": expected a 'sensors' list");
    std::vector<SensorSpec> out;
    try {
        for (const auto& n : list) {
            SensorSpec s;
            s.id = n["id"].as<std::string>();
            const auto kind = n["kind"].as<std::string>();
            s.location = {n["x_m"].as<double>(), n["y_m"].as<double>(), n["z_m"].as<double>(0.0)};
            s.snr = n["snr"].as<std::string>("") == "inf" ? std::numeric_limits<double>::infinity()
                                                         : n["snr"].as<double>();
            s.group = n["group"].as<std::string>("");
            if (kind == "dustfall_jar" || kind == "jar") {
                s.kind = DustfallJar{n["area_m2"].as<double>()};
            } else if (kind == "sampler") {
                s.kind = RealTimeSampler{parse_start_times(n, s.id), n["window_s"].as<double>()};
            } else {
                throw ValidationError("sensor '" + s.id + "': unknown kind '" + kind + "'");
            }
            s.validate();
            out.push_back(std::move(s));
        }
    } catch (const YAML::Exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    sensor_index(out);
    return out;
}

void write_sensors(const fs::path& path, const std::vector<SensorSpec>& sensors, const std::string& config_hash) {
    YAML::Emitter em;
    em.SetDoublePrecision(17);
    em << YAML::BeginMap << YAML::Key << "sensors" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : sensors) {
        em << YAML::BeginMap;
        em << YAML::Key << "id" << YAML::Value << s.id;
        em << YAML::Key << "kind" << YAML::Value << (s.is_jar() ? "dustfall_jar" : "sampler");
        em << YAML::Key << "x_m" << YAML::Value << s.location.x;
        em << YAML::Key << "y_m" << YAML::Value << s.location.y;
        em << YAML::Key << "z_m" << YAML::Value << s.location.z;
        if (std::isinf(s.snr))
            em << YAML::Key << "snr" << YAML::Value << "inf";
        else
            em << YAML::Key << "snr" << YAML::Value << s.snr;
        if (!s.group.empty()) em << YAML::Key << "group" << YAML::Value << s.group;
        if (s.is_jar()) {
            em << YAML::Key << "area_m2" << YAML::Value << std::get<DustfallJar>(s.kind).area;
        } else {
            const auto& smp = std::get<RealTimeSampler>(s.kind);
            em << YAML::Key << "window_s" << YAML::Value << smp.window;
            em << YAML::Key << "start_times" << YAML::Value << YAML::Flow << YAML::BeginSeq;
            for (double t : smp.start_times) em << format_time(t);
            em << YAML::EndSeq;
        }
        em << YAML::EndMap;
    }
    em << YAML::EndSeq << YAML::EndMap;
    auto out = open_out(path);
    out << em.c_str() << '\n';
    if (!config_hash.empty()) hash_trailer(out, config_hash);
}

MeasurementSet load_measurements(const fs::path& path, const std::vector<SensorSpec>& sensors) {
    MeasurementSet set;
    set.values = load_rows(path, "sensor_id,index,value", sensors, [](int, double) {});
    for (const auto& s : sensors)
        for (int l = 0; l < s.measurement_count(); ++l)
            set.entries.push_back({s.id, l, set.values[static_cast<Eigen::Index>(set.entries.size())], s.units()});
    return set;
}

void write_measurements(const fs::path& path, const MeasurementSet& set, const std::string& config_hash) {
    auto out = open_out(path);
    out << "sensor_id,index,value\n";
    for (const auto& e : set.entries) out << e.sensor_id << ',' << e.index << ',' << format_double(e.value) << '\n';
    hash_trailer(out, config_hash);
}

Eigen::VectorXd load_noise_variance(const fs::path& path, const std::vector<SensorSpec>& sensors) {
    return load_rows(path, "sensor_id,index,variance", sensors, [&](int row, double v) {
        if (!(v > 0.0)) throw ValidationError(path.string() + ": noise variance must be > 0 (row " +
                                              std::to_string(row) + ")");
    });
}

void write_noise_variance(const fs::path& path, const MeasurementSet& set, const std::string& config_hash) {
    auto out = open_out(path);
    out << "sensor_id,index,variance\n";
    for (std::size_t r = 0; r < set.entries.size(); ++r)
        out << set.entries[r].sensor_id << ',' << set.entries[r].index << ','
            << format_double(set.variance[static_cast<Eigen::Index>(r)]) << '\n';
    hash_trailer(out, config_hash);
}

void write_emissions(const fs::path& path, const EmissionTable& t) {
    const auto n_t = t.grid.count;
    if (t.mean.size() != static_cast<Eigen::Index>(t.source_ids.size()) * n_t || t.std.size() != t.mean.size())
        throw ValidationError("write_emissions: table dimensions disagree");
    auto out = open_out(path);
    out << "source_id,time,mean_kg_s,std_kg_s\n";
    for (std::size_t i = 0; i < t.source_ids.size(); ++i)
        for (int j = 0; j < n_t; ++j) {
            const auto c = static_cast<Eigen::Index>(i) * n_t + j;
            out << t.source_ids[i] << ',' << format_time(t.grid.time(j)) << ',' << format_double(t.mean[c]) << ','
                << (std::isnan(t.std[c]) ? std::string("nan") : format_double(t.std[c])) << '\n';
        }
    hash_trailer(out, t.config_hash);
}

EmissionTable load_emissions(const fs::path& path) {
    EmissionTable t;
    std::vector<double> times, mean, sd;
    read_csv(path, "source_id,time,mean_kg_s,std_kg_s", [&](int line, const std::vector<std::string>& f) {
        if (t.source_ids.empty() || t.source_ids.back() != f[0]) {
            if (std::find(t.source_ids.begin(), t.source_ids.end(), f[0]) != t.source_ids.end())
                throw ValidationError(where(path, line) + ": rows of source '" + f[0] + "' are not contiguous");
            t.source_ids.push_back(f[0]);
        }
        if (t.source_ids.size() == 1) times.push_back(parse_time(f[1]));
        mean.push_back(parse_number(f[2], path, line, "mean"));
        sd.push_back(f[3] == "nan" ? std::numeric_limits<double>::quiet_NaN() : parse_number(f[3], path, line, "std"));
    });
    const auto n_s = t.source_ids.size();
    if (n_s == 0 || times.size() < 2 || mean.size() != n_s * times.size())
        throw ValidationError(path.string() + ": emission table is not a full source x time grid");
    t.grid = {times[0], times[1] - times[0], static_cast<int>(times.size())};
    t.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    t.std = Eigen::Map<Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    t.config_hash = read_csv_hash(path);
    return t;
}

void write_wind_series(const fs::path& path, const WindSeries& wind, const std::string& config_hash) {
    auto out = open_out(path);
    out << "timestamp,ux_mps,uy_mps\n";
    for (int j = 0; j < wind.grid.count; ++j)
        out << format_time(wind.grid.time(j)) << ',' << format_double(wind.ux[j]) << ',' << format_double(wind.uy[j])
            << '\n';
    hash_trailer(out, config_hash);
}

WindSeries load_wind_series(const fs::path& path, std::string* config_hash) {
    std::vector<double> t;
    WindSeries w;
    read_csv(path, "timestamp,ux_mps,uy_mps", [&](int line, const std::vector<std::string>& f) {
        t.push_back(parse_time(f[0]));
        w.ux.push_back(parse_number(f[1], path, line, "ux"));
        w.uy.push_back(parse_number(f[2], path, line, "uy"));
    });
    if (t.size() < 2) throw ValidationError(path.string() + ": wind series needs at least two rows");
    w.grid = {t[0], t[1] - t[0], static_cast<int>(t.size())};
    w.validate();
    if (config_hash) *config_hash = read_csv_hash(path);
    return w;
}

void write_grid(const fs::path& csv, const fs::path& sidecar, const DepositionGrid& g, const LowRankFactors& f,
                double unit_scale, const std::string& unit, const std::string& config_hash) {
    auto out = open_out(csv);
    out << "x_m,y_m,mean_mg_m2,std_mg_m2\n";
    for (int iy = 0; iy < g.grid.ny; ++iy)
        for (int ix = 0; ix < g.grid.nx; ++ix) {
            const auto c = static_cast<Eigen::Index>(iy) * g.grid.nx + ix;
            out << format_double(g.grid.x(ix)) << ',' << format_double(g.grid.y(iy)) << ','
                << format_double(g.mean[c] * unit_scale) << ',' << format_double(g.std[c] * unit_scale) << '\n';
        }
    hash_trailer(out, config_hash);

    nlohmann::json j;
    j["grid"] = {{"x_min", g.grid.x_min}, {"x_max", g.grid.x_max}, {"y_min", g.grid.y_min},
                 {"y_max", g.grid.y_max}, {"nx", g.grid.nx},       {"ny", g.grid.ny}};
    j["order"] = "row-major by y then x";
    j["units"] = unit;
    j["n_e"] = f.rank();
    j["eigenvalues"] = std::vector<double>(f.values.data(), f.values.data() + f.values.size());
    j["config_hash"] = config_hash;
    write_json(sidecar, j);
}

void write_factors(const fs::path& path, const LowRankFactors& f, const std::string& config_hash) {
    auto out = open_out(path, std::ios::binary);
    const std::uint64_t n = static_cast<std::uint64_t>(f.vectors.rows());
    const std::uint64_t r = static_cast<std::uint64_t>(f.rank());
    const std::uint64_t h = config_hash.size();
    out.write(kFactorMagic, sizeof kFactorMagic);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&r), sizeof r);
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    out.write(config_hash.data(), static_cast<std::streamsize>(h));
    out.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(r * sizeof(double)));
    out.write(reinterpret_cast<const char*>(f.vectors.data()), static_cast<std::streamsize>(n * r * sizeof(double)));
}

LowRankFactors load_factors(const fs::path& path, std::string* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    char magic[sizeof kFactorMagic];
    std::uint64_t n = 0, r = 0, h = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&r), sizeof r);
    in.read(reinterpret_cast<char*>(&h), sizeof h);
    if (!in || std::memcmp(magic, kFactorMagic, sizeof magic) != 0 || r > n || h > 4096)
        throw ValidationError(path.string() + ": not a low-rank factor file");
    std::string hash(h, '\0');
    in.read(hash.data(), static_cast<std::streamsize>(h));
    LowRankFactors f;
    f.values.resize(static_cast<Eigen::Index>(r));
    f.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
    in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(r * sizeof(double)));
    in.read(reinterpret_cast<char*>(f.vectors.data()), static_cast<std::streamsize>(n * r * sizeof(double)));
    if (!in) throw ValidationError(path.string() + ": truncated factor file");
    if (config_hash) *config_hash = hash;
    return f;
}

std::string read_csv_hash(const fs::path& path) {
    std::ifstream in(path);
    std::string line, hash;
    const std::string key = "# config_hash=";
    while (std::getline(in, line))
        if (line.rfind(key, 0) == 0) hash = trim(line.substr(key.size()));
    return hash;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace plumeinv::app
