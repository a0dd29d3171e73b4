#include "plumeinv/observation.hpp"

#include <cmath>
#include <map>
#include <string>

#include "plumeinv/errors.hpp"
#include "plumeinv/random.hpp"

namespace plumeinv {

namespace {

constexpr std::uint32_t kMeasurementNoiseStream = 0x4E01;

const RealTimeSampler& sampler_of(const SensorSpec& s) { return std::get<RealTimeSampler>(s.kind); }

void check_index(const SensorSpec& sensor, int index) {
    if (index < 0 || index >= sensor.measurement_count())
        throw ValidationError("sensor '" + sensor.id + "': measurement index " +
                              std::to_string(index) + " out of range");
}

}  // namespace

int SensorSpec::measurement_count() const {
    return is_jar() ? 1 : static_cast<int>(sampler_of(*this).start_times.size());
}

std::string SensorSpec::noise_group() const {
    if (!group.empty()) return group;
    return is_jar() ? std::string("dustfall") : id;
}

void SensorSpec::validate() const {
    if (id.empty()) throw ValidationError("sensor with empty id");
    if (!(snr > 0.0)) throw ValidationError("sensor '" + id + "': snr must be > 0");
    if (!std::isfinite(location.x) || !std::isfinite(location.y) || !std::isfinite(location.z))
        throw ValidationError("sensor '" + id + "': non-finite location");
    if (is_jar()) {
        if (!(std::get<DustfallJar>(kind).area > 0.0))
            throw ValidationError("sensor '" + id + "': jar area must be > 0");
        return;
    }
    const auto& s = sampler_of(*this);
    if (!(s.window > 0.0)) throw ValidationError("sensor '" + id + "': window must be > 0");
    if (s.start_times.empty()) throw ValidationError("sensor '" + id + "': no start times");
    for (std::size_t l = 1; l < s.start_times.size(); ++l)
        if (!(s.start_times[l] > s.start_times[l - 1]))
            throw ValidationError("sensor '" + id + "': start times must be strictly increasing");
}

double window_weight(const SensorSpec& sensor, int index, double t, const TimeGrid& grid,
                     double w_dep) {
    check_index(sensor, index);
    const double s = t - grid.t0;
    if (sensor.is_jar()) {
        const double area = std::get<DustfallJar>(sensor.kind).area;
        return (s > 0.0 && s <= grid.span()) ? area * w_dep : 0.0;
    }
    const auto& smp = sampler_of(sensor);
    const double begin = smp.start_times[index] - grid.t0;
    return (s > begin && s <= begin + smp.window) ? 1.0 / smp.window : 0.0;
}

Eigen::MatrixXd assemble_M(const SensorSpec& sensor, const TimeGrid& grid, double w_dep) {
    sensor.validate();
    grid.validate();
    const int n_t = grid.count;
    const int m = sensor.measurement_count();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, n_t);
    if (sensor.is_jar()) {
        M.setConstant(std::get<DustfallJar>(sensor.kind).area * w_dep * grid.dt);
        return M;
    }
    const auto& smp = sampler_of(sensor);
    // Tolerance for window edges expressed in floating point epoch seconds.
    const double eps = 1e-9 * grid.dt;
    for (int l = 0; l < m; ++l) {
        const double begin = smp.start_times[l] - grid.t0;
        const double end = begin + smp.window;
        if (begin < -eps || end > grid.span() + eps)
            throw ValidationError("sensor '" + sensor.id + "': window " + std::to_string(l) +
                                  " lies outside the time grid");
        int covered = 0;
        for (int j = 0; j < n_t; ++j) {
            const double s = j * grid.dt;
            // Right limit of the indicator on (begin, end] at s.
            if (s >= begin - eps && s < end - eps) {
                M(l, j) = grid.dt / smp.window;
                ++covered;
            }
        }
        if (covered == 0)
            throw ValidationError("sensor '" + sensor.id + "': window " + std::to_string(l) +
                                  " captures no grid point; refine dt or align the window");
    }
    return M;
}

Eigen::MatrixXd SensorKernels::dense() const {
    const auto n_t = g.rows();
    const auto n_s = g.cols();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n_t, n_t * n_s);
    for (Eigen::Index i = 0; i < n_s; ++i)
        for (Eigen::Index j = 0; j < n_t; ++j) G(j, i * n_t + j) = g(j, i);
    return G;
}

std::vector<SensorKernels> assemble_G(std::span<const SensorSpec> sensors, const ForwardModel& model) {
    std::vector<Point3> points;
    points.reserve(sensors.size());
    for (const auto& s : sensors) points.push_back(s.location);
    const Eigen::MatrixXd table = kernels::kernel_table_parallel(model, points);
    const int n_t = model.step_count();
    const int n_s = model.source_count();
    std::vector<SensorKernels> out(sensors.size());
    for (std::size_t k = 0; k < sensors.size(); ++k) {
        out[k].g.resize(n_t, n_s);
        for (int i = 0; i < n_s; ++i)
            out[k].g.col(i) = table.row(static_cast<Eigen::Index>(k)).segment(i * n_t, n_t).transpose();
    }
    return out;
}

ObservationMap assemble_F(std::span<const SensorSpec> sensors, const ForwardModel& model,
                          Execution exec) {
    std::vector<Point3> points;
    points.reserve(sensors.size());
    int total = 0;
    for (const auto& s : sensors) {
        s.validate();
        points.push_back(s.location);
        total += s.measurement_count();
    }
    const Eigen::MatrixXd table = exec == Execution::parallel
                                      ? kernels::kernel_table_parallel(model, points)
                                      : kernels::kernel_table_serial(model, points);
    const int n_t = model.step_count();
    const int n_s = model.source_count();

    ObservationMap F;
    F.matrix.resize(total, model.unknowns());
    F.rows.reserve(total);
    int row = 0;
    for (std::size_t k = 0; k < sensors.size(); ++k) {
        const Eigen::MatrixXd M = assemble_M(sensors[k], model.grid(), model.particle().w_dep);
        const auto m = M.rows();
        for (int i = 0; i < n_s; ++i) {
            const auto kern = table.row(static_cast<Eigen::Index>(k)).segment(i * n_t, n_t).array();
            F.matrix.block(row, i * n_t, m, n_t) = M.array().rowwise() * kern;
        }
        for (int l = 0; l < m; ++l) F.rows.push_back({static_cast<int>(k), l});
        row += static_cast<int>(m);
    }
    return F;
}

void MeasurementSet::validate() const {
    if (values.size() != static_cast<Eigen::Index>(entries.size()) || variance.size() != values.size())
        throw ValidationError("measurement set: inconsistent sizes");
    for (Eigen::Index r = 0; r < values.size(); ++r) {
        if (!std::isfinite(values[r])) throw ValidationError("measurement set: non-finite value");
        if (!(variance[r] > 0.0) || !std::isfinite(variance[r]))
            throw ValidationError("measurement set: noise variance must be positive");
    }
}

Eigen::VectorXd noise_variance_from_signal(const ObservationMap& F,
                                           std::span<const SensorSpec> sensors,
                                           const Eigen::VectorXd& signal, double noise_floor) {
    if (signal.size() != F.size()) throw ValidationError("noise variance: signal length mismatch");
    if (!(noise_floor > 0.0)) throw ValidationError("noise variance: noise_floor must be > 0");
    struct Moments {
        double sum = 0.0;
        double sum_sq = 0.0;
        int n = 0;
    };
    std::map<std::string, Moments> groups;
    // Two passes (mean, then centred squares) for a stable population variance.
    for (Eigen::Index r = 0; r < F.size(); ++r) {
        auto& g = groups[sensors[F.rows[r].sensor].noise_group()];
        g.sum += signal[r];
        ++g.n;
    }
    for (Eigen::Index r = 0; r < F.size(); ++r) {
        auto& g = groups[sensors[F.rows[r].sensor].noise_group()];
        const double dev = signal[r] - g.sum / g.n;
        g.sum_sq += dev * dev;
    }
    Eigen::VectorXd var(F.size());
    const double floor_var = noise_floor * noise_floor;
    for (Eigen::Index r = 0; r < F.size(); ++r) {
        const auto& sensor = sensors[F.rows[r].sensor];
        const auto& g = groups[sensor.noise_group()];
        const double v = g.sum_sq / g.n / sensor.snr;
        var[r] = (v > 0.0 && std::isfinite(v)) ? v : floor_var;
    }
    return var;
}

MeasurementSet simulate_measurements(const ObservationMap& F, std::span<const SensorSpec> sensors,
                                     const Eigen::VectorXd& q, std::uint64_t seed,
                                     const NoiseOptions& opts) {
    if (q.size() != F.matrix.cols()) throw ValidationError("simulate_measurements: q has wrong length");
    if (!q.allFinite()) throw ValidationError("simulate_measurements: q must be finite");
    const Eigen::VectorXd clean = F.matrix * q;
    MeasurementSet out;
    out.variance = noise_variance_from_signal(F, sensors, clean, opts.noise_floor);
    out.values.resize(F.size());
    out.entries.reserve(F.size());
    const CounterRng rng(seed, kMeasurementNoiseStream);
    for (Eigen::Index r = 0; r < F.size(); ++r) {
        const auto& sensor = sensors[F.rows[r].sensor];
        double xi = 0.0;
        rng.normals(static_cast<std::uint64_t>(r), std::span<double>(&xi, 1));
        const double sd = std::isinf(sensor.snr) ? 0.0 : std::sqrt(out.variance[r]);
        out.values[r] = clean[r] + sd * xi;
        out.entries.push_back({sensor.id, F.rows[r].index, out.values[r], sensor.units()});
    }
    return out;
}

}  // namespace plumeinv
