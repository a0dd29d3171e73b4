#include "plumeinv/windprep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <tuple>

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include "plumeinv/errors.hpp"
#include "plumeinv/random.hpp"

namespace plumeinv {

namespace {

constexpr std::uint32_t kFoldStream = 0xCF01;

Eigen::MatrixXd se_kernel(std::span<const double> a, std::span<const double> b, const GPConfig& cfg) {
    Eigen::MatrixXd k(a.size(), b.size());
    const double inv = 1.0 / (2.0 * cfg.length_scale * cfg.length_scale);
    for (std::size_t j = 0; j < b.size(); ++j)
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[j];
            k(i, j) = cfg.signal_var * std::exp(-d * d * inv);
        }
    return k;
}

Eigen::VectorXd gp_weights(std::span<const double> times, std::span<const double> values,
                           const GPConfig& cfg) {
    Eigen::MatrixXd k = se_kernel(times, times, cfg);
    k.diagonal().array() += cfg.noise_var;
    const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    double jitter = 1e-10 * cfg.signal_var;
    for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
        if (attempt == 6)
            throw NumericalError("gp: kernel matrix is not positive definite even with jitter");
        spdlog::warn("gp: kernel matrix factorization failed, adding jitter {:.3g}", jitter);
        k.diagonal().array() += jitter;
        llt.compute(k);
        jitter *= 10.0;
    }
    return llt.solve(y);
}

double second_moment(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

void RawWindRecord::validate() const {
    if (!std::isfinite(timestamp)) throw ValidationError("wind record: non-finite timestamp");
    if (!(speed >= 0.0) || !std::isfinite(speed))
        throw ValidationError("wind record: speed must be finite and >= 0");
    if (!(direction_from >= 0.0 && direction_from < 360.0))
        throw ValidationError("wind record: direction must lie in [0, 360)");
}

WindComponents to_components(const RawWindRecord& r) {
    r.validate();
    const double rad = r.direction_from * std::numbers::pi / 180.0;
    return {-r.speed * std::sin(rad), -r.speed * std::cos(rad)};
}

void GPConfig::validate() const {
    if (!(signal_var > 0.0) || !(length_scale > 0.0) || !(noise_var > 0.0))
        throw ValidationError("gp config: signal variance, length scale and noise variance must be > 0");
}

void GPSearchSpace::validate() const {
    if (signal_var_factors.empty() || length_scales.empty() || noise_var_factors.empty())
        throw ValidationError("gp search space: every candidate list must be non-empty");
    for (const auto* list : {&signal_var_factors, &length_scales, &noise_var_factors})
        for (double v : *list)
            if (!(v > 0.0)) throw ValidationError("gp search space: candidates must be > 0");
    if (folds < 2) throw ValidationError("gp search space: folds must be >= 2");
    if (cv_max_points < 0) throw ValidationError("gp search space: cv_max_points must be >= 0");
}

std::vector<GPConfig> candidate_grid(std::span<const double> values, const GPSearchSpace& space) {
    space.validate();
    double scale = second_moment(values);
    if (!(scale > 0.0)) scale = 1.0;  // all-zero data: any scale gives the zero mean
    std::vector<GPConfig> out;
    for (double l : space.length_scales)
        for (double s : space.signal_var_factors)
            for (double n : space.noise_var_factors) out.push_back({s * scale, l, n * scale});
    return out;
}

Eigen::VectorXd gp_posterior_mean(std::span<const double> times, std::span<const double> values,
                                  const GPConfig& cfg, std::span<const double> query) {
    cfg.validate();
    if (times.size() != values.size()) throw ValidationError("gp: times and values differ in length");
    if (times.size() < 2) throw ValidationError("gp: at least two data points are required");
    const Eigen::VectorXd w = gp_weights(times, values, cfg);
    return se_kernel(query, times, cfg) * w;
}

CrossValidation cross_validate(std::span<const double> times, std::span<const double> values,
                               std::span<const GPConfig> candidates, std::uint64_t seed, int folds,
                               int max_points) {
    if (times.size() != values.size()) throw ValidationError("cv: times and values differ in length");
    if (candidates.empty()) throw ValidationError("cv: no candidates");
    if (times.size() < 2) throw ValidationError("cv: at least two data points are required");

    std::vector<double> t(times.begin(), times.end());
    std::vector<double> y(values.begin(), values.end());
    if (max_points > 0 && t.size() > static_cast<std::size_t>(max_points)) {
        const double stride = static_cast<double>(t.size()) / max_points;
        std::vector<double> ts, ys;
        for (int k = 0; k < max_points; ++k) {
            const auto idx = static_cast<std::size_t>(k * stride);
            ts.push_back(t[idx]);
            ys.push_back(y[idx]);
        }
        t.swap(ts);
        y.swap(ys);
    }
    const int n = static_cast<int>(t.size());
    int k_folds = folds;
    if (n < folds) {
        spdlog::info("cv: {} points is fewer than {} folds, using leave-one-out", n, folds);
        k_folds = n;
    }

    // Seeded Fisher-Yates permutation, then contiguous blocks as folds.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    PhiloxEngine eng(seed, kFoldStream);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[eng.below(static_cast<std::uint64_t>(i) + 1)]);
    std::vector<int> fold_start(k_folds + 1, 0);
    for (int f = 0; f < k_folds; ++f)
        fold_start[f + 1] = fold_start[f] + n / k_folds + (f < n % k_folds ? 1 : 0);

    CrossValidation cv;
    cv.folds = k_folds;
    cv.scores.resize(candidates.size());
    std::vector<double> train_t, train_y, test_t, test_y;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        double sse = 0.0;
        for (int f = 0; f < k_folds; ++f) {
            train_t.clear(); train_y.clear(); test_t.clear(); test_y.clear();
            for (int p = 0; p < n; ++p) {
                const int i = perm[p];
                const bool held = p >= fold_start[f] && p < fold_start[f + 1];
                (held ? test_t : train_t).push_back(t[i]);
                (held ? test_y : train_y).push_back(y[i]);
            }
            if (train_t.size() < 2) continue;
            const Eigen::VectorXd pred = gp_posterior_mean(train_t, train_y, candidates[c], test_t);
            for (std::size_t i = 0; i < test_y.size(); ++i) sse += (pred[i] - test_y[i]) * (pred[i] - test_y[i]);
        }
        cv.scores[c] = sse / n;
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c) {
        const double a = cv.scores[c], b = cv.scores[best];
        const bool tie = std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
        if ((!tie && a < b) || (tie && candidates[c].length_scale < candidates[best].length_scale))
            best = c;
    }
    cv.best = candidates[best];
    cv.best_score = cv.scores[best];
    return cv;
}

WindSeries regularize_wind(std::vector<RawWindRecord> records, const TimeGrid& grid,
                           const GPSearchSpace& space, std::uint64_t seed, WindFitReport* report,
                           const WindFitReport* reuse) {
    grid.validate();
    if (records.size() < 2) throw ValidationError("wind fit: at least two records are required");
    // A total order makes the fit independent of input order.
    std::sort(records.begin(), records.end(), [](const RawWindRecord& a, const RawWindRecord& b) {
        return std::tie(a.timestamp, a.speed, a.direction_from) <
               std::tie(b.timestamp, b.speed, b.direction_from);
    });
    std::vector<double> t, ux, uy;
    for (const auto& r : records) {
        const auto c = to_components(r);
        t.push_back(r.timestamp);
        ux.push_back(c.ux);
        uy.push_back(c.uy);
    }
    std::vector<double> query(grid.count);
    for (int j = 0; j < grid.count; ++j) query[j] = grid.time(j);

    WindFitReport local;
    local.extrapolated = query.front() < t.front() || query.back() > t.back();
    if (local.extrapolated)
        spdlog::warn("wind fit: time grid extends beyond the wind records; GP mean is extrapolated");

    const auto fit = [&](const std::vector<double>& v, CrossValidation& cv, const CrossValidation* given) {
        if (given) {
            cv = *given;
        } else {
            const auto candidates = candidate_grid(v, space);
            cv = cross_validate(t, v, candidates, seed, space.folds, space.cv_max_points);
        }
        spdlog::info("wind fit: s2={:.4g} l={:.0f}s sn2={:.4g} cv_mse={:.4g}", cv.best.signal_var,
                     cv.best.length_scale, cv.best.noise_var, cv.best_score);
        const Eigen::VectorXd m = gp_posterior_mean(t, v, cv.best, query);
        return std::vector<double>(m.data(), m.data() + m.size());
    };

    WindSeries out;
    out.grid = grid;
    out.ux = fit(ux, local.ux, reuse ? &reuse->ux : nullptr);
    out.uy = fit(uy, local.uy, reuse ? &reuse->uy : nullptr);
    out.validate();
    if (report) *report = local;
    return out;
}

}  // namespace plumeinv
