#include "plumeinv/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <spdlog/spdlog.h>

#include "plumeinv/errors.hpp"
#include "plumeinv/random.hpp"

namespace plumeinv {

namespace {

constexpr std::uint32_t kProposalStream = 0x9C01;
constexpr std::uint32_t kAcceptStream = 0x9C02;
constexpr long kCovarianceBatch = 256;

}  // namespace

void SamplerConfig::validate() const {
    if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("sampler: beta must lie in (0, 1]");
    if (steps < 1) throw ValidationError("sampler: chain length must be >= 1");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
        throw ValidationError("sampler: burn-in fraction must lie in [0, 1)");
    if (max_covariance_samples < 1) throw ValidationError("sampler: max_covariance_samples must be >= 1");
}

long SamplerConfig::burn_in() const {
    return static_cast<long>(std::floor(burn_in_fraction * static_cast<double>(steps)));
}

MomentAccumulator::MomentAccumulator(Eigen::Index dim, long expected, long thin, bool track_covariance)
    : dim_(dim),
      thin_(std::max(1L, thin)),
      track_(track_covariance),
      mean_(Eigen::VectorXd::Zero(dim)),
      batch_size_(std::max(1L, static_cast<long>(std::sqrt(static_cast<double>(std::max(1L, expected)))))),
      batch_sum_(Eigen::VectorXd::Zero(dim)) {
    if (track_) {
        buffer_.resize(dim, kCovarianceBatch);
        cov_mean_ = Eigen::VectorXd::Zero(dim);
        m2_ = Eigen::MatrixXd::Zero(dim, dim);
    }
}

void MomentAccumulator::add(const Eigen::VectorXd& x) {
    if (x.size() != dim_) throw ValidationError("moment accumulator: dimension mismatch");
    if (track_ && n_ % thin_ == 0) {
        buffer_.col(buffered_++) = x;
        if (buffered_ == kCovarianceBatch) flush();
    }
    ++n_;
    mean_ += (x - mean_) / static_cast<double>(n_);
    batch_sum_ += x;
    if (++in_batch_ == batch_size_) {
        batch_means_.push_back(batch_sum_ / static_cast<double>(batch_size_));
        batch_sum_.setZero();
        in_batch_ = 0;
    }
}

void MomentAccumulator::flush() {
    if (buffered_ == 0) return;
    const auto block = buffer_.leftCols(buffered_);
    const Eigen::VectorXd mb = block.rowwise().mean();
    const Eigen::MatrixXd centred = block.colwise() - mb;
    const double na = static_cast<double>(n_cov_);
    const double nb = static_cast<double>(buffered_);
    const double n = na + nb;
    const Eigen::VectorXd delta = mb - cov_mean_;
    m2_.selfadjointView<Eigen::Lower>().rankUpdate(centred);
    m2_.selfadjointView<Eigen::Lower>().rankUpdate(delta, na * nb / n);
    cov_mean_ += delta * (nb / n);
    n_cov_ += buffered_;
    buffered_ = 0;
}

Eigen::MatrixXd MomentAccumulator::covariance() {
    if (!track_) return {};
    flush();
    if (n_cov_ == 0) return Eigen::MatrixXd::Zero(dim_, dim_);
    Eigen::MatrixXd c = m2_.selfadjointView<Eigen::Lower>();
    return c / static_cast<double>(n_cov_);
}

Eigen::VectorXd MomentAccumulator::thinned_mean() {
    flush();
    return cov_mean_;
}

long MomentAccumulator::thinned_count() {
    flush();
    return n_cov_;
}

Eigen::VectorXd MomentAccumulator::mcse() const {
    const auto nb = static_cast<long>(batch_means_.size());
    if (nb < 2) return Eigen::VectorXd::Constant(dim_, std::numeric_limits<double>::quiet_NaN());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim_);
    for (const auto& b : batch_means_) m += b;
    m /= static_cast<double>(nb);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim_);
    for (const auto& b : batch_means_) var += (b - m).cwiseAbs2();
    var /= static_cast<double>(nb - 1);
    return (var / static_cast<double>(nb)).cwiseSqrt();
}

double effective_sample_size(const std::vector<double>& trace) {
    const auto n = static_cast<long>(trace.size());
    if (n < 4) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : trace) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> c(trace.size());
    for (long i = 0; i < n; ++i) c[i] = trace[i] - mean;
    const auto autocov = [&](long lag) {
        double s = 0.0;
        for (long i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
        return s / static_cast<double>(n);
    };
    const double g0 = autocov(0);
    if (!(g0 > 0.0)) return static_cast<double>(n);
    double sum = 0.0;
    for (long m = 0; 2 * m + 1 < n; ++m) {
        const double pair = autocov(2 * m) + autocov(2 * m + 1);
        if (!(pair > 0.0)) break;
        sum += pair;
    }
    const double tau = std::max(-1.0 + 2.0 * sum / g0, 1.0 / static_cast<double>(n));
    return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

ChainSummary pcn_chain(const Potential& phi, const Eigen::VectorXd& prior_mean,
                       const CovarianceOperator& prior, const SamplerConfig& cfg,
                       const ChainHooks& hooks) {
    cfg.validate();
    const Eigen::Index n = prior.dim();
    if (prior_mean.size() != n) throw ValidationError("pcn: prior mean has wrong length");

    const CounterRng proposals(cfg.seed, kProposalStream);
    const CounterRng uniforms(cfg.seed, kAcceptStream);
    const double shrink = std::sqrt(1.0 - cfg.beta * cfg.beta);

    Eigen::VectorXd xi(n);
    proposals.normals(0, std::span<double>(xi.data(), static_cast<std::size_t>(n)));
    Eigen::VectorXd v = prior_mean + prior.sample(xi);
    double phi_v = phi(v);
    if (!std::isfinite(phi_v)) throw NumericalError("pcn: potential is not finite at the initial state");

    ChainSummary out;
    out.steps = cfg.steps;
    out.beta = cfg.beta;
    out.burn_in = cfg.burn_in();
    out.retained = cfg.steps - out.burn_in;
    const long thin = (out.retained + cfg.max_covariance_samples - 1) / cfg.max_covariance_samples;
    MomentAccumulator acc(n, out.retained, thin, cfg.track_covariance);
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(out.retained));

    if (hooks.dump) {
        *hooks.dump << "iteration,accepted,potential";
        for (auto c : hooks.dump_coordinates) *hooks.dump << ",v" << c;
        *hooks.dump << '\n';
    }

    Eigen::VectorXd proposal(n);
    for (long k = 1; k <= cfg.steps; ++k) {
        proposals.normals(static_cast<std::uint64_t>(k), std::span<double>(xi.data(), static_cast<std::size_t>(n)));
        proposal.noalias() = prior_mean + shrink * (v - prior_mean) + cfg.beta * prior.sample(xi);
        const double phi_p = phi(proposal);
        bool accept = false;
        if (!std::isfinite(phi_p)) {
            ++out.nonfinite_rejections;
        } else {
            const double log_a = phi_v - phi_p;
            accept = log_a >= 0.0 || uniforms.uniform(static_cast<std::uint64_t>(k)) < std::exp(log_a);
        }
        if (accept) {
            v.swap(proposal);
            phi_v = phi_p;
            ++out.accepted;
        }
        if (k > out.burn_in) {
            acc.add(v);
            trace.push_back(phi_v);
            if (hooks.observer) hooks.observer(k, v);
        }
        if (hooks.dump && k % std::max(1L, hooks.dump_every) == 0) {
            *hooks.dump << k << ',' << (accept ? 1 : 0) << ',' << phi_v;
            for (auto c : hooks.dump_coordinates) *hooks.dump << ',' << v[c];
            *hooks.dump << '\n';
        }
    }
    if (out.nonfinite_rejections > 0)
        spdlog::warn("pcn: {} proposals rejected for a non-finite potential", out.nonfinite_rejections);

    out.acceptance_rate = static_cast<double>(out.accepted) / static_cast<double>(cfg.steps);
    out.final_potential = phi_v;
    out.mean = acc.mean();
    out.mcse = acc.mcse();
    if (cfg.track_covariance) out.covariance = acc.covariance();
    out.ess = effective_sample_size(trace);
    return out;
}

TuneResult tune_beta(const Potential& phi, const Eigen::VectorXd& prior_mean,
                     const CovarianceOperator& prior, const TuneOptions& opts) {
    if (opts.pilot_steps < 1000) throw ValidationError("tune_beta: pilot length must be >= 1000");
    if (!(opts.band_low < opts.band_high)) throw ValidationError("tune_beta: empty acceptance band");
    SamplerConfig cfg;
    cfg.steps = opts.pilot_steps;
    cfg.burn_in_fraction = 0.0;
    cfg.seed = opts.seed;
    cfg.track_covariance = false;

    TuneResult res;
    double lo = 0.0, hi = 1.0, beta = 0.5;
    double best_gap = std::numeric_limits<double>::infinity();
    bool all_high = true;
    for (int it = 0; it < opts.max_iterations; ++it) {
        cfg.beta = beta;
        const double a = pcn_chain(phi, prior_mean, prior, cfg).acceptance_rate;
        res.history.emplace_back(beta, a);
        spdlog::debug("tune_beta: beta={:.5f} acceptance={:.3f}", beta, a);
        const double gap = a > opts.band_high ? a - opts.band_high : (a < opts.band_low ? opts.band_low - a : 0.0);
        if (gap < best_gap) {
            best_gap = gap;
            res.beta = beta;
            res.acceptance = a;
        }
        if (gap == 0.0) {
            res.in_band = true;
            return res;
        }
        // Larger steps lower the acceptance rate.
        if (a > opts.band_high) {
            lo = beta;
        } else {
            all_high = false;
            hi = beta;
        }
        beta = 0.5 * (lo + hi);
    }
    if (all_high) {
        spdlog::warn("tune_beta: acceptance band unreachable, acceptance stays above {} for every beta; using beta=1",
                     opts.band_high);
        res.beta = 1.0;
    } else {
        spdlog::warn("tune_beta: acceptance band not reached; closest beta={:.4f} (acceptance {:.3f})", res.beta,
                     res.acceptance);
    }
    return res;
}

}  // namespace plumeinv
