#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "plumeinv/prior.hpp"

namespace plumeinv {

struct SamplerConfig {
    double beta = 0.6;
    long steps = 100000;  // K
    double burn_in_fraction = 0.2;
    std::uint64_t seed = 1;
    // Covariances are accumulated on an evenly thinned subset of at most this
    // many post-burn-in states; means use every state.
    long max_covariance_samples = 4000;
    bool track_covariance = true;

    void validate() const;
    long burn_in() const;
};

// Running mean over every added state plus a covariance over a thinned
// subset, merged in batches (Chan et al. pairwise update). Batch means give
// the Monte-Carlo standard error of the mean.
class MomentAccumulator {
public:
    MomentAccumulator(Eigen::Index dim, long expected, long thin, bool track_covariance);

    void add(const Eigen::VectorXd& x);

    long count() const { return n_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    // Chain-average covariance (divides by the number of thinned samples).
    Eigen::MatrixXd covariance();
    // Mean of the thinned samples the covariance is centred on.
    Eigen::VectorXd thinned_mean();
    long thinned_count();
    Eigen::VectorXd mcse() const;

private:
    void flush();

    Eigen::Index dim_;
    long n_ = 0;
    long thin_;
    bool track_;
    Eigen::VectorXd mean_;
    // Thinned covariance state.
    Eigen::MatrixXd buffer_;
    long buffered_ = 0;
    long n_cov_ = 0;
    Eigen::VectorXd cov_mean_;
    Eigen::MatrixXd m2_;
    // Batch means.
    long batch_size_;
    Eigen::VectorXd batch_sum_;
    long in_batch_ = 0;
    std::vector<Eigen::VectorXd> batch_means_;
};

struct ChainSummary {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;  // empty unless tracked
    Eigen::VectorXd mcse;        // batch-means standard error of each mean entry
    double acceptance_rate = 0.0;
    long steps = 0;
    long accepted = 0;
    long nonfinite_rejections = 0;
    long burn_in = 0;
    long retained = 0;
    double beta = 0.0;
    double ess = 0.0;  // effective sample count of the potential trace
    double final_potential = 0.0;
};

using Potential = std::function<double(const Eigen::VectorXd&)>;

struct ChainHooks {
    // Called with every post-burn-in state (including repeats after rejections).
    std::function<void(long iteration, const Eigen::VectorXd& state)> observer;
    // Thinned dump: iteration, acceptance flag, potential, selected coordinates.
    std::ostream* dump = nullptr;
    long dump_every = 100;
    std::vector<Eigen::Index> dump_coordinates;
};

// pCN: v' = m + sqrt(1 - beta^2)(v - m) + beta w, w ~ N(0, C), accepted with
// probability min(1, exp(phi(v) - phi(v'))). Proposals and acceptance
// uniforms come from separate counter streams keyed by iteration.
ChainSummary pcn_chain(const Potential& phi, const Eigen::VectorXd& prior_mean,
                       const CovarianceOperator& prior, const SamplerConfig& cfg,
                       const ChainHooks& hooks = {});

// Initial-positive-sequence estimate of the effective sample size.
double effective_sample_size(const std::vector<double>& trace);

struct TuneOptions {
    double band_low = 0.25;
    double band_high = 0.35;
    long pilot_steps = 2000;
    int max_iterations = 12;
    std::uint64_t seed = 1;
};

struct TuneResult {
    double beta = 0.0;
    double acceptance = 0.0;
    bool in_band = false;
    std::vector<std::pair<double, double>> history;  // (beta, acceptance) per pilot
};

// Bisection on beta against pilot acceptance. Every pilot uses the same seed.
TuneResult tune_beta(const Potential& phi, const Eigen::VectorXd& prior_mean,
                     const CovarianceOperator& prior, const TuneOptions& opts = {});

}  // namespace plumeinv
