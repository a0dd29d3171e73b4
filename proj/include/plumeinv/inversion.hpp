#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "plumeinv/nnls.hpp"
#include "plumeinv/prior.hpp"
#include "plumeinv/sampling.hpp"

namespace plumeinv {

// Whitened linear problem: rows of F and d divided by the noise std.
struct WhitenedSystem {
    Eigen::MatrixXd F;
    Eigen::VectorXd d;
};
WhitenedSystem whiten(const Eigen::MatrixXd& F, const Eigen::VectorXd& d, const Eigen::VectorXd& variance);

// A (N x N_s): replicates each source's scalar rate over its N_T slots.
Eigen::MatrixXd constant_expansion(int sources, int steps);

struct ConstantEstimate {
    Eigen::VectorXd rates;  // p_c, one per source
    Eigen::VectorXd q;      // A p_c
    NnlsResult solver;
};

ConstantEstimate mle_constant(const Eigen::MatrixXd& F, const Eigen::VectorXd& d,
                              const Eigen::VectorXd& variance, int sources, int steps,
                              const NnlsOptions& opts = {});

struct GaussianPosterior {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;    // diagonal of the covariance
    Eigen::MatrixXd covariance;  // empty when not requested
};

// Mean q_c + C F^T (Sigma + F C F^T)^{-1} (d - F q_c) and the matching
// covariance, via a Cholesky factor of the whitened M x M system.
GaussianPosterior gaussian_posterior(const Eigen::MatrixXd& F, const Eigen::VectorXd& d,
                                     const Eigen::VectorXd& variance, const CovarianceOperator& prior,
                                     const Eigen::VectorXd& prior_mean, bool with_covariance = true);

Eigen::VectorXd clip_positive(const Eigen::VectorXd& v);

enum class Link { clip, identity };

struct PositiveOptions {
    Link link = Link::clip;  // identity turns the stage into a linear-Gaussian check
    ChainHooks hooks;
    bool track_v_covariance = false;
};

struct PositivePosterior {
    Eigen::VectorXd mean;        // q_sp = h(v_PM)
    Eigen::MatrixXd covariance;  // C_sp
    Eigen::VectorXd v_mean;      // v_PM
    Eigen::MatrixXd v_covariance;  // C_v, when tracked
    Eigen::VectorXd h_mean;      // chain average of h(v)
    Eigen::VectorXd h_mcse;      // batch-means standard error of h_mean
    ChainSummary chain;
};

// Potential 0.5 ||Sigma^{-1/2}(F h(v) - d)||^2 with the sparse structure of F.
Potential data_misfit(const Eigen::MatrixXd& F, const Eigen::VectorXd& d, const Eigen::VectorXd& variance,
                      Link link = Link::clip);

PositivePosterior positive_posterior(const Eigen::MatrixXd& F, const Eigen::VectorXd& d,
                                     const Eigen::VectorXd& variance, const CovarianceOperator& prior,
                                     const Eigen::VectorXd& smooth_mean, const SamplerConfig& cfg,
                                     const PositiveOptions& opts = {});

}  // namespace plumeinv
