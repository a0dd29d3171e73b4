#include "plumeinv/inversion.hpp"

#include <cmath>
#include <memory>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <spdlog/spdlog.h>

#include "plumeinv/errors.hpp"

namespace plumeinv {

WhitenedSystem whiten(const Eigen::MatrixXd& F, const Eigen::VectorXd& d, const Eigen::VectorXd& variance) {
    if (F.rows() != d.size() || variance.size() != d.size())
        throw ValidationError("inversion: F, d and the noise variance have inconsistent sizes");
    if ((variance.array() <= 0.0).any() || !variance.allFinite())
        throw ValidationError("inversion: noise variance must be positive and finite");
    const Eigen::VectorXd inv_sd = variance.cwiseSqrt().cwiseInverse();
    return {inv_sd.asDiagonal() * F, d.cwiseProduct(inv_sd)};
}

Eigen::MatrixXd constant_expansion(int sources, int steps) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sources) * steps, sources);
    for (int i = 0; i < sources; ++i) a.block(static_cast<Eigen::Index>(i) * steps, i, steps, 1).setOnes();
    return a;
}

ConstantEstimate mle_constant(const Eigen::MatrixXd& F, const Eigen::VectorXd& d,
                              const Eigen::VectorXd& variance, int sources, int steps,
                              const NnlsOptions& opts) {
    if (F.cols() != static_cast<Eigen::Index>(sources) * steps)
        throw ValidationError("mle_constant: F has the wrong number of columns");
    const auto w = whiten(F, d, variance);
    // F A sums each source's block of columns.
    Eigen::MatrixXd fa(F.rows(), sources);
    for (int i = 0; i < sources; ++i) fa.col(i) = w.F.middleCols(static_cast<Eigen::Index>(i) * steps, steps).rowwise().sum();
    ConstantEstimate out;
    out.solver = nnls(fa, w.d, opts);
    out.rates = out.solver.x;
    out.q.resize(F.cols());
    for (int i = 0; i < sources; ++i) out.q.segment(static_cast<Eigen::Index>(i) * steps, steps).setConstant(out.rates[i]);
    return out;
}

GaussianPosterior gaussian_posterior(const Eigen::MatrixXd& F, const Eigen::VectorXd& d,
                                     const Eigen::VectorXd& variance, const CovarianceOperator& prior,
                                     const Eigen::VectorXd& prior_mean, bool with_covariance) {
    if (F.cols() != prior.dim() || prior_mean.size() != prior.dim())
        throw ValidationError("gaussian_posterior: prior and F disagree on the number of unknowns");
    const auto w = whiten(F, d, variance);
    const Eigen::MatrixXd B = prior.apply(w.F.transpose());  // C F~^T, N x M
    Eigen::MatrixXd S = w.F * B;
    S.diagonal().array() += 1.0;
    S = 0.5 * (S + S.transpose());
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) {
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues();
        throw NumericalError("gaussian_posterior: innovation matrix is not positive definite (eigenvalues in [" +
                             std::to_string(ev.minCoeff()) + ", " + std::to_string(ev.maxCoeff()) +
                             "], condition " + std::to_string(ev.maxCoeff() / std::abs(ev.minCoeff())) + ")");
    }
    GaussianPosterior out;
    out.mean = prior_mean + B * llt.solve(w.d - w.F * prior_mean);
    // G = B R^{-T} with S = R R^T, so G G^T = B S^{-1} B^T.
    const Eigen::MatrixXd Gt = llt.matrixL().solve(B.transpose());
    out.variance = prior.diagonal() - Gt.colwise().squaredNorm().transpose();
    if (with_covariance) {
        out.covariance = prior.dense();
        out.covariance.selfadjointView<Eigen::Lower>().rankUpdate(Gt.transpose(), -1.0);
        out.covariance.triangularView<Eigen::StrictlyUpper>() = out.covariance.transpose();
    }
    return out;
}

Eigen::VectorXd clip_positive(const Eigen::VectorXd& v) { return v.cwiseMax(0.0); }

Potential data_misfit(const Eigen::MatrixXd& F, const Eigen::VectorXd& d, const Eigen::VectorXd& variance,
                      Link link) {
    const auto w = whiten(F, d, variance);
    auto sparse = std::make_shared<Eigen::SparseMatrix<double>>(w.F.sparseView(0.0, 0.0));
    auto target = std::make_shared<Eigen::VectorXd>(w.d);
    return [sparse, target, link](const Eigen::VectorXd& v) {
        const Eigen::VectorXd r = link == Link::clip ? Eigen::VectorXd(*sparse * v.cwiseMax(0.0) - *target)
                                                     : Eigen::VectorXd(*sparse * v - *target);
        return 0.5 * r.squaredNorm();
    };
}

PositivePosterior positive_posterior(const Eigen::MatrixXd& F, const Eigen::VectorXd& d,
                                     const Eigen::VectorXd& variance, const CovarianceOperator& prior,
                                     const Eigen::VectorXd& smooth_mean, const SamplerConfig& cfg,
                                     const PositiveOptions& opts) {
    cfg.validate();
    const auto h = [&](const Eigen::VectorXd& v) {
        return opts.link == Link::clip ? clip_positive(v) : v;
    };
    const Eigen::VectorXd m = h(smooth_mean);
    const Potential phi = data_misfit(F, d, variance, opts.link);

    const long retained = cfg.steps - cfg.burn_in();
    const long thin = (retained + cfg.max_covariance_samples - 1) / cfg.max_covariance_samples;
    MomentAccumulator h_acc(prior.dim(), retained, thin, cfg.track_covariance);

    SamplerConfig chain_cfg = cfg;
    chain_cfg.track_covariance = opts.track_v_covariance;
    ChainHooks hooks = opts.hooks;
    hooks.observer = [&](long k, const Eigen::VectorXd& v) {
        h_acc.add(h(v));
        if (opts.hooks.observer) opts.hooks.observer(k, v);
    };

    PositivePosterior out;
    out.chain = pcn_chain(phi, m, prior, chain_cfg, hooks);
    out.v_mean = out.chain.mean;
    out.v_covariance = out.chain.covariance;
    out.mean = h(out.v_mean);
    out.h_mean = h_acc.mean();
    out.h_mcse = h_acc.mcse();
    if (cfg.track_covariance) {
        // Average of (h(v) - q_sp)(h(v) - q_sp)^T = Cov(h) + (mu_h - q_sp)(mu_h - q_sp)^T.
        out.covariance = h_acc.covariance();
        const Eigen::VectorXd shift = h_acc.thinned_mean() - out.mean;
        out.covariance.noalias() += shift * shift.transpose();
    }
    const double a = out.chain.acceptance_rate;
    spdlog::info("positive stage: K={} beta={} acceptance={:.3f} ess={:.0f}", cfg.steps, cfg.beta, a,
                 out.chain.ess);
    if (a < 0.1 || a > 0.6)
        spdlog::warn("positive stage: acceptance rate {:.3f} is outside [0.1, 0.6]; consider retuning beta", a);
    return out;
}

}  // namespace plumeinv
