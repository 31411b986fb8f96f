#ifndef TAILPROB_CE_HPP
#define TAILPROB_CE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tailprob/samplers.hpp"

namespace tailprob {

// Closed-form Gaussian MLE from N samples (rows): column means and the
// 1/N covariance, plus a small ridge so downstream factorizations survive
// nearly collapsed sample clouds.
inline MvnParams fit_mle(const Matrix& samples) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index d = samples.cols();
    if (n < 2) throw std::invalid_argument("fit_mle: need at least two samples");
    if (!samples.allFinite()) throw std::invalid_argument("fit_mle: non-finite samples");

    const Vector mean = samples.colwise().mean();
    Matrix centered = samples.rowwise() - mean.transpose();
    Matrix cov = (centered.adjoint() * centered) / static_cast<double>(n);
    const double trace = cov.trace();
    const double ridge = 1e-10 * (trace > 0.0 ? trace / static_cast<double>(d) : 1.0);
    cov += ridge * Matrix::Identity(d, d);
    return MvnParams(mean, cov);
}

namespace detail {

struct LogWeightStats {
    double log_sum = kNegInf;       // LSE of member log-weights
    double log_sum_sq = kNegInf;    // LSE of doubled member log-weights
    double max_log_weight = kNegInf;
    std::size_t hits = 0;
};

inline TailEstimate estimate_from_weights(const LogWeightStats& st, std::size_t m,
                                          EstimateMethod method) {
    TailEstimate est;
    est.method = method;
    est.n_proposal_hits = st.hits;
    est.hit_fraction = static_cast<double>(st.hits) / static_cast<double>(m);
    est.max_log_weight = st.max_log_weight;
    if (st.hits == 0) return est;  // log10_p = -inf, rel_se = inf

    const double log_m = std::log(static_cast<double>(m));
    const double log_p = st.log_sum - log_m;
    est.log10_p = log_p / 2.302585092994045684;
    est.p = std::exp(log_p);
    est.effective_samples = std::exp(2.0 * st.log_sum - st.log_sum_sq);
    // rel SE of the IS mean from normalized weights:
    // sqrt(sum w_tilde^2 - 1/m), w_tilde = w_l / sum w.
    const double sum_sq_norm = std::exp(st.log_sum_sq - 2.0 * st.log_sum);
    est.rel_se = std::sqrt(std::max(0.0, sum_sq_norm - 1.0 / static_cast<double>(m)));
    return est;
}

}  // namespace detail

// Importance sampling step: m draws from the proposal, log-space weight
// f(y;theta0)/f(y;proposal) for draws inside the event region.
inline TailEstimate is_estimate(const TailProblem& problem, const MvnParams& proposal,
                                std::size_t m, Rng& rng) {
    if (m == 0) throw std::invalid_argument("is_estimate: m must be >= 1");
    if (proposal.dim() != problem.dim())
        throw std::invalid_argument("is_estimate: proposal dimension mismatch");

    std::vector<double> log_weights;
    log_weights.reserve(m / 8 + 16);
    detail::LogWeightStats st;
    for (std::size_t l = 0; l < m; ++l) {
        const Vector y = proposal.sample(rng);
        if (!problem.event_holds(y)) continue;
        const double lw = problem.theta0.log_density(y) - proposal.log_density(y);
        if (!std::isfinite(lw))
            throw NumericalError("is_estimate: non-finite importance weight");
        log_weights.push_back(lw);
        st.max_log_weight = std::max(st.max_log_weight, lw);
        ++st.hits;
    }
    if (!log_weights.empty()) {
        st.log_sum = log_sum_exp(log_weights);
        for (double& lw : log_weights) lw *= 2.0;
        st.log_sum_sq = log_sum_exp(log_weights);
    }
    TailEstimate est = detail::estimate_from_weights(st, m, EstimateMethod::mcmc_ce);
    est.proposal = proposal;
    return est;
}

// The two-phase estimator: MCMC draws from the optimal proposal (the null
// law truncated to the event), a Gaussian MLE fit of those draws, then
// plain importance sampling with the fitted proposal. The estimating step
// draws from an independent stream derived from the chain seed.
inline TailEstimate mcmc_ce(const TailProblem& problem, const ChainConfig& chain_cfg,
                            std::size_t m, Rng& rng) {
    const Matrix draws = run_chain(problem, chain_cfg);
    const MvnParams fitted = fit_mle(draws);
    TailEstimate est = is_estimate(problem, fitted, m, rng);
    est.method = EstimateMethod::mcmc_ce;
    return est;
}

inline TailEstimate mcmc_ce(const TailProblem& problem, const ChainConfig& chain_cfg,
                            std::size_t m) {
    Rng is_rng = Rng::derived(chain_cfg.seed, 1);
    return mcmc_ce(problem, chain_cfg, m, is_rng);
}

// Plain Monte Carlo proportion of event hits, with a binomial SE. Used as
// a cheap screen before bringing in the CE machinery.
inline TailEstimate pilot_mc(const TailProblem& problem, std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("pilot_mc: n must be >= 1");
    std::size_t hits = 0;
    for (std::size_t l = 0; l < n; ++l)
        if (problem.event_holds(problem.theta0.sample(rng))) ++hits;

    TailEstimate est;
    est.method = EstimateMethod::brute_mc;
    est.n_proposal_hits = hits;
    est.hit_fraction = static_cast<double>(hits) / static_cast<double>(n);
    if (hits == 0) return est;
    const double p_hat = est.hit_fraction;
    est.p = p_hat;
    est.log10_p = std::log10(p_hat);
    est.effective_samples = static_cast<double>(hits);
    est.rel_se = std::sqrt((1.0 - p_hat) / (p_hat * static_cast<double>(n)));
    est.max_log_weight = 0.0;
    return est;
}

// Multi-level CE: raise an intermediate threshold q_k through sample
// quantiles of the statistic under the current proposal, refitting the
// proposal by likelihood-ratio-weighted MLE at each level, until q_k
// reaches the target; finish with plain importance sampling. Known to
// degenerate in high dimension, which is reported as an error.
inline TailEstimate multilevel_ce(const TailProblem& problem, double rho, std::size_t n,
                                  std::size_t m, Rng& rng) {
    if (!(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("multilevel_ce: rho must be in (0,1)");
    if (n < 2 || m == 0) throw std::invalid_argument("multilevel_ce: n, m too small");

    const bool is_quad = problem.constraint.is_quad();
    const double q_target = is_quad ? problem.constraint.quad().q : 0.0;
    const auto level_stat = [&](const Vector& y) { return problem.statistic(y); };

    MvnParams theta_k = problem.theta0;
    double q_prev = kNegInf;
    int stalled = 0;
    bool reached = false;

    for (int iter = 0; iter < 100 && !reached; ++iter) {
        Matrix draws(static_cast<Eigen::Index>(n), problem.dim());
        std::vector<double> stats(n);
        for (std::size_t l = 0; l < n; ++l) {
            const Vector y = theta_k.sample(rng);
            draws.row(static_cast<Eigen::Index>(l)) = y;
            stats[l] = level_stat(y);
        }
        std::vector<double> sorted = stats;
        std::sort(sorted.begin(), sorted.end());
        const auto idx = static_cast<std::size_t>(
            std::floor((1.0 - rho) * static_cast<double>(n - 1)));
        double q_k = sorted[idx];
        if (q_k >= q_target) {
            q_k = q_target;
            reached = true;
        }

        if (!reached) {
            if (q_k <= q_prev) {
                if (++stalled >= 5)
                    throw NumericalError(
                        "multilevel_ce: multilevel degeneracy (threshold stalled)");
            } else {
                stalled = 0;
            }
            q_prev = q_k;
        }

        // Weighted MLE of Eq-type likelihood-ratio weights, in log space.
        std::vector<double> log_w;
        std::vector<Eigen::Index> members;
        for (std::size_t l = 0; l < n; ++l) {
            if (stats[l] < q_k) continue;
            const auto li = static_cast<Eigen::Index>(l);
            const Vector y = draws.row(li);
            log_w.push_back(problem.theta0.log_density(y) - theta_k.log_density(y));
            members.push_back(li);
        }
        if (members.size() < 2)
            throw NumericalError("multilevel_ce: multilevel degeneracy (no mass at level)");

        const double lse = log_sum_exp(log_w);
        Vector mean = Vector::Zero(problem.dim());
        for (std::size_t j = 0; j < members.size(); ++j)
            mean += std::exp(log_w[j] - lse) * draws.row(members[j]).transpose();
        Matrix cov = Matrix::Zero(problem.dim(), problem.dim());
        for (std::size_t j = 0; j < members.size(); ++j) {
            const Vector centered = draws.row(members[j]).transpose() - mean;
            cov += std::exp(log_w[j] - lse) * (centered * centered.transpose());
        }
        const double trace = cov.trace();
        cov += 1e-10 * (trace > 0.0 ? trace / static_cast<double>(problem.dim()) : 1.0) *
               Matrix::Identity(problem.dim(), problem.dim());
        theta_k = MvnParams(mean, cov);
    }
    if (!reached)
        throw NumericalError("multilevel_ce: iteration cap exceeded before reaching target");

    TailEstimate est = is_estimate(problem, theta_k, m, rng);
    est.method = EstimateMethod::multilevel_ce;
    return est;
}

}  // namespace tailprob

#endif
