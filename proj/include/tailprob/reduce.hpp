#ifndef TAILPROB_REDUCE_HPP
#define TAILPROB_REDUCE_HPP

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tailprob/problem.hpp"

namespace tailprob {

// Result of reducing a Gram-matrix quadratic statistic to canonical form.
// lambdas are the positive eigenvalues of the raw Gram form (Z Z^T, or
// Z W Z^T when weights are given); q_obs carries the 1/n factor when
// requested, and statistic_scale records that factor so that
// T(Y) = statistic_scale * sum_i lambdas_i Y_i^2.
struct QuadformReduction {
    Vector lambdas;          // strictly positive, descending
    double q_obs = 0.0;      // observed statistic
    double statistic_scale = 1.0;

    TailProblem to_problem() const {
        if (!(q_obs > 0.0))
            throw std::invalid_argument("QuadformReduction: observed statistic must be > 0");
        const Vector scaled = statistic_scale * lambdas;
        return TailProblem(MvnParams::standard(lambdas.size()),
                           Constraint::quad_exterior(scaled, q_obs));
    }
};

// Reduce the statistic r^T Z Z^T r (optionally weighted and 1/n-scaled) to
// a weighted sum of independent squared standard normals. Eigenvalues come
// from the smaller Gram matrix; numerically null directions are dropped.
inline QuadformReduction quadform_from_matrices(const Matrix& features, const Vector& residual,
                                                const std::optional<Vector>& weights,
                                                bool scale_by_n) {
    const Eigen::Index n = features.rows();
    const Eigen::Index k = features.cols();
    if (residual.size() != n)
        throw std::invalid_argument("quadform_from_matrices: residual length != feature rows");
    if (n == 0 || k == 0) throw std::invalid_argument("quadform_from_matrices: empty matrix");
    if (weights) {
        if (weights->size() != k)
            throw std::invalid_argument("quadform_from_matrices: weight length != feature cols");
        if ((weights->array() <= 0.0).any())
            throw std::invalid_argument("quadform_from_matrices: weights must be positive");
    }

    Matrix weighted = features;  // Z sqrt(W)
    if (weights) weighted = features * weights->cwiseSqrt().asDiagonal();

    Matrix gram = (k <= n) ? Matrix(weighted.transpose() * weighted)
                           : Matrix(weighted * weighted.transpose());
    gram = 0.5 * (gram + gram.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success)
        throw NumericalError("quadform_from_matrices: eigendecomposition failed");

    const Vector all = eig.eigenvalues();  // ascending
    const double lambda_max = all[all.size() - 1];
    if (!(lambda_max > 0.0))
        throw NumericalError("quadform_from_matrices: degenerate statistic");
    std::vector<double> kept;
    for (Eigen::Index i = all.size() - 1; i >= 0; --i)
        if (all[i] > 1e-12 * lambda_max) kept.push_back(all[i]);
    if (kept.empty()) throw NumericalError("quadform_from_matrices: degenerate statistic");

    QuadformReduction red;
    red.lambdas = Eigen::Map<const Vector>(kept.data(), static_cast<Eigen::Index>(kept.size()));
    red.statistic_scale = scale_by_n ? 1.0 / static_cast<double>(n) : 1.0;
    const Vector projected = weighted.transpose() * residual;
    red.q_obs = red.statistic_scale * projected.squaredNorm();
    return red;
}

// Tail problems for the ratio statistic y1/y2 >= q with group means
// y1 ~ N(mu, sigma^2/n1), y2 ~ N(mu, sigma^2/n2). Single-orthant mode
// conditions on positive means (C1 only); two-orthant mode adds the
// mirrored system C2 = -C1 and the caller sums the two estimates.
inline std::vector<TailProblem> ratio_to_linear(double q_ratio, std::size_t n1, std::size_t n2,
                                                double mu, double sigma, bool two_sided_orthants) {
    if (!(sigma > 0.0)) throw std::invalid_argument("ratio_to_linear: sigma must be > 0");
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("ratio_to_linear: group sizes must be >= 1");
    if (!(q_ratio >= 1.0)) throw std::invalid_argument("ratio_to_linear: q must be >= 1");

    Vector mean(2);
    mean << mu, mu;
    Matrix cov = Matrix::Zero(2, 2);
    cov(0, 0) = sigma * sigma / static_cast<double>(n1);
    cov(1, 1) = sigma * sigma / static_cast<double>(n2);
    MvnParams theta0(mean, cov);

    Matrix c1(2, 2);
    c1 << 0.0, 1.0, 1.0, -q_ratio;

    // Feasible anchor (y1*, y1*/(2q)): margins y1*/(2q) and y1*/2 stay well
    // away from zero in floating point even for q ~ 1e100, where the naive
    // (q+1, 1) collapses onto the boundary.
    const double y1_star = std::abs(mu) + sigma / std::sqrt(static_cast<double>(n1));
    Vector anchor(2);
    anchor << y1_star, y1_star / (2.0 * q_ratio);

    std::vector<TailProblem> problems;
    problems.emplace_back(theta0, Constraint::linear_system(c1, anchor));
    if (two_sided_orthants)
        problems.emplace_back(theta0, Constraint::linear_system(Matrix(-c1), Vector(-anchor)));
    return problems;
}

// Grand mean and pooled variance across two samples; a convenience for
// callers that estimate the null (mu, sigma) from data.
inline std::pair<double, double> pooled_moments(const std::vector<double>& x1,
                                                const std::vector<double>& x2) {
    const std::size_t n1 = x1.size(), n2 = x2.size();
    if (n1 + n2 < 2) throw std::invalid_argument("pooled_moments: need at least two values");
    double sum = 0.0;
    for (double v : x1) sum += v;
    for (double v : x2) sum += v;
    const double grand = sum / static_cast<double>(n1 + n2);
    double ss = 0.0;
    for (double v : x1) ss += (v - grand) * (v - grand);
    for (double v : x2) ss += (v - grand) * (v - grand);
    return {grand, ss / static_cast<double>(n1 + n2 - 1)};
}

}  // namespace tailprob

#endif
