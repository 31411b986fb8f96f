#ifndef TAILPROB_MVN_HPP
#define TAILPROB_MVN_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "tailprob/rng.hpp"

namespace tailprob {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Parameters of a multivariate normal: mean, covariance, and a cached
// lower-triangular Cholesky factor with its log-determinant. Immutable
// after construction and safe to share across threads.
class MvnParams {
  public:
    MvnParams(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
        const auto d = mean_.size();
        if (cov_.rows() != d || cov_.cols() != d)
            throw std::invalid_argument("MvnParams: mean/cov dimension mismatch");
        if (d == 0) throw std::invalid_argument("MvnParams: empty dimension");

        const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
        if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw std::invalid_argument("MvnParams: covariance not symmetric");
        cov_ = 0.5 * (cov_ + cov_.transpose().eval());

        Eigen::LLT<Matrix> llt(cov_);
        if (llt.info() != Eigen::Success) {
            // Near-singular fits from correlated MCMC samples: retry with a ridge.
            const double ridge = 1e-10 * cov_.trace() / static_cast<double>(d);
            cov_ += ridge * Matrix::Identity(d, d);
            llt.compute(cov_);
            if (llt.info() != Eigen::Success)
                throw NumericalError("MvnParams: covariance not positive-definite");
        }
        chol_ = llt.matrixL();
        log_det_ = 2.0 * chol_.diagonal().array().log().sum();
        if (!std::isfinite(log_det_))
            throw NumericalError("MvnParams: non-finite log-determinant");
    }

    static MvnParams standard(Eigen::Index d) {
        return MvnParams(Vector::Zero(d), Matrix::Identity(d, d));
    }

    Eigen::Index dim() const { return mean_.size(); }
    const Vector& mean() const { return mean_; }
    const Matrix& cov() const { return cov_; }
    const Matrix& chol_lower() const { return chol_; }
    double log_det() const { return log_det_; }

    // ln f(y; theta) through the cached factor.
    double log_density(const Vector& y) const {
        if (y.size() != dim())
            throw std::invalid_argument("log_density: dimension mismatch");
        const Vector z = whiten(y);
        const double nrm = z.stableNorm();
        return -0.5 * static_cast<double>(dim()) * 1.8378770664093454836 -
               0.5 * log_det_ - 0.5 * nrm * nrm;
    }

    // z = L^{-1} (y - mean)
    Vector whiten(const Vector& y) const {
        return chol_.triangularView<Eigen::Lower>().solve(y - mean_);
    }

    // y = mean + L z
    Vector unwhiten(const Vector& z) const { return mean_ + chol_ * z; }

    Vector sample(Rng& rng) const {
        Vector z(dim());
        for (Eigen::Index i = 0; i < dim(); ++i) z[i] = rng.normal();
        return unwhiten(z);
    }

    // Precision matrix, solved from the cached factor.
    Matrix precision() const {
        Matrix identity = Matrix::Identity(dim(), dim());
        Matrix inv_l = chol_.triangularView<Eigen::Lower>().solve(identity);
        return inv_l.transpose() * inv_l;
    }

  private:
    Vector mean_;
    Matrix cov_;
    Matrix chol_;
    double log_det_ = 0.0;
};

inline double log_density(const MvnParams& theta, const Vector& y) {
    return theta.log_density(y);
}

}  // namespace tailprob

#endif
