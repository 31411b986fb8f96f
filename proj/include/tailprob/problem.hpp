#ifndef TAILPROB_PROBLEM_HPP
#define TAILPROB_PROBLEM_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <variant>

#include "tailprob/mvn.hpp"

namespace tailprob {

// {y : sum_i lambda_i y_i^2 >= q}. Membership is evaluated through the
// cached unit_weights = lambda/q against a threshold of 1, so that jointly
// rescaling (lambda, q) leaves every downstream computation bit-identical.
struct QuadExterior {
    Vector lambdas;
    double q = 0.0;
    Vector unit_weights;
};

// {y : (C y)_i > 0 for all i}. Zero rows means the whole space.
struct LinearSystem {
    Matrix c_matrix;
};

class Constraint {
  public:
    static Constraint quad_exterior(Vector lambdas, double q) {
        Vector fp = default_quad_point(lambdas, q);
        return quad_exterior(std::move(lambdas), q, std::move(fp));
    }

    static Constraint quad_exterior(Vector lambdas, double q, Vector feasible) {
        if (lambdas.size() == 0) throw std::invalid_argument("QuadExterior: empty lambdas");
        if (!(q > 0.0) || !std::isfinite(q)) throw std::invalid_argument("QuadExterior: q must be > 0");
        if ((lambdas.array() <= 0.0).any() || !lambdas.allFinite())
            throw std::invalid_argument("QuadExterior: lambdas must be positive");
        QuadExterior body{std::move(lambdas), q, Vector()};
        body.unit_weights = body.lambdas / q;
        return Constraint(std::move(body), std::move(feasible));
    }

    static Constraint linear_system(Matrix c, Vector feasible) {
        if (c.cols() == 0) throw std::invalid_argument("LinearSystem: zero dimension");
        if (!c.allFinite()) throw std::invalid_argument("LinearSystem: non-finite entries");
        return Constraint(LinearSystem{std::move(c)}, std::move(feasible));
    }

    // Trivial constraint covering the whole space (a LinearSystem with no rows).
    static Constraint whole_space(Eigen::Index d) {
        return Constraint(LinearSystem{Matrix(0, d)}, Vector::Zero(d));
    }

    Eigen::Index dim() const {
        if (auto* qe = std::get_if<QuadExterior>(&body_)) return qe->lambdas.size();
        return std::get<LinearSystem>(body_).c_matrix.cols();
    }

    bool is_quad() const { return std::holds_alternative<QuadExterior>(body_); }
    const QuadExterior& quad() const { return std::get<QuadExterior>(body_); }
    const LinearSystem& linear() const { return std::get<LinearSystem>(body_); }
    const Vector& feasible_point() const { return feasible_; }

    // T(y): the weighted sum of squares for QuadExterior, the smallest
    // constraint margin min_i (C y)_i for LinearSystem.
    double statistic(const Vector& y) const {
        if (y.size() != dim()) throw std::invalid_argument("statistic: dimension mismatch");
        if (auto* qe = std::get_if<QuadExterior>(&body_))
            return (qe->lambdas.array() * y.array().square()).sum();
        const auto& ls = std::get<LinearSystem>(body_);
        if (ls.c_matrix.rows() == 0) return kInf;
        return (ls.c_matrix * y).minCoeff();
    }

    // Event membership, evaluated in the scale-canonical form.
    bool contains(const Vector& y) const {
        if (y.size() != dim()) throw std::invalid_argument("contains: dimension mismatch");
        if (auto* qe = std::get_if<QuadExterior>(&body_))
            return (qe->unit_weights.array() * y.array().square()).sum() >= 1.0;
        const auto& ls = std::get<LinearSystem>(body_);
        if (ls.c_matrix.rows() == 0) return true;
        return ((ls.c_matrix * y).array() > 0.0).all();
    }

  private:
    Constraint(std::variant<QuadExterior, LinearSystem> body, Vector feasible)
        : body_(std::move(body)), feasible_(std::move(feasible)) {
        if (feasible_.size() != dim())
            throw std::invalid_argument("Constraint: feasible point dimension mismatch");
        if (!strictly_feasible(feasible_))
            throw std::invalid_argument("Constraint: feasible point is not strictly inside");
    }

    bool strictly_feasible(const Vector& y) const {
        if (auto* qe = std::get_if<QuadExterior>(&body_))
            return (qe->unit_weights.array() * y.array().square()).sum() > 1.0;
        const auto& ls = std::get<LinearSystem>(body_);
        if (ls.c_matrix.rows() == 0) return true;
        return ((ls.c_matrix * y).array() > 0.0).all();
    }

    // 1.01 * sqrt(q / lambda_k) along the axis of the largest eigenvalue:
    // the highest-density point set just outside the boundary.
    static Vector default_quad_point(const Vector& lambdas, double q) {
        Eigen::Index k = 0;
        lambdas.maxCoeff(&k);
        Vector y = Vector::Zero(lambdas.size());
        y[k] = 1.01 * std::sqrt(q / lambdas[k]);
        return y;
    }

    std::variant<QuadExterior, LinearSystem> body_;
    Vector feasible_;
};

// A canonical estimation problem: Pr[ T(Y) >= q ] with Y ~ theta0 and the
// event region described by the constraint.
struct TailProblem {
    MvnParams theta0;
    Constraint constraint;

    TailProblem(MvnParams t0, Constraint c) : theta0(std::move(t0)), constraint(std::move(c)) {
        if (theta0.dim() != constraint.dim())
            throw std::invalid_argument("TailProblem: dimension mismatch");
    }

    Eigen::Index dim() const { return theta0.dim(); }
    double statistic(const Vector& y) const { return constraint.statistic(y); }
    bool event_holds(const Vector& y) const { return constraint.contains(y); }
};

enum class SamplerKind { gibbs, hit_and_run, hmc };

struct ChainConfig {
    std::size_t burn_in = 1000;
    std::size_t n_samples = 10000;
    // Empty selects the default mapping: Gibbs for LinearSystem, exact HMC
    // for QuadExterior.
    std::optional<SamplerKind> sampler;
    std::uint64_t seed = 0;
    double hmc_travel_time = 1.5707963267948966;

    void validate() const {
        if (n_samples < 1) throw std::invalid_argument("ChainConfig: n_samples must be >= 1");
        if (!(hmc_travel_time > 0.0)) throw std::invalid_argument("ChainConfig: travel time must be > 0");
    }
};

inline SamplerKind effective_sampler(const ChainConfig& cfg, const Constraint& c) {
    if (cfg.sampler) return *cfg.sampler;
    return c.is_quad() ? SamplerKind::hmc : SamplerKind::gibbs;
}

enum class EstimateMethod { mcmc_ce, multilevel_ce, brute_mc, imhof };

// Result of a tail estimation. log10_p is authoritative; p is its linear
// companion and may underflow to zero in storage.
struct TailEstimate {
    double log10_p = kNegInf;
    double p = 0.0;
    double rel_se = kInf;
    std::size_t n_proposal_hits = 0;
    EstimateMethod method = EstimateMethod::brute_mc;

    // Diagnostics.
    double max_log_weight = kNegInf;
    double effective_samples = 0.0;
    double hit_fraction = 0.0;
    std::optional<MvnParams> proposal;

    bool reliable() const { return n_proposal_hits > 0; }

    static TailEstimate from_log_p(double log_p, EstimateMethod m) {
        TailEstimate e;
        e.log10_p = log_p / 2.302585092994045684;
        e.p = std::exp(log_p);
        e.method = m;
        return e;
    }
};

}  // namespace tailprob

#endif
