#ifndef TAILPROB_SAMPLERS_HPP
#define TAILPROB_SAMPLERS_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tailprob/problem.hpp"
#include "tailprob/truncated_normal.hpp"

namespace tailprob {

struct ChainState {
    Vector current;
    std::size_t steps_taken = 0;
};

// A subset of the real line, used for conditional supports and line slices.
struct SliceSet {
    enum class Kind { full_line, interval, outside_interval };
    Kind kind = Kind::full_line;
    double lo = kNegInf;  // interval: [lo, hi]; outside: (-inf, lo] U [hi, inf)
    double hi = kInf;
};

namespace detail {

// Draw from N(mean, sd^2) restricted to the given set. The symmetric
// standard-normal two-tail case routes through the dedicated sampler so the
// draw sequence does not depend on the problem's overall scale.
inline double sample_slice(const SliceSet& set, double mean, double sd, Rng& rng) {
    switch (set.kind) {
        case SliceSet::Kind::full_line:
            return mean + sd * rng.normal();
        case SliceSet::Kind::interval:
            return mean + sd * sample_trunc_normal((set.lo - mean) / sd, (set.hi - mean) / sd, rng);
        case SliceSet::Kind::outside_interval: {
            if (mean == 0.0 && sd == 1.0 && set.lo == -set.hi)
                return sample_trunc_normal_two_tail(set.hi, rng);
            const double z_left = (set.lo - mean) / sd;   // piece is z <= z_left
            const double z_right = (set.hi - mean) / sd;  // piece is z >= z_right
            const double log_mass_left = log_normal_sf(-z_left).value();
            const double log_mass_right = log_normal_sf(z_right).value();
            const double log_total = log_sum_exp(log_mass_left, log_mass_right);
            const bool go_right =
                std::log(rng.uniform01()) < log_mass_right - log_total;
            if (go_right) return mean + sd * sample_trunc_normal(z_right, kInf, rng);
            return mean + sd * sample_trunc_normal(kNegInf, z_left, rng);
        }
    }
    throw std::logic_error("sample_slice: bad kind");
}

// Membership repair for rounding artifacts at the region boundary. For the
// quadratic exterior, scaling y up strictly increases the statistic; for a
// linear system, blending toward the strictly feasible anchor lifts every
// margin. Perturbations are a few ulps and distributionally irrelevant.
inline void repair_membership(const Constraint& c, Vector& y) {
    if (c.contains(y)) return;
    if (c.is_quad()) {
        double factor = 1.0 + 4e-16;
        for (int i = 0; i < 40; ++i) {
            y *= factor;
            if (c.contains(y)) return;
            factor = 1.0 + (factor - 1.0) * 4.0;
        }
    } else {
        double eps = 1e-15;
        for (int i = 0; i < 40; ++i) {
            y += eps * (c.feasible_point() - y);
            if (c.contains(y)) return;
            eps *= 4.0;
        }
    }
    throw NumericalError("sampler: unable to restore constraint membership");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gibbs sampler: exact coordinate-wise conditional draws (Geweke-style).
// ---------------------------------------------------------------------------

// Conditional support of coordinate i given the others.
inline SliceSet gibbs_support(const Constraint& c, const Vector& y, Eigen::Index i) {
    SliceSet set;
    if (c.is_quad()) {
        const Vector& w = c.quad().unit_weights;
        double rest = 0.0;
        for (Eigen::Index j = 0; j < y.size(); ++j)
            if (j != i) rest += w[j] * y[j] * y[j];
        const double deficit = 1.0 - rest;
        if (deficit <= 0.0) return set;  // full line
        const double a = std::sqrt(deficit / w[i]);
        set.kind = SliceSet::Kind::outside_interval;
        set.lo = -a;
        set.hi = a;
        return set;
    }
    const Matrix& cm = c.linear().c_matrix;
    set.kind = SliceSet::Kind::interval;
    for (Eigen::Index r = 0; r < cm.rows(); ++r) {
        const double coef = cm(r, i);
        if (coef == 0.0) continue;
        const double base = cm.row(r).dot(y) - coef * y[i];
        const double bound = -base / coef;
        if (coef > 0.0) set.lo = std::max(set.lo, bound);
        else set.hi = std::min(set.hi, bound);
    }
    if (set.lo == kNegInf && set.hi == kInf) set.kind = SliceSet::Kind::full_line;
    return set;
}

class GibbsSampler {
  public:
    explicit GibbsSampler(const TailProblem& problem)
        : problem_(&problem), precision_(problem.theta0.precision()) {
        const auto d = problem.dim();
        cond_sd_.resize(d);
        for (Eigen::Index i = 0; i < d; ++i) cond_sd_[i] = 1.0 / std::sqrt(precision_(i, i));
    }

    void step(ChainState& state, Rng& rng) const {
        Vector& y = state.current;
        const Vector& mu = problem_->theta0.mean();
        const auto d = y.size();
        for (Eigen::Index i = 0; i < d; ++i) {
            const double dot = precision_.row(i).dot(y - mu) - precision_(i, i) * (y[i] - mu[i]);
            const double cmean = mu[i] - cond_sd_[i] * cond_sd_[i] * dot;
            const SliceSet set = gibbs_support(problem_->constraint, y, i);
            const double old = y[i];
            y[i] = detail::sample_slice(set, cmean, cond_sd_[i], rng);
            if (!problem_->constraint.contains(y)) nudge_coordinate(y, i, set, old);
        }
        ++state.steps_taken;
    }

  private:
    // A draw at the very edge of the support can re-round to just outside
    // the region; push it a few ulps into the feasible side, or fall back
    // to the previous (feasible) value.
    void nudge_coordinate(Vector& y, Eigen::Index i, const SliceSet& set, double old) const {
        double dir;
        if (set.kind == SliceSet::Kind::outside_interval) {
            dir = (y[i] >= 0.0) ? kInf : kNegInf;  // away from the excluded interval
        } else {
            dir = (y[i] - set.lo < set.hi - y[i]) ? kInf : kNegInf;  // toward the interior
        }
        for (int k = 0; k < 64; ++k) {
            y[i] = std::nextafter(y[i], dir);
            if (problem_->constraint.contains(y)) return;
        }
        y[i] = old;
    }

    const TailProblem* problem_;
    Matrix precision_;
    std::vector<double> cond_sd_;
};

// ---------------------------------------------------------------------------
// Hit-and-run sampler: a uniform random direction, then an exact draw from
// the one-dimensional truncated normal along that line.
// ---------------------------------------------------------------------------

// Feasible set {t : y + t u in region} for a line through a feasible y.
inline SliceSet hit_and_run_slice(const Constraint& c, const Vector& y, const Vector& u) {
    SliceSet set;
    if (c.is_quad()) {
        const Vector& w = c.quad().unit_weights;
        const double qa = (w.array() * u.array().square()).sum();
        const double qb = 2.0 * (w.array() * y.array() * u.array()).sum();
        const double qc = (w.array() * y.array().square()).sum() - 1.0;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc <= 0.0 || qa <= 0.0) return set;  // line never enters the ball
        const double root = std::sqrt(disc);
        const double shifted = -0.5 * (qb + (qb >= 0.0 ? root : -root));
        double t1 = shifted / qa;
        double t2 = (shifted != 0.0) ? qc / shifted : -qb / qa - t1;
        if (t1 > t2) std::swap(t1, t2);
        set.kind = SliceSet::Kind::outside_interval;
        set.lo = t1;
        set.hi = t2;
        return set;
    }
    const Matrix& cm = c.linear().c_matrix;
    set.kind = SliceSet::Kind::interval;
    for (Eigen::Index r = 0; r < cm.rows(); ++r) {
        const double margin = cm.row(r).dot(y);
        const double coef = cm.row(r).dot(u);
        if (coef == 0.0) continue;
        const double bound = -margin / coef;
        if (coef > 0.0) set.lo = std::max(set.lo, bound);
        else set.hi = std::min(set.hi, bound);
    }
    if (set.lo == kNegInf && set.hi == kInf) set.kind = SliceSet::Kind::full_line;
    return set;
}

class HitAndRunSampler {
  public:
    explicit HitAndRunSampler(const TailProblem& problem)
        : problem_(&problem), precision_(problem.theta0.precision()) {}

    void step(ChainState& state, Rng& rng) const {
        Vector& y = state.current;
        const auto d = y.size();
        Vector u(d);
        double norm = 0.0;
        do {
            for (Eigen::Index i = 0; i < d; ++i) u[i] = rng.normal();
            norm = u.stableNorm();
        } while (norm == 0.0);
        u /= norm;

        const Vector centered = y - problem_->theta0.mean();
        const Vector pu = precision_ * u;
        const double curvature = u.dot(pu);
        const double slice_mean = -pu.dot(centered) / curvature;
        const double slice_sd = 1.0 / std::sqrt(curvature);

        const SliceSet set = hit_and_run_slice(problem_->constraint, y, u);
        const double t = detail::sample_slice(set, slice_mean, slice_sd, rng);
        Vector candidate = y + t * u;
        if (!problem_->constraint.contains(candidate))
            detail::repair_membership(problem_->constraint, candidate);
        y = candidate;
        ++state.steps_taken;
    }

  private:
    const TailProblem* problem_;
    Matrix precision_;
};

// ---------------------------------------------------------------------------
// Exact Hamiltonian Monte Carlo for the truncated Gaussian
// (Pakman-Paninski): whitened coordinates follow z(t) = z0 cos t + p0 sin t
// between walls; momentum reflects about the constraint normal at each hit.
// ---------------------------------------------------------------------------
class HmcSampler {
  public:
    HmcSampler(const TailProblem& problem, double travel_time)
        : problem_(&problem), travel_time_(travel_time) {
        const auto& theta = problem.theta0;
        if (problem.constraint.is_quad()) {
            const Vector sqrt_w = problem.constraint.quad().unit_weights.cwiseSqrt();
            scaled_chol_ = sqrt_w.asDiagonal() * theta.chol_lower();
            scaled_mean_ = sqrt_w.asDiagonal() * theta.mean();
        } else {
            const Matrix& cm = problem.constraint.linear().c_matrix;
            wall_normals_ = cm * theta.chol_lower();  // rows: walls in z-space
            wall_offsets_ = cm * theta.mean();
        }
    }

    void step(ChainState& state, Rng& rng) const {
        Vector z = problem_->theta0.whiten(state.current);
        const auto d = z.size();
        Vector p(d);
        for (Eigen::Index i = 0; i < d; ++i) p[i] = rng.normal();

        double remaining = travel_time_;
        double window_lo = 0.0;  // skip re-detecting the wall just reflected from
        int reflections = 0;
        Vector z_seg = z, p_seg = p;
        while (true) {
            double t_hit = 0.0;
            int wall = -1;
            find_earliest_hit(z_seg, p_seg, window_lo, remaining, t_hit, wall);
            if (wall < 0) {
                advance(z_seg, p_seg, remaining);
                break;
            }
            advance(z_seg, p_seg, t_hit);
            reflect(z_seg, p_seg, wall);
            remaining -= t_hit;
            window_lo = 1e-9;
            if (++reflections > 1000)
                throw NumericalError("hmc_step: reflection cap exceeded");
        }

        Vector y = problem_->theta0.unwhiten(z_seg);
        if (!problem_->constraint.contains(y)) backtrack_to_feasible(z_seg, p_seg, y);
        if (!y.allFinite()) throw NumericalError("hmc_step: non-finite state");
        state.current = y;
        ++state.steps_taken;
    }

    // Exposed for the energy-conservation and reversibility checks.
    static void advance(Vector& z, Vector& p, double t) {
        const double c = std::cos(t);
        const double s = std::sin(t);
        const Vector z_new = z * c + p * s;
        p = p * c - z * s;
        z = z_new;
    }

  private:
    void find_earliest_hit(const Vector& z0, const Vector& p0, double t_lo, double t_max,
                           double& t_hit, int& wall) const {
        wall = -1;
        t_hit = t_max;
        if (problem_->constraint.is_quad()) {
            double t = 0.0;
            if (quad_wall_hit(z0, p0, t_lo, t_max, t)) {
                t_hit = t;
                wall = 0;
            }
            return;
        }
        for (Eigen::Index r = 0; r < wall_normals_.rows(); ++r) {
            double t = 0.0;
            if (linear_wall_hit(r, z0, p0, t_lo, t_hit, t)) {
                t_hit = t;
                wall = static_cast<int>(r);
            }
        }
    }

    // Root of a cos t + b sin t + offset = 0 in (t_lo, t_max], closed form.
    bool linear_wall_hit(Eigen::Index r, const Vector& z0, const Vector& p0, double t_lo,
                         double t_max, double& t_hit) const {
        const double a = wall_normals_.row(r).dot(z0);
        const double b = wall_normals_.row(r).dot(p0);
        const double offset = wall_offsets_[r];
        const double amp = std::hypot(a, b);
        if (amp <= std::abs(offset)) return false;  // wall out of reach or always violated
        const double phase = std::atan2(b, a);
        const double base = std::acos(std::clamp(-offset / amp, -1.0, 1.0));
        constexpr double two_pi = 6.283185307179586477;
        bool found = false;
        for (const double t0 : {phase + base, phase - base}) {
            double t = t0 - two_pi * std::floor((t0 - t_lo) / two_pi);
            if (t <= t_lo) t += two_pi;   // first representative strictly above t_lo
            if (t <= t_max && (!found || t < t_hit)) {
                t_hit = t;
                found = true;
            }
        }
        return found;
    }

    // Wall function G(t) = |gamma + S z(t)|^2 - 1 reduces to a degree-two
    // trigonometric polynomial; scan on a pi/64 grid, bisect to 1e-12.
    bool quad_wall_hit(const Vector& z0, const Vector& p0, double t_lo, double t_max,
                       double& t_hit) const {
        const Vector alpha = scaled_chol_ * z0;
        const Vector beta = scaled_chol_ * p0;
        const double caa = alpha.squaredNorm();
        const double cbb = beta.squaredNorm();
        const double cab = alpha.dot(beta);
        const double cga = scaled_mean_.dot(alpha);
        const double cgb = scaled_mean_.dot(beta);
        const double base = scaled_mean_.squaredNorm() - 1.0;
        const auto wall_fn = [&](double t) {
            const double c = std::cos(t);
            const double s = std::sin(t);
            return base + caa * c * c + cbb * s * s + 2.0 * (cab * s * c + cga * c + cgb * s);
        };

        constexpr double grid = 3.14159265358979323846 / 64.0;
        double prev_t = t_lo;
        double prev_g = wall_fn(prev_t);
        bool armed = prev_g > 0.0;  // only a feasible->infeasible crossing counts
        while (prev_t < t_max) {
            const double next_t = std::min(prev_t + grid, t_max);
            const double next_g = wall_fn(next_t);
            if (!armed && next_g > 0.0) armed = true;
            else if (armed && next_g <= 0.0) {
                double lo = prev_t, hi = next_t;
                while (hi - lo > 1e-12) {
                    const double mid = 0.5 * (lo + hi);
                    if (wall_fn(mid) > 0.0) lo = mid; else hi = mid;
                }
                t_hit = lo;  // feasible side of the bracket
                return true;
            }
            prev_t = next_t;
            prev_g = next_g;
        }
        return false;
    }

    void reflect(const Vector& z, Vector& p, int wall) const {
        Vector normal;
        if (problem_->constraint.is_quad())
            normal = scaled_chol_.transpose() * (scaled_mean_ + scaled_chol_ * z);
        else
            normal = wall_normals_.row(wall).transpose();
        const double nn = normal.squaredNorm();
        if (nn == 0.0) return;
        p -= (2.0 * p.dot(normal) / nn) * normal;
    }

    // The final rotation occasionally grazes the wall and lands an ulp
    // outside. Rewind time geometrically from the endpoint; the rewinds
    // stay far below the segment length, so this never crosses a
    // reflection.
    void backtrack_to_feasible(const Vector& z_end, const Vector& p_end, Vector& y) const {
        double back = 1e-15;
        const double cap = std::min(1e-3, 0.5 * travel_time_);
        while (back <= cap) {
            Vector z_try = z_end, p_try = p_end;
            advance(z_try, p_try, -back);
            Vector y_try = problem_->theta0.unwhiten(z_try);
            if (problem_->constraint.contains(y_try)) {
                y = y_try;
                return;
            }
            back *= 4.0;
        }
        detail::repair_membership(problem_->constraint, y);
    }

    const TailProblem* problem_;
    double travel_time_;
    Matrix scaled_chol_;   // quad: diag(sqrt(w)) * L
    Vector scaled_mean_;   // quad: sqrt(w) .* mu
    Matrix wall_normals_;  // linear: C * L
    Vector wall_offsets_;  // linear: C * mu
};

// ---------------------------------------------------------------------------
// Single-step entry points and the chain driver.
// ---------------------------------------------------------------------------

inline ChainState gibbs_step(ChainState state, const TailProblem& problem, Rng& rng) {
    GibbsSampler(problem).step(state, rng);
    return state;
}

inline ChainState hit_and_run_step(ChainState state, const TailProblem& problem, Rng& rng) {
    HitAndRunSampler(problem).step(state, rng);
    return state;
}

inline ChainState hmc_step(ChainState state, const TailProblem& problem, Rng& rng,
                           double travel_time = 1.5707963267948966) {
    HmcSampler(problem, travel_time).step(state, rng);
    return state;
}

// Runs the configured MCMC sampler from the constraint's feasible point,
// discarding burn_in iterations; returns n_samples rows, every one inside
// the constraint region. Deterministic for a given (problem, config).
inline Matrix run_chain(const TailProblem& problem, const ChainConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const SamplerKind kind = effective_sampler(config, problem.constraint);

    ChainState state{problem.constraint.feasible_point(), 0};
    Matrix out(static_cast<Eigen::Index>(config.n_samples), problem.dim());

    GibbsSampler gibbs(problem);
    HitAndRunSampler har(problem);
    HmcSampler hmc(problem, config.hmc_travel_time);
    const auto one_step = [&]() {
        switch (kind) {
            case SamplerKind::gibbs: gibbs.step(state, rng); break;
            case SamplerKind::hit_and_run: har.step(state, rng); break;
            case SamplerKind::hmc: hmc.step(state, rng); break;
        }
    };

    for (std::size_t b = 0; b < config.burn_in; ++b) one_step();
    for (std::size_t i = 0; i < config.n_samples; ++i) {
        one_step();
        if (!state.current.allFinite())
            throw NumericalError("run_chain: non-finite chain state");
        out.row(static_cast<Eigen::Index>(i)) = state.current;
    }
    return out;
}

}  // namespace tailprob

#endif
