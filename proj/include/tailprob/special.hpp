#ifndef TAILPROB_SPECIAL_HPP
#define TAILPROB_SPECIAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace tailprob {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// A log-probability: value <= 0, with -inf standing for probability zero.
// Tiny positive values from rounding (e.g. log1p noise) are clamped to 0.
class LogProb {
  public:
    explicit LogProb(double value) : value_(value) {
        if (std::isnan(value_)) throw NumericalError("LogProb: NaN");
        if (value_ > 0.0) {
            if (value_ > 1e-9) throw NumericalError("LogProb: positive log-probability");
            value_ = 0.0;
        }
    }

    double value() const { return value_; }
    double log10() const { return value_ / 2.302585092994045684; }
    double prob() const { return std::exp(value_); }  // may underflow to 0

    static LogProb from_prob(double p) {
        if (std::isnan(p) || p < 0.0 || p > 1.0)
            throw NumericalError("LogProb: probability outside [0,1]");
        return LogProb(std::log(p));
    }
    static LogProb zero_prob() { return LogProb(kNegInf); }
    static LogProb certain() { return LogProb(0.0); }

  private:
    double value_;
};

// log(sum_i exp(v[i])) with max-shift; -inf entries contribute nothing,
// all-(-inf) input yields -inf.
inline double log_sum_exp(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    double m = *std::max_element(values.begin(), values.end());
    if (m == kNegInf) return kNegInf;
    if (m == kInf) return kInf;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - m);
    return m + std::log(sum);
}

inline double log_sum_exp(const std::vector<double>& values) {
    return log_sum_exp(std::span<const double>(values));
}

inline double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

// log(1 - exp(x)) for x <= 0.
inline double log1m_exp(double x) {
    if (x >= 0.0) return kNegInf;
    if (x > -0.6931471805599453) return std::log(-std::expm1(x));
    return std::log1p(-std::exp(x));
}

// ---------------------------------------------------------------------------
// Standard normal quantile, Wichura's AS 241 (PPND16), ~1e-15 relative.
// Valid for p in (0,1) including the extreme tails down to ~1e-316.
// ---------------------------------------------------------------------------
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return kNegInf;
        if (p == 1.0) return kInf;
        throw std::invalid_argument("normal_quantile: p outside (0,1)");
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.36929880922735805310e-1) * r + 5.99832206555887937690e-1) * r +
                1.0);
    }
    return (q < 0.0) ? -val : val;
}

namespace detail {

// Mills ratio Phi_bar(z)/phi(z) by Lentz continued fraction,
// 1/(z + 1/(z + 2/(z + 3/(...)))). Converges quickly for z >= ~6.
inline double mills_cf(double z) {
    const double tiny = 1e-300;
    double f = z > tiny ? z : tiny;  // b0
    double c = f;
    double d = 0.0;
    for (int n = 1; n <= 400; ++n) {
        const double a = static_cast<double>(n);
        d = z + a * d;
        if (std::abs(d) < tiny) d = tiny;
        c = z + a / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-17) break;
    }
    return 1.0 / f;
}

inline constexpr double kLnSqrt2Pi = 0.9189385332046727418;

}  // namespace detail

// ln Pr(Z >= z) for Z ~ N(0,1). erfc in the body, a Mills-ratio continued
// fraction beyond z = 10 (erfc itself underflows near z = 37), and
// log1p(-p) on the far left where the survival probability is ~1.
inline LogProb log_normal_sf(double z) {
    if (std::isnan(z)) throw std::invalid_argument("log_normal_sf: NaN");
    if (z == kInf) return LogProb::zero_prob();
    if (z == kNegInf) return LogProb::certain();
    if (z >= 10.0) {
        return LogProb(-0.5 * z * z - detail::kLnSqrt2Pi + std::log(detail::mills_cf(z)));
    }
    if (z >= -10.0) {
        return LogProb(std::log(0.5 * std::erfc(z * 0.7071067811865475244)));
    }
    // z < -10: Pr = 1 - Pr(Z >= -z), and Pr(Z >= -z) is tiny.
    const double upper_tail = -0.5 * z * z - detail::kLnSqrt2Pi + std::log(detail::mills_cf(-z));
    return LogProb(log1m_exp(upper_tail));
}

// Linear-space wrappers; only meaningful when the result is representable.
inline double normal_sf(double z) { return std::exp(log_normal_sf(z).value()); }
inline double normal_cdf(double z) { return std::exp(log_normal_sf(-z).value()); }

// ---------------------------------------------------------------------------
// Chi-squared survival function in log space via the regularized upper
// incomplete gamma Q(df/2, q/2): power series for P in the lower region,
// Lentz continued fraction for Q in the upper region.
// ---------------------------------------------------------------------------
inline LogProb log_chisq_sf(int df, double q) {
    if (df < 1) throw std::invalid_argument("log_chisq_sf: df must be >= 1");
    if (std::isnan(q) || q < 0.0) throw std::invalid_argument("log_chisq_sf: q must be >= 0");
    const double a = 0.5 * df;
    const double x = 0.5 * q;
    if (x == 0.0) return LogProb::certain();

    if (x < a + 1.0) {
        // P(a,x) series: x^a e^{-x} / Gamma(a+1) * sum_{n>=0} x^n / prod(a+1..a+n)
        double term = 1.0;
        double sum = 1.0;
        for (int n = 1; n <= 2000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (term < sum * 1e-17) break;
        }
        const double log_p_lower = a * std::log(x) - x - std::lgamma(a + 1.0) + std::log(sum);
        return LogProb(log1m_exp(std::min(log_p_lower, 0.0)));
    }

    // Continued fraction for Q(a,x), Lentz.
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double f = d;
    for (int n = 1; n <= 2000; ++n) {
        const double an = -n * (n - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-17) break;
    }
    return LogProb(a * std::log(x) - x - std::lgamma(a) + std::log(f));
}

// log of the chi-squared density at q (with respect to q).
inline double log_chisq_pdf(int df, double q) {
    const double a = 0.5 * df;
    const double x = 0.5 * q;
    if (x <= 0.0) return kNegInf;
    return (a - 1.0) * std::log(x) - x - std::lgamma(a) - 0.6931471805599453094;
}

// Inverse of log_chisq_sf in q for a fixed df: Newton on the log survival
// function with a bisection safeguard.
inline double chisq_sf_inv(int df, LogProb log_p) {
    const double target = log_p.value();
    if (!(target < 0.0)) throw std::invalid_argument("chisq_sf_inv: log_p must be < 0");

    // Bracket [lo, hi] with sf(lo) > target > sf(hi).
    double hi = std::max(-2.0 * target, static_cast<double>(df));
    double lo = 0.0;
    for (int i = 0; i < 200 && log_chisq_sf(df, hi).value() > target; ++i) hi *= 2.0;
    if (log_chisq_sf(df, hi).value() > target)
        throw NumericalError("chisq_sf_inv: failed to bracket");

    double qv = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double h = log_chisq_sf(df, qv).value() - target;
        if (std::abs(h) <= 1e-12 * std::abs(target) + 1e-14) return qv;
        if (h > 0.0) lo = qv; else hi = qv;
        const double dlog = -std::exp(log_chisq_pdf(df, qv) - log_chisq_sf(df, qv).value());
        double next = qv - h / dlog;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        qv = next;
    }
    throw NumericalError("chisq_sf_inv: no convergence");
}

// ---------------------------------------------------------------------------
// Standard Cauchy survival function, stable for arbitrarily large |t|:
// for t >= 0, Pr(T >= t) = atan2(1, t) / pi without cancellation.
// ---------------------------------------------------------------------------
inline LogProb log_cauchy_sf(double t) {
    if (std::isnan(t)) throw std::invalid_argument("log_cauchy_sf: NaN");
    constexpr double pi = 3.14159265358979323846;
    if (t >= 0.0) return LogProb(std::log(std::atan2(1.0, t)) - std::log(pi));
    return LogProb(std::log1p(-std::atan2(1.0, -t) / pi));
}

// t such that log_cauchy_sf(t) = log_p, for log_p < ln(1/2). Closed form
// t = cot(pi p) plus one Newton correction in log space; for p below the
// underflow range the asymptotic t = 1/(pi p) is evaluated in logs.
inline double cauchy_sf_inv(LogProb log_p) {
    const double lp = log_p.value();
    if (!(lp < -0.6931471805599453094))
        throw std::invalid_argument("cauchy_sf_inv: log_p must be < ln(1/2)");
    constexpr double pi = 3.14159265358979323846;
    double t;
    if (lp < -650.0) {
        t = std::exp(-lp - std::log(pi));
    } else {
        const double p = std::exp(lp);
        t = std::cos(pi * p) / std::sin(pi * p);
    }
    // One Newton step on h(t) = log_sf(t) - lp; d log_sf/dt = -1/(pi(1+t^2) sf).
    const double h = log_cauchy_sf(t).value() - lp;
    if (h != 0.0 && std::isfinite(t) && t < 1e150) {
        const double dlog = -std::exp(-std::log(pi) - std::log1p(t * t) - lp);
        t -= h / dlog;
    }
    return t;
}

// Linear-space wrappers.
inline double chisq_sf(int df, double q) { return std::exp(log_chisq_sf(df, q).value()); }
inline double cauchy_sf(double t) { return std::exp(log_cauchy_sf(t).value()); }

}  // namespace tailprob

#endif
