#ifndef TAILPROB_TRUNCATED_NORMAL_HPP
#define TAILPROB_TRUNCATED_NORMAL_HPP

#include <cmath>
#include <stdexcept>

#include "tailprob/rng.hpp"
#include "tailprob/special.hpp"

namespace tailprob {

namespace detail {

inline constexpr double kTailSplit = 8.0;  // inverse-CDF is unreliable past here

// Rejection sampler for N(0,1) on [lo, hi] with lo >= kTailSplit, hi > lo
// (hi may be +inf). Proposal is the exponential tilt with rate
// alpha = (lo + sqrt(lo^2+4))/2, drawn by exact inversion on [lo, hi];
// acceptance probability exp(-(x-alpha)^2/2) is near 1 throughout this
// regime (Robert 1995).
inline double sample_tail_reject(double lo, double hi, Rng& rng) {
    const double alpha = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
    const double span_mass =
        (hi == kInf) ? 1.0 : -std::expm1(-alpha * (hi - lo));
    for (long attempt = 0; attempt < 100000000L; ++attempt) {
        const double u = rng.uniform01();
        const double x = lo - std::log1p(-u * span_mass) / alpha;
        const double v = rng.uniform01();
        const double gap = x - alpha;
        if (std::log(v) <= -0.5 * gap * gap) {
            if (x <= lo) return std::nextafter(lo, kInf);  // ulp collapse guard
            if (x > hi) return hi;
            return x;
        }
    }
    throw NumericalError("sample_trunc_normal: tail rejection stalled");
}

// Rejection with a uniform proposal on [lo, hi]; only used when the
// interval's normal mass is too small for CDF inversion, which also means
// the density varies little across it.
inline double sample_narrow_reject(double lo, double hi, Rng& rng) {
    const double m = std::min(std::max(0.0, lo), hi);  // closest point to the mode
    for (long attempt = 0; attempt < 100000000L; ++attempt) {
        const double x = lo + rng.uniform01() * (hi - lo);
        const double v = rng.uniform01();
        if (std::log(v) <= 0.5 * (m * m - x * x)) return x;
    }
    throw NumericalError("sample_trunc_normal: narrow rejection stalled");
}

// Inversion on the survival-function scale for 0 <= lo < hi, avoiding the
// cancellation of Phi(hi)-Phi(lo) in the right tail.
inline double sample_right_inverse(double lo, double hi, Rng& rng) {
    const double sf_lo = normal_sf(lo);
    const double sf_hi = (hi == kInf) ? 0.0 : normal_sf(hi);
    const double width = sf_lo - sf_hi;
    if (!(width > 1e-280) || width < 1e-10 * sf_lo)
        return sample_narrow_reject(lo, std::min(hi, 40.0), rng);
    const double target = sf_lo - rng.uniform01() * width;
    double x = -normal_quantile(target);
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    return x;
}

}  // namespace detail

// Exact draw from N(0,1) restricted to [lo, hi]; either bound may be
// infinite. Central sets use CDF inversion, sets beyond |z| = 8 use
// exponential-tilting rejection, and sets whose normal mass is below the
// resolution of double CDFs fall back to a uniform-proposal rejection.
inline double sample_trunc_normal(double lo, double hi, Rng& rng) {
    if (std::isnan(lo) || std::isnan(hi) || !(lo < hi))
        throw std::invalid_argument("sample_trunc_normal: empty truncation set");
    if (lo == kNegInf && hi == kInf) return rng.normal();
    if (lo >= detail::kTailSplit) return detail::sample_tail_reject(lo, hi, rng);
    if (hi <= -detail::kTailSplit) return -detail::sample_tail_reject(-hi, -lo, rng);
    if (lo >= 0.0) return detail::sample_right_inverse(lo, hi, rng);
    if (hi <= 0.0) return -detail::sample_right_inverse(-hi, -lo, rng);

    // Interval straddles zero.
    const double p_lo = normal_cdf(lo);
    const double p_hi = normal_cdf(hi);
    const double width = p_hi - p_lo;
    if (width < 1e-12) return detail::sample_narrow_reject(lo, hi, rng);
    double x = normal_quantile(p_lo + rng.uniform01() * width);
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    return x;
}

// Exact draw from N(0,1) restricted to the symmetric two-tail set
// {x : |x| >= a}. For a <= 0 this is the whole line.
inline double sample_trunc_normal_two_tail(double a, Rng& rng) {
    if (std::isnan(a)) throw std::invalid_argument("sample_trunc_normal_two_tail: NaN");
    if (a <= 0.0) return rng.normal();
    const double side = (rng.uniform01() < 0.5) ? -1.0 : 1.0;
    return side * sample_trunc_normal(a, kInf, rng);
}

}  // namespace tailprob

#endif
