#ifndef TAILPROB_BASELINES_HPP
#define TAILPROB_BASELINES_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tailprob/problem.hpp"
#include "tailprob/rng.hpp"

namespace tailprob {

namespace detail {

// 15-point Gauss-Kronrod nodes/weights on [-1,1] with the embedded 7-point
// Gauss rule (QUADPACK values).
inline constexpr double kGk15Nodes[15] = {
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144838258730, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
    0.207784955007898467600689403773245,  0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,  0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,  0.949107912342758524526189684047851,
    0.991455371120812639206854697526329};

inline constexpr double kGk15Weights[15] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970};

inline constexpr double kGauss7Weights[7] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082};

template <typename F>
inline void gk15(const F& f, double a, double b, double& kronrod, double& err) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double k15 = 0.0, g7 = 0.0;
    for (int i = 0; i < 15; ++i) {
        const double v = f(mid + half * kGk15Nodes[i]);
        k15 += kGk15Weights[i] * v;
        if (i % 2 == 1) g7 += kGauss7Weights[i / 2] * v;
    }
    kronrod = half * k15;
    err = std::abs(half * (k15 - g7));
}

template <typename F>
inline double adaptive_gk(const F& f, double a, double b, double tol, std::size_t& budget) {
    double value = 0.0, err = 0.0;
    gk15(f, a, b, value, err);
    if (err <= tol || b - a < 1e-14 * std::max(1.0, std::abs(a))) return value;
    if (budget == 0) throw NumericalError("imhof: quadrature non-convergence");
    --budget;
    const double mid = 0.5 * (a + b);
    return adaptive_gk(f, a, mid, 0.5 * tol, budget) +
           adaptive_gk(f, mid, b, 0.5 * tol, budget);
}

}  // namespace detail

// Imhof (1961) numerical inversion for Pr(sum_i lambda_i Y_i^2 >= q):
//   p = 1/2 + (1/pi) Int_0^inf sin(theta(u)) / (u rho(u)) du,
//   theta(u) = (1/2) sum_i atan(lambda_i u) - q u / 2,
//   rho(u)   = prod_i (1 + lambda_i^2 u^2)^{1/4}.
// Evaluated in linear space, so accuracy degrades for extreme tails; this
// is the documented failure mode the CE estimators are measured against.
inline double imhof(const Vector& lambdas, double q) {
    if (lambdas.size() == 0) throw std::invalid_argument("imhof: empty lambdas");
    if ((lambdas.array() <= 0.0).any())
        throw std::invalid_argument("imhof: lambdas must be positive");
    if (!(q >= 0.0)) throw std::invalid_argument("imhof: q must be >= 0");

    const auto integrand = [&](double u) {
        double theta = -0.5 * q * u;
        double log_rho = 0.0;
        for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
            const double lu = lambdas[i] * u;
            theta += 0.5 * std::atan(lu);
            log_rho += 0.25 * std::log1p(lu * lu);
        }
        return std::sin(theta) * std::exp(-log_rho) / u;
    };
    const auto envelope = [&](double u) {
        double log_rho = 0.0;
        for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
            const double lu = lambdas[i] * u;
            log_rho += 0.25 * std::log1p(lu * lu);
        }
        return std::exp(-log_rho) / u;
    };

    constexpr double tol = 1e-14;
    std::size_t budget = 200000;
    double integral = 0.0;
    double left = 0.0;
    double width = 1.0;
    for (int block = 0; block < 64; ++block) {
        integral += detail::adaptive_gk(integrand, left, left + width, tol, budget);
        left += width;
        width *= 2.0;
        if (envelope(left) < 1e-14) break;
    }
    return 0.5 + integral / 3.14159265358979323846;
}

// Brute-force Monte Carlo for the two-sided ratio p-value:
// 2 min[ mean I(y1/y2 >= q), mean I(y1/y2 <= q) ] over m simulated pairs
// with y1 ~ N(mu, sigma^2/n1), y2 ~ N(mu, sigma^2/n2).
inline TailEstimate brute_force_two_sided_ratio(double q_ratio, std::size_t n1, std::size_t n2,
                                                double mu, double sigma, std::size_t m,
                                                Rng& rng) {
    if (m == 0) throw std::invalid_argument("brute_force_two_sided_ratio: m must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("brute_force_two_sided_ratio: sigma <= 0");
    const double sd1 = sigma / std::sqrt(static_cast<double>(n1));
    const double sd2 = sigma / std::sqrt(static_cast<double>(n2));
    std::size_t ge = 0, le = 0;
    for (std::size_t l = 0; l < m; ++l) {
        const double y1 = mu + sd1 * rng.normal();
        const double y2 = mu + sd2 * rng.normal();
        const double ratio = y1 / y2;
        if (ratio >= q_ratio) ++ge;
        if (ratio <= q_ratio) ++le;
    }
    const std::size_t tail = std::min(ge, le);
    const double p_tail = static_cast<double>(tail) / static_cast<double>(m);
    const double p_hat = std::min(1.0, 2.0 * p_tail);

    TailEstimate est;
    est.method = EstimateMethod::brute_mc;
    est.n_proposal_hits = tail;
    est.hit_fraction = p_tail;
    if (tail == 0) return est;
    est.p = p_hat;
    est.log10_p = std::log10(p_hat);
    est.effective_samples = static_cast<double>(tail);
    est.rel_se = std::sqrt((1.0 - p_tail) / (p_tail * static_cast<double>(m)));
    est.max_log_weight = 0.0;
    return est;
}

}  // namespace tailprob

#endif
