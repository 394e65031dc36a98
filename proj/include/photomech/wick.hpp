#pragma once

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace photomech {

// Dimensionless detector geometry: delta_tilde_i = x_i / (w0/sqrt(2)),
// theta = dx_th / w0.
struct Geometry {
    double delta1_tilde = 0.0;
    double delta2_tilde = 0.0;
    double theta = 0.0;

    void validate() const {
        if (theta < 0.0) throw std::invalid_argument("theta must be >= 0");
    }
};

struct ExpansionCoefficients {
    std::vector<double> a;  // A_0 .. A_truncation
    int truncation = 0;
    bool converged = false;
    Geometry geometry;
};

// <xi(t)^p xi(t+tau)^q> for a zero-mean joint Gaussian with variance `var` and
// covariance `c`, by the pairing-count closed form. Zero when p+q is odd.
inline double gaussian_moment(int p, int q, double c, double var) {
    if (p < 0 || q < 0) throw std::invalid_argument("p, q must be >= 0");
    if ((p + q) % 2 != 0) return 0.0;
    long double acc = 0.0L;
    const int jmin = p % 2;  // j shares the parity of p and q
    for (int j = jmin; j <= std::min(p, q); j += 2) {
        const int half = (p + q) / 2 - j;
        long double term =
            std::exp(std::lgamma(p + 1.0) + std::lgamma(q + 1.0) - std::lgamma(j + 1.0) -
                     std::lgamma((p - j) / 2 + 1.0) - std::lgamma((q - j) / 2 + 1.0) -
                     half * std::log(2.0));
        term *= std::pow(static_cast<long double>(c), j) *
                std::pow(static_cast<long double>(var), half);
        acc += term;
    }
    return static_cast<double>(acc);
}

namespace detail {

inline double pairing_sum(std::vector<int>& labels, double c, double var) {
    // labels: 0 for xi(t), 1 for xi(t+tau); recursively pair the first element
    if (labels.empty()) return 1.0;
    const int first = labels.front();
    double acc = 0.0;
    for (std::size_t k = 1; k < labels.size(); ++k) {
        const double cov = (labels[k] == first) ? var : c;
        std::vector<int> rest;
        rest.reserve(labels.size() - 2);
        for (std::size_t i = 1; i < labels.size(); ++i)
            if (i != k) rest.push_back(labels[i]);
        acc += cov * pairing_sum(rest, c, var);
    }
    return acc;
}

} // namespace detail

// Exhaustive Isserlis pairing enumeration; independent oracle for
// gaussian_moment, limited to p+q <= 12 by factorial growth.
inline double pairing_enumeration_oracle(int p, int q, double c, double var) {
    if (p < 0 || q < 0) throw std::invalid_argument("p, q must be >= 0");
    if (p + q > 12) throw std::invalid_argument("p + q too large for enumeration");
    if ((p + q) % 2 != 0) return 0.0;
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(p + q));
    for (int i = 0; i < p; ++i) labels.push_back(0);
    for (int i = 0; i < q; ++i) labels.push_back(1);
    return detail::pairing_sum(labels, c, var);
}

namespace detail {

struct SeriesResult {
    long double value = 0.0L;
    bool converged = false;
};

// log of the inner finite sum
//   sum_{k=0}^{n} delta^{2k} theta^{2(n-k)} / ((2k + odd)! (n-k)!)
// by log-sum-exp; all summands are nonnegative.
inline long double log_inner_sum(int n, double delta_abs, double theta, int odd) {
    const long double NEG_INF = -1.0e4930L;
    const long double ld = delta_abs > 0.0 ? std::log(static_cast<long double>(delta_abs)) : NEG_INF;
    const long double lt = theta > 0.0 ? std::log(static_cast<long double>(theta)) : NEG_INF;
    long double lmax = NEG_INF;
    std::vector<long double> logs(static_cast<std::size_t>(n) + 1, NEG_INF);
    for (int k = 0; k <= n; ++k) {
        if (k > 0 && delta_abs == 0.0) continue;
        if (k < n && theta == 0.0) continue;
        long double l = -lgammal(2.0L * k + odd + 1.0L) - lgammal(static_cast<long double>(n - k) + 1.0L);
        if (k > 0) l += 2.0L * k * ld;
        if (k < n) l += 2.0L * (n - k) * lt;
        logs[static_cast<std::size_t>(k)] = l;
        if (l > lmax) lmax = l;
    }
    if (lmax <= NEG_INF) return NEG_INF;
    long double acc = 0.0L;
    for (long double l : logs)
        if (l > NEG_INF) acc += expl(l - lmax);
    return lmax + logl(acc);
}

// Per-detector alternating series
//   even: S_j(d) = sum_n (-1)^n (2n+2j)!/(n+j)!   * inner_even(n)
//   odd:  S_j(d) = sum_n (-1)^n (2n+2j+2)!/(n+j+1)! * inner_odd(n)
// evaluated with log-gamma magnitudes and compensated summation; terminates
// early once tail terms fall below 1e-14 of the partial sum, and reports
// non-convergence if term magnitudes are still growing at n_terms.
inline SeriesResult detector_series(int j, double delta_tilde, double theta, int n_terms, bool odd) {
    const double d = std::abs(delta_tilde);
    long double sum = 0.0L, comp = 0.0L;
    long double prev_mag = 0.0L;
    bool growing_at_end = false;
    int small_streak = 0;
    for (int n = 0; n < n_terms; ++n) {
        const long double lpre =
            odd ? lgammal(2.0L * n + 2 * j + 3.0L) - lgammal(static_cast<long double>(n + j) + 2.0L)
                : lgammal(2.0L * n + 2 * j + 1.0L) - lgammal(static_cast<long double>(n + j) + 1.0L);
        const long double linner = log_inner_sum(n, d, theta, odd ? 1 : 0);
        if (lpre + linner > 11000.0L) return {sum, false};  // overflows even long double
        const long double mag = (linner < -1.0e4000L) ? 0.0L : expl(lpre + linner);
        const long double term = (n % 2 == 0) ? mag : -mag;
        // Kahan update
        const long double y = term - comp;
        const long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        const long double scale = std::max(fabsl(sum), 1.0L);
        if (mag < 1e-14L * scale) {
            if (++small_streak >= 3) return {sum, true};
        } else {
            small_streak = 0;
        }
        growing_at_end = n > 0 && mag > prev_mag;
        prev_mag = mag;
    }
    return {sum, !growing_at_end};
}

} // namespace detail

// A_j coefficient of the g2 expansion in powers of (-2 C_xi / w0^2) for general
// detector positions. The double sum over the two detector indices factorizes
// into a product of two single-detector series:
//   A_{2j}   =  S^e_j(d1) S^e_j(d2) / (2j)!
//   A_{2j+1} = -d1 d2 S^o_j(d1) S^o_j(d2) / (2j+1)!
inline double aj_general(int j, const Geometry& geom, int n_terms, bool* converged = nullptr) {
    geom.validate();
    if (j < 0 || j > 12) throw std::invalid_argument("j must be in [0, 12]");
    if (n_terms < 1 || n_terms > 500) throw std::invalid_argument("n_terms must be in [1, 500]");
    const bool odd = (j % 2) != 0;
    const int half = j / 2;
    const auto s1 = detail::detector_series(half, geom.delta1_tilde, geom.theta, n_terms, odd);
    const auto s2 = detail::detector_series(half, geom.delta2_tilde, geom.theta, n_terms, odd);
    if (converged) *converged = s1.converged && s2.converged;
    const long double lfact = lgammal(static_cast<long double>(j) + 1.0L);
    long double v = s1.value * s2.value * expl(-lfact);
    if (odd) v *= -static_cast<long double>(geom.delta1_tilde) * geom.delta2_tilde;
    return static_cast<double>(v);
}

// Symmetric arrangement x1 = -x2 = delta.
inline double aj_symmetric(int j, double delta_tilde, double theta, int n_terms,
                           bool* converged = nullptr) {
    Geometry g{delta_tilde, -delta_tilde, theta};
    return aj_general(j, g, n_terms, converged);
}

// Both detectors centered; odd coefficients vanish, even ones reduce to a
// single series in theta^2.
inline double aj_centered(int j, double theta, int n_terms, bool* converged = nullptr) {
    if (j % 2 != 0) {
        if (converged) *converged = true;
        return 0.0;
    }
    Geometry g{0.0, 0.0, theta};
    return aj_general(j, g, n_terms, converged);
}

// Space-time diffusion arrangement x1 = 0, x2 = delta; odd coefficients vanish.
inline double aj_diffusion(int j, double delta_tilde, double theta, int n_terms,
                           bool* converged = nullptr) {
    if (j % 2 != 0) {
        if (converged) *converged = true;
        return 0.0;
    }
    Geometry g{0.0, delta_tilde, theta};
    return aj_general(j, g, n_terms, converged);
}

// Coefficient table A_0..A_jmax for one geometry.
inline ExpansionCoefficients expansion_coefficients(const Geometry& geom, int jmax,
                                                    int n_terms = 500) {
    ExpansionCoefficients out;
    out.geometry = geom;
    out.truncation = jmax;
    out.converged = true;
    out.a.resize(static_cast<std::size_t>(jmax) + 1);
    for (int j = 0; j <= jmax; ++j) {
        bool conv = false;
        out.a[static_cast<std::size_t>(j)] = aj_general(j, geom, n_terms, &conv);
        out.converged = out.converged && conv;
    }
    return out;
}

// Detector separation delta_tilde nulling A_2 in the symmetric arrangement;
// tends to 1/sqrt(2) (delta = w0/2) at small theta. A_2(delta) inherits the
// perfect-square structure of its small-theta limit 2 (1 - 2 d^2)^2 e^{-2 d^2},
// so the null is a tangent minimum, located by golden-section search.
inline double optimal_separation(double theta, int n_terms = 500) {
    if (!(theta < 0.35)) throw std::invalid_argument("optimal_separation requires theta < 0.35");
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.2, hi = 1.4;
    double a = hi - gr * (hi - lo);
    double b = lo + gr * (hi - lo);
    double fa = std::abs(aj_symmetric(2, a, theta, n_terms));
    double fb = std::abs(aj_symmetric(2, b, theta, n_terms));
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - gr * (hi - lo);
            fa = std::abs(aj_symmetric(2, a, theta, n_terms));
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + gr * (hi - lo);
            fb = std::abs(aj_symmetric(2, b, theta, n_terms));
        }
    }
    return 0.5 * (lo + hi);
}

// Series evaluation of g2(tau) = sigma_e(tau)/A_0 * sum_j A_j (-C(tau)/(w0^2/2))^j.
inline std::vector<double> g2_series(const std::vector<double>& c_of_tau,
                                     const ExpansionCoefficients& coeffs,
                                     const std::vector<double>& sigma_e_of_tau, double w0) {
    if (!coeffs.converged) throw std::runtime_error("expansion coefficients not converged");
    if (c_of_tau.size() != sigma_e_of_tau.size())
        throw std::invalid_argument("c and sigma_e grids must match");
    if (coeffs.a.empty() || coeffs.a[0] == 0.0) throw std::runtime_error("A_0 must be nonzero");
    std::vector<double> out(c_of_tau.size());
    for (std::size_t i = 0; i < c_of_tau.size(); ++i) {
        const double z = -c_of_tau[i] / (0.5 * w0 * w0);
        if (std::abs(z) >= 1.0 && coeffs.truncation < 64)
            throw std::runtime_error("series argument |2C/w0^2| >= 1: truncated series unreliable");
        double acc = 0.0, zp = 1.0;
        for (const double aj : coeffs.a) {
            acc += aj * zp;
            zp *= z;
        }
        out[i] = sigma_e_of_tau[i] / coeffs.a[0] * acc;
    }
    return out;
}

// Exact normalized oscillator correlator E[Pi1(xi) Pi2(xi')] for bivariate
// Gaussian (xi, xi') with variance dx^2 and correlation c_norm, from the
// closed-form 2-D Gaussian integral. Dimensionless form in (delta_tilde, theta).
inline double g2_osc_exact(const Geometry& geom, double c_norm) {
    geom.validate();
    if (std::abs(c_norm) > 1.0) throw std::invalid_argument("|c_norm| must be <= 1");
    const double t2 = 4.0 * geom.theta * geom.theta;  // 2 a dx^2 with a = 2/w0^2
    const double d1 = geom.delta1_tilde, d2 = geom.delta2_tilde;
    const double det = (1.0 + t2) * (1.0 + t2) - t2 * t2 * c_norm * c_norm;
    const double quad =
        ((1.0 + t2) * (d1 * d1 + d2 * d2) - 2.0 * t2 * c_norm * d1 * d2) / det;
    return std::exp(-quad) / std::sqrt(det);
}

// G2_osc(0)/G2_osc(inf): initial bunching strength of motional origin.
inline double initial_bunching_ratio(const Geometry& geom) {
    geom.validate();
    const double t2 = geom.theta * geom.theta;
    const double d1 = geom.delta1_tilde, d2 = geom.delta2_tilde;
    const double pref = (1.0 + 4.0 * t2) / std::sqrt(1.0 + 8.0 * t2);
    const double arg = -8.0 * t2 / ((1.0 + 4.0 * t2) * (1.0 + 8.0 * t2)) *
                       (2.0 * t2 * (d1 - d2) * (d1 - d2) - d1 * d2);
    return pref * std::exp(arg);
}

} // namespace photomech
