#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "photomech/constants.hpp"

namespace photomech {

// Single-mode mechanical oscillator, SI units throughout.
struct OscillatorParams {
    double omega_m;          // angular frequency, rad/s
    double gamma_m;          // damping rate, rad/s
    double m_eff;            // effective mass, kg
    double temperature_eff;  // effective temperature, K

    void validate() const {
        if (!(omega_m > 0.0)) throw std::invalid_argument("omega_m must be > 0");
        if (!(gamma_m > 0.0)) throw std::invalid_argument("gamma_m must be > 0");
        if (!(m_eff > 0.0)) throw std::invalid_argument("m_eff must be > 0");
        if (!(temperature_eff >= 0.0)) throw std::invalid_argument("temperature_eff must be >= 0");
    }

    double quality_factor() const { return omega_m / gamma_m; }

    // damped oscillation frequency, omega_tilde^2 = omega_m^2 - gamma_m^2/2
    double omega_tilde() const {
        const double w2 = omega_m * omega_m - 0.5 * gamma_m * gamma_m;
        if (!(w2 > 0.0)) throw std::domain_error("oscillator not underdamped (omega_m^2 <= gamma_m^2/2)");
        return std::sqrt(w2);
    }
};

struct ModeSolution {
    int index;          // n >= 1
    double kL;          // root of cos(kL) cosh(kL) = -1
    double A_n;         // shape coefficient
    double meff_ratio;  // M_eff / M for tip readout
};

struct ActuatorParams {
    double alpha = 0.0;     // N/V^2
    double kappa = 0.0;     // m/V^2
    double v_offset = 0.0;  // V
    double s_v = 0.0;       // voltage noise PSD, V^2/Hz

    void validate() const {
        if (alpha < 0.0 || kappa < 0.0 || s_v < 0.0)
            throw std::invalid_argument("actuator coefficients must be >= 0");
    }
};

// rms thermal position spread sqrt(kB T / (M omega_m^2))
inline double thermal_spread(const OscillatorParams& p) {
    p.validate();
    return std::sqrt(k_boltzmann * p.temperature_eff / (p.m_eff * p.omega_m * p.omega_m));
}

// chi(omega) = (1/M) / (omega_m^2 - omega^2 - i gamma_m omega), m/N.
// Static compliance 1/(M omega_m^2) is purely real; on-resonance modulus is
// 1/(M gamma_m omega_m).
inline std::complex<double> susceptibility(const OscillatorParams& p, double omega) {
    p.validate();
    const std::complex<double> den(p.omega_m * p.omega_m - omega * omega,
                                   -p.gamma_m * omega);
    return (1.0 / p.m_eff) / den;
}

// Two-sided displacement PSD in angular frequency, S_x = |chi|^2 S_F with
// S_F = 2 M Gamma kB T. Variance is recovered as (1/2pi) integral S_x dOmega.
inline double displacement_psd(const OscillatorParams& p, double omega) {
    const double sf = 2.0 * p.m_eff * p.gamma_m * k_boltzmann * p.temperature_eff;
    return std::norm(susceptibility(p, omega)) * sf;
}

// C_xi(tau) = dx_th^2 e^{-Gamma tau/2} (cos(wt tau) + Gamma/(2 wt) sin(wt tau))
inline double position_autocorrelation(const OscillatorParams& p, double tau) {
    const double var = thermal_spread(p);
    const double wt = p.omega_tilde();
    const double g2 = 0.5 * p.gamma_m;
    return var * var * std::exp(-g2 * tau) *
           (std::cos(wt * tau) + (g2 / wt) * std::sin(wt * tau));
}

// sqrt(2 M Gamma kB T), N/sqrt(Hz); Gamma taken in rad/s (see README on the
// spectral convention).
inline double thermal_force_sensitivity(const OscillatorParams& p) {
    p.validate();
    return std::sqrt(2.0 * p.m_eff * p.gamma_m * k_boltzmann * p.temperature_eff);
}

inline double static_deflection(const ActuatorParams& a, double v) {
    a.validate();
    return a.kappa * v * v;
}

inline double linearized_force(const ActuatorParams& a, double dv) {
    a.validate();
    return 2.0 * a.alpha * a.v_offset * dv;
}

inline double effective_temperature(const ActuatorParams& a, const OscillatorParams& p,
                                    double bath_temperature) {
    a.validate();
    p.validate();
    return bath_temperature + 2.0 * a.alpha * a.alpha * a.v_offset * a.v_offset * a.s_v /
                                  (p.m_eff * k_boltzmann * p.gamma_m);
}

// Effective temperature that produces a requested rms spread.
inline double temperature_for_spread(const OscillatorParams& p, double dx_th) {
    return dx_th * dx_th * p.m_eff * p.omega_m * p.omega_m / k_boltzmann;
}

namespace detail {

// Cantilever mode shape u_n(s) for s = k*y, written with explicit exponentials
// so the cosh/sinh difference keeps precision at large kL (A_n -> -1 there and
// naive evaluation cancels catastrophically).
//
//   u(s) = cos s - cosh s + A (sin s - sinh s)
//        = cos s + A sin s - e^{-s} (1 - A)/2 - e^{s} (1 + A)/2
//
// (1 + A) is computed directly from the root instead of from A.
struct CantileverShape {
    double A;          // shape coefficient
    double one_plus_A; // 1 + A, evaluated without cancellation

    explicit CantileverShape(double kL) {
        // A = -(cos kL + cosh kL)/(sin kL + sinh kL)
        const double s = std::sin(kL), c = std::cos(kL);
        const double sh = std::sinh(kL), ch = std::cosh(kL);
        A = -(c + ch) / (s + sh);
        // 1 + A = (sin kL - cos kL - e^{-kL}) / (sin kL + sinh kL)
        one_plus_A = (s - c - std::exp(-kL)) / (s + sh);
    }

    double operator()(double s) const {
        return std::cos(s) + A * std::sin(s) -
               std::exp(-s) * (1.0 - A) * 0.5 - std::exp(s) * one_plus_A * 0.5;
    }
};

inline double mode_characteristic(double x) {
    // cos(x) cosh(x) + 1, rewritten to stay finite-ish; sign is all we need
    return std::cos(x) + 1.0 / std::cosh(x);
}

inline double bisect_mode_root(double lo, double hi) {
    double flo = mode_characteristic(lo);
    double fhi = mode_characteristic(hi);
    if (flo * fhi > 0.0) throw std::runtime_error("mode root not bracketed");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = mode_characteristic(mid);
        if (fm == 0.0 || hi - lo < 1e-12) return mid;
        if (flo * fm <= 0.0) {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) throw std::runtime_error("adaptive quadrature did not converge");
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double rel_tol) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double scale = std::max(std::abs(whole), 1e-300);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, rel_tol * scale, 60);
}

} // namespace detail

// First n_max cantilever eigenmodes: kL roots of cos(kL) cosh(kL) = -1, shape
// coefficients, and tip-readout effective mass ratio by adaptive quadrature.
// Root n lies within 0.31 of (n - 1/2) pi (alternating side), where
// cos + sech is monotone; a half-width 0.5 bracket isolates it.
inline std::vector<ModeSolution> solve_beam_modes(int n_max) {
    if (n_max < 1 || n_max > 12) throw std::invalid_argument("n_max must be in [1, 12]");
    std::vector<ModeSolution> out;
    out.reserve(static_cast<std::size_t>(n_max));
    for (int n = 1; n <= n_max; ++n) {
        const double lo = (n - 0.5) * pi - 0.5;
        const double hi = (n - 0.5) * pi + 0.5;
        const double kL = detail::bisect_mode_root(lo, hi);
        const detail::CantileverShape u(kL);
        const double u_tip = u(kL);
        const double integral = detail::adaptive_simpson(
            [&](double s) {
                const double v = u(s);
                return v * v;
            },
            0.0, kL, 1e-9);
        out.push_back({n, kL, u.A, integral / (kL * u_tip * u_tip)});
    }
    return out;
}

} // namespace photomech
