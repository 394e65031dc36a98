#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace photomech {

// Three-level rate model: ground |g>, excited |e>, dark metastable |m>.
// Populations only; coherences play no role at these pump conditions.
struct EmitterParams {
    double gamma_rad = 8.3e7;                 // excited -> ground, 1/s
    double k_isc = 8.0e6;                     // excited -> metastable, 1/s
    double k_relax = 3.3e6;                   // metastable -> ground, 1/s
    double pump_rate_per_intensity = 1.0e7;   // pump rate per unit normalized intensity, 1/s

    void validate() const {
        if (!(gamma_rad > 0.0)) throw std::invalid_argument("gamma_rad must be > 0");
        if (k_isc < 0.0 || k_relax < 0.0 || pump_rate_per_intensity < 0.0)
            throw std::invalid_argument("emitter rates must be >= 0");
    }

    double max_rate(double pump) const {
        return std::max({gamma_rad, k_isc, k_relax, pump});
    }
};

struct EmitterState {
    double sigma_g = 1.0;
    double sigma_e = 0.0;
    double sigma_m = 0.0;

    double sum() const { return sigma_g + sigma_e + sigma_m; }
};

namespace detail {

// d/dt (g, e, m) under pump rate R
inline std::array<double, 3> rate_derivative(const EmitterParams& ep, double pump,
                                             const std::array<double, 3>& s) {
    const double flow_ge = pump * s[0];
    const double flow_eg = ep.gamma_rad * s[1];
    const double flow_em = ep.k_isc * s[1];
    const double flow_mg = ep.k_relax * s[2];
    return {-flow_ge + flow_eg + flow_mg, flow_ge - flow_eg - flow_em, flow_em - flow_mg};
}

inline std::array<double, 3> rk4_step(const EmitterParams& ep, double pump0, double pump_mid,
                                      double pump1, const std::array<double, 3>& s, double dt) {
    const auto k1 = rate_derivative(ep, pump0, s);
    std::array<double, 3> t;
    for (int i = 0; i < 3; ++i) t[i] = s[i] + 0.5 * dt * k1[i];
    const auto k2 = rate_derivative(ep, pump_mid, t);
    for (int i = 0; i < 3; ++i) t[i] = s[i] + 0.5 * dt * k2[i];
    const auto k3 = rate_derivative(ep, pump_mid, t);
    for (int i = 0; i < 3; ++i) t[i] = s[i] + dt * k3[i];
    const auto k4 = rate_derivative(ep, pump1, t);
    std::array<double, 3> out;
    for (int i = 0; i < 3; ++i)
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

} // namespace detail

// Stationary populations for a constant pump rate: null vector of the rate
// generator with unit sum, by direct elimination.
inline EmitterState steady_state(const EmitterParams& ep, double pump) {
    ep.validate();
    if (pump < 0.0) throw std::invalid_argument("pump must be >= 0");
    if (pump == 0.0 && ep.k_relax == 0.0 && ep.k_isc == 0.0 && ep.gamma_rad == 0.0)
        throw std::invalid_argument("degenerate rate generator");
    if (pump == 0.0) return {1.0, 0.0, 0.0};
    // balance: pump g = (gamma + k_isc) e,  k_isc e = k_relax m
    const double e_over_g = pump / (ep.gamma_rad + ep.k_isc);
    if (ep.k_isc > 0.0 && ep.k_relax == 0.0) {
        // metastable state is absorbing
        return {0.0, 0.0, 1.0};
    }
    const double m_over_g = ep.k_relax > 0.0 ? e_over_g * ep.k_isc / ep.k_relax : 0.0;
    const double norm = 1.0 + e_over_g + m_over_g;
    return {1.0 / norm, e_over_g / norm, m_over_g / norm};
}

// RK4 integration of the rate equations from the ground state under a
// time-varying pump. Returns sigma_e on the grid t_i = i*dt, i = 0..n_steps.
// Population-sum drift beyond 1e-6 is an error, never silently renormalized.
inline std::vector<double> step_response(const EmitterParams& ep,
                                         const std::function<double(double)>& pump_of_t,
                                         double duration, double dt) {
    ep.validate();
    if (!(duration > 0.0) || !(dt > 0.0)) throw std::invalid_argument("duration and dt must be > 0");
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(duration / dt));
    std::array<double, 3> s{1.0, 0.0, 0.0};
    std::vector<double> sigma_e;
    sigma_e.reserve(n_steps + 1);
    sigma_e.push_back(0.0);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double p0 = pump_of_t(t);
        const double pm = pump_of_t(t + 0.5 * dt);
        const double p1 = pump_of_t(t + dt);
        const double rate = ep.max_rate(std::max({p0, pm, p1}));
        if (dt * rate > 0.1) throw std::invalid_argument("emitter dt too coarse (dt * max rate > 0.1)");
        s = detail::rk4_step(ep, p0, pm, p1, s, dt);
        if (std::abs(s[0] + s[1] + s[2] - 1.0) > 1e-6)
            throw std::runtime_error("population sum drifted beyond 1e-6");
        sigma_e.push_back(s[1]);
    }
    return sigma_e;
}

inline std::vector<double> step_response_constant(const EmitterParams& ep, double pump,
                                                  double duration, double dt) {
    return step_response(
        ep, [pump](double) { return pump; }, duration, dt);
}

// Stationary-emitter intensity autocorrelation, g2(tau) = sigma_e(tau)/sigma_e(inf)
// with the emitter reset to the ground state at tau = 0.
inline std::vector<double> stationary_g2(const EmitterParams& ep, double pump,
                                         const std::vector<double>& tau_grid) {
    if (!(pump > 0.0)) throw std::invalid_argument("pump must be > 0 for stationary g2");
    if (tau_grid.empty()) return {};
    const double tau_max = *std::max_element(tau_grid.begin(), tau_grid.end());
    const double dt = 0.05 / ep.max_rate(pump);
    const auto se = step_response_constant(ep, pump, tau_max + 2.0 * dt, dt);
    const double se_inf = steady_state(ep, pump).sigma_e;
    std::vector<double> g2;
    g2.reserve(tau_grid.size());
    for (double tau : tau_grid) {
        // linear interpolation on the RK4 grid
        const double x = tau / dt;
        const std::size_t i = std::min(static_cast<std::size_t>(x), se.size() - 2);
        const double frac = x - static_cast<double>(i);
        g2.push_back((se[i] * (1.0 - frac) + se[i + 1] * frac) / se_inf);
    }
    return g2;
}

} // namespace photomech
