#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "photomech/mechanics.hpp"
#include "photomech/rng.hpp"

namespace photomech {

struct TrajectoryGrid {
    double dt = 0.0;         // s
    std::size_t n_samples = 0;
    long long burn_in = -1;  // steps discarded; negative selects the default 10/gamma_m

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
        if (n_samples < 2) throw std::invalid_argument("n_samples must be >= 2");
    }
};

enum class DriveKind { thermal, coherent };

struct Trajectory {
    std::vector<double> positions;  // m
    double dt = 0.0;                // s
    std::uint64_t seed = 0;
    DriveKind drive_kind = DriveKind::thermal;
};

namespace detail {

// Exact conditional-Gaussian transition of the damped harmonic oscillator on
// the (position, velocity) state. The drift stiffness is chosen as
// omega0^2 = omega_m^2 - gamma^2/4 so that the stationary position
// autocorrelation is exactly the damped cosine with
// omega_tilde^2 = omega_m^2 - gamma^2/2, while the stationary position
// variance stays pinned at dx_th^2 = kB T / (M omega_m^2).
struct OscillatorTransition {
    std::array<double, 4> phi{};  // row-major 2x2 propagator
    std::array<double, 3> chol{}; // lower Cholesky of the noise covariance: L11, L21, L22
    double sigma_x = 0.0;
    double sigma_v = 0.0;

    OscillatorTransition(const OscillatorParams& p, double dt) {
        p.validate();
        if (dt * p.omega_m >= 0.1)
            throw std::invalid_argument("trajectory dt too coarse (dt * omega_m >= 0.1)");
        const double gamma = p.gamma_m;
        const double w0sq = p.omega_m * p.omega_m - 0.25 * gamma * gamma;
        const double w1sq = w0sq - 0.25 * gamma * gamma;  // = omega_m^2 - gamma^2/2
        if (!(w1sq > 0.0))
            throw std::invalid_argument("oscillator not underdamped (omega_m^2 <= gamma_m^2/2)");
        const double w1 = std::sqrt(w1sq);
        const double e = std::exp(-0.5 * gamma * dt);
        const double c = std::cos(w1 * dt);
        const double s = std::sin(w1 * dt);
        phi = {e * (c + 0.5 * gamma / w1 * s), e * s / w1,
               -e * w0sq / w1 * s, e * (c - 0.5 * gamma / w1 * s)};

        sigma_x = thermal_spread(p);
        sigma_v = sigma_x * std::sqrt(w0sq);
        // stationary covariance is diag(sx^2, sv^2); the process noise over one
        // step is Q = Sigma - Phi Sigma Phi^T
        const double sx2 = sigma_x * sigma_x;
        const double sv2 = sigma_v * sigma_v;
        const double q11 = sx2 - (phi[0] * phi[0] * sx2 + phi[1] * phi[1] * sv2);
        const double q12 = -(phi[0] * phi[2] * sx2 + phi[1] * phi[3] * sv2);
        const double q22 = sv2 - (phi[2] * phi[2] * sx2 + phi[3] * phi[3] * sv2);
        const double l11 = std::sqrt(std::max(q11, 0.0));
        const double l21 = l11 > 0.0 ? q12 / l11 : 0.0;
        const double l22 = std::sqrt(std::max(q22 - l21 * l21, 0.0));
        chol = {l11, l21, l22};
    }

    void step(double& x, double& v, GaussianStream& gs) const {
        const double n1 = gs.next();
        const double n2 = gs.next();
        const double nx = phi[0] * x + phi[1] * v + chol[0] * n1;
        const double nv = phi[2] * x + phi[3] * v + chol[1] * n1 + chol[2] * n2;
        x = nx;
        v = nv;
    }
};

} // namespace detail

// Stationary thermal trajectory via the exact discretized transition, seeded
// deterministically; identical inputs give identical output.
inline Trajectory simulate_thermal(const OscillatorParams& p, const TrajectoryGrid& grid,
                                   std::uint64_t seed) {
    grid.validate();
    const detail::OscillatorTransition tr(p, grid.dt);
    GaussianStream gs(seed);
    double x = tr.sigma_x * gs.next();
    double v = tr.sigma_v * gs.next();
    const long long burn = grid.burn_in >= 0
                               ? grid.burn_in
                               : static_cast<long long>(std::ceil(10.0 / (p.gamma_m * grid.dt)));
    for (long long i = 0; i < burn; ++i) tr.step(x, v, gs);
    Trajectory t;
    t.dt = grid.dt;
    t.seed = seed;
    t.drive_kind = DriveKind::thermal;
    t.positions.resize(grid.n_samples);
    for (std::size_t i = 0; i < grid.n_samples; ++i) {
        t.positions[i] = x;
        tr.step(x, v, gs);
    }
    return t;
}

inline Trajectory simulate_coherent(double amplitude, double omega, double phase,
                                    const TrajectoryGrid& grid) {
    grid.validate();
    Trajectory t;
    t.dt = grid.dt;
    t.seed = 0;
    t.drive_kind = DriveKind::coherent;
    t.positions.resize(grid.n_samples);
    for (std::size_t i = 0; i < grid.n_samples; ++i)
        t.positions[i] = amplitude * std::cos(omega * static_cast<double>(i) * grid.dt + phase);
    return t;
}

// Biased (1/N) stationary autocorrelation estimator; entry k is
// (1/N) sum_i x_i x_{i+k}. Lag 0 equals the empirical second moment.
inline std::vector<double> empirical_autocorrelation(const Trajectory& t, std::size_t max_lag) {
    const std::size_t n = t.positions.size();
    if (max_lag >= n / 2) throw std::invalid_argument("max_lag must be < n_samples/2");
    std::vector<double> c(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) acc += t.positions[i] * t.positions[i + k];
        c[k] = acc / static_cast<double>(n);
    }
    return c;
}

} // namespace photomech
