#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "photomech/constants.hpp"

namespace photomech {

struct FitResult {
    std::vector<double> alpha;      // fitted expansion coefficients, alpha_0..alpha_J
    double omega_fit = 0.0;         // damped oscillation frequency, rad/s
    double gamma_fit = 0.0;         // damping rate, rad/s
    double dx_fit = std::numeric_limits<double>::quiet_NaN();  // not identifiable from
                                                               // normalized data; kept NaN
    double residual_rms = 0.0;
    std::vector<double> covariance_diag;  // per-parameter variance, order (alpha..., omega, gamma)
};

struct Spectrum {
    std::vector<double> freq;  // Hz, ascending, >= 0
    std::vector<double> psd;   // input^2 / Hz, one-sided
    std::string window;
};

enum class SpectralWindow { rectangular, hann };

// Shot-noise-limited sensitivity floor for the correlation measurement,
// C_min = w0^2 / (4 Phi sqrt(tau_bin)), m^2/sqrt(Hz).
inline double sensitivity(double w0, double flux, double tau_bin) {
    if (!(w0 > 0.0) || !(flux > 0.0) || !(tau_bin > 0.0))
        throw std::invalid_argument("sensitivity inputs must be > 0");
    return w0 * w0 / (4.0 * flux * std::sqrt(tau_bin));
}

// Normalized damped-cosine autocorrelation shape, c(0) = 1.
inline double damped_cosine(double tau, double omega_tilde, double gamma) {
    return std::exp(-0.5 * gamma * tau) *
           (std::cos(omega_tilde * tau) + 0.5 * gamma / omega_tilde * std::sin(omega_tilde * tau));
}

// One-sided PSD of (g2 - 1): symmetric extension to negative lags (g2 is even
// in tau), optional Hann taper, zero-padded DFT. Normalized so that
// sum(psd) * df equals the window-compensated variance of the samples.
inline Spectrum spectrum_from_g2(const std::vector<double>& tau, const std::vector<double>& g2,
                                 SpectralWindow window = SpectralWindow::hann,
                                 int pad_factor = 8) {
    const std::size_t n = tau.size();
    if (n < 4 || g2.size() != n) throw std::invalid_argument("need matching tau/g2 arrays, n >= 4");
    const double dt = tau[1] - tau[0];
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(tau[i] - tau[i - 1] - dt) > 1e-9 * dt)
            throw std::invalid_argument("non-uniform tau bins");
    if (pad_factor < 1) throw std::invalid_argument("pad_factor must be >= 1");

    const std::size_t m = 2 * n - 1;  // lags -(n-1)..(n-1)
    std::vector<double> v(m);
    double wsq_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const long long lag = static_cast<long long>(i) - static_cast<long long>(n - 1);
        const double y = g2[static_cast<std::size_t>(std::llabs(lag))] - 1.0;
        double w = 1.0;
        if (window == SpectralWindow::hann)
            w = 0.5 * (1.0 + std::cos(pi * static_cast<double>(lag) / static_cast<double>(n - 1)));
        v[i] = y * w;
        wsq_sum += w * w;
    }
    const double mean_wsq = wsq_sum / static_cast<double>(m);

    const std::size_t p = m * static_cast<std::size_t>(pad_factor);
    Spectrum out;
    out.window = window == SpectralWindow::hann ? "hann" : "rectangular";
    const std::size_t n_freq = p / 2 + 1;
    out.freq.resize(n_freq);
    out.psd.resize(n_freq);
    for (std::size_t k = 0; k < n_freq; ++k) {
        double re = 0.0, im = 0.0;
        const double w = 2.0 * pi * static_cast<double>(k) / static_cast<double>(p);
        for (std::size_t i = 0; i < m; ++i) {
            const double a = w * static_cast<double>(i);
            re += v[i] * std::cos(a);
            im -= v[i] * std::sin(a);
        }
        const double power = (re * re + im * im) * dt / (static_cast<double>(m) * mean_wsq);
        const bool interior = k != 0 && !(p % 2 == 0 && k == p / 2);
        out.psd[k] = interior ? 2.0 * power : power;
        out.freq[k] = static_cast<double>(k) / (static_cast<double>(p) * dt);
    }
    return out;
}

namespace detail {

// dense solve by Gaussian elimination with partial pivoting
inline std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    // pivot tolerance relative to the largest entry so the test is invariant
    // under an overall rescaling of the system
    double amax = 0.0;
    for (const auto& row : a)
        for (double v : row) amax = std::max(amax, std::abs(v));
    const double tol = amax > 0.0 ? 1e-14 * amax : 1e-300;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < tol) throw std::runtime_error("rank-deficient system");
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
        x[i] = acc / a[i][i];
    }
    return x;
}

inline std::vector<std::vector<double>> invert(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        const auto col = solve_linear(a, e);
        for (std::size_t i = 0; i < n; ++i) inv[i][j] = col[i];
    }
    return inv;
}

struct ExpansionModel {
    const std::vector<double>& tau;
    const std::vector<double>& sigma_e_norm;
    int max_order;

    // p = (alpha_0..alpha_J, omega_tilde, gamma)
    double eval(const std::vector<double>& p, std::size_t i) const {
        const double wt = p[static_cast<std::size_t>(max_order) + 1];
        const double g = p[static_cast<std::size_t>(max_order) + 2];
        const double c = damped_cosine(tau[i], wt, g);
        double acc = 0.0, zp = 1.0;
        for (int j = 0; j <= max_order; ++j) {
            acc += p[static_cast<std::size_t>(j)] * zp;
            zp *= -c;
        }
        return sigma_e_norm[i] * acc;
    }
};

} // namespace detail

// Nonlinear least-squares fit of a normalized g2 histogram with the
// damped-cosine expansion model
//   g2(tau) = sigma_e_norm(tau) * sum_{j<=J} alpha_j (-c(tau))^j,
//   c(tau)  = exp(-gamma tau/2) (cos wt tau + gamma/(2 wt) sin wt tau).
// A perfectly normalized input gives alpha_0 ~ 1; an overall scale is absorbed
// by the alpha vector, leaving ratios and dynamics unchanged.
// Damped Gauss-Newton with Levenberg diagonal regularization; numeric Jacobian
// by central differences.
inline FitResult fit_expansion(const std::vector<double>& tau, const std::vector<double>& g2,
                               const std::vector<double>& sigma_e_norm, int max_order,
                               double omega_init = 0.0, double gamma_init = 0.0) {
    const std::size_t n = tau.size();
    if (g2.size() != n || sigma_e_norm.size() != n || n < 8)
        throw std::invalid_argument("need matching tau/g2/sigma_e arrays, n >= 8");
    if (max_order < 1 || max_order > 4) throw std::invalid_argument("max_order must be in [1, 4]");
    const std::size_t n_par = static_cast<std::size_t>(max_order) + 3;
    if (n < n_par + 2) throw std::invalid_argument("not enough bins for the parameter count");

    // initialization: dynamics from the spectrum of the motional part
    if (omega_init <= 0.0) {
        std::vector<double> motion(n);
        for (std::size_t i = 0; i < n; ++i)
            motion[i] = sigma_e_norm[i] > 0.5 ? g2[i] / sigma_e_norm[i] : 1.0;
        // rescale to unit baseline so an overall amplitude does not leak into
        // the spectrum used for the frequency guess
        double mean = 0.0;
        for (double v : motion) mean += v;
        mean /= static_cast<double>(n);
        if (mean > 0.0)
            for (double& v : motion) v /= mean;
        const auto spec = spectrum_from_g2(tau, motion, SpectralWindow::hann, 8);
        // only frequencies that complete at least two cycles in the record can
        // be told apart from slow statistical drift of the baseline
        const double f_lo = 2.0 / (tau.back() - tau.front());
        std::size_t pk = 0;
        for (std::size_t k = 1; k + 1 < spec.psd.size(); ++k) {
            if (spec.freq[k] < f_lo) continue;
            if (pk == 0 || spec.psd[k] > spec.psd[pk]) pk = k;
        }
        if (pk == 0) pk = spec.psd.size() - 1;
        omega_init = 2.0 * pi * spec.freq[pk];
        if (gamma_init <= 0.0) {
            const double half = 0.5 * spec.psd[pk];
            std::size_t lo = pk, hi = pk;
            while (lo > 0 && spec.psd[lo] > half) --lo;
            while (hi + 1 < spec.psd.size() && spec.psd[hi] > half) ++hi;
            gamma_init = 2.0 * pi * std::max(spec.freq[hi] - spec.freq[lo], spec.freq[1]);
        }
        if (omega_init <= 0.0) omega_init = 2.0 * pi / (tau.back() - tau.front());
    }
    if (gamma_init <= 0.0) gamma_init = 0.2 * omega_init;

    std::vector<double> p(n_par, 0.0);
    p[static_cast<std::size_t>(max_order) + 1] = omega_init;
    p[static_cast<std::size_t>(max_order) + 2] = gamma_init;
    detail::ExpansionModel model{tau, sigma_e_norm, max_order};

    // linear LSQ for alpha at fixed dynamics
    auto refit_alpha = [&](std::vector<double>& pars) {
        const std::size_t na = static_cast<std::size_t>(max_order) + 1;
        std::vector<std::vector<double>> ata(na, std::vector<double>(na, 0.0));
        std::vector<double> atb(na, 0.0);
        const double wt = pars[na], g = pars[na + 1];
        for (std::size_t i = 0; i < n; ++i) {
            const double c = damped_cosine(tau[i], wt, g);
            std::vector<double> basis(na);
            double zp = 1.0;
            for (std::size_t j = 0; j < na; ++j) {
                basis[j] = sigma_e_norm[i] * zp;
                zp *= -c;
            }
            for (std::size_t a = 0; a < na; ++a) {
                for (std::size_t b = 0; b <= a; ++b) ata[a][b] += basis[a] * basis[b];
                atb[a] += basis[a] * g2[i];
            }
        }
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t b = a + 1; b < na; ++b) ata[a][b] = ata[b][a];
        const auto alpha = detail::solve_linear(ata, atb);
        for (std::size_t j = 0; j < na; ++j) pars[j] = alpha[j];
    };
    refit_alpha(p);

    auto chi2 = [&](const std::vector<double>& pars) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = g2[i] - model.eval(pars, i);
            acc += r * r;
        }
        return acc;
    };

    // Variable projection: the alpha block is linear in the model, so it is
    // profiled out exactly at every evaluation and the search runs over the
    // two dynamical parameters only. The reduced landscape is a smooth but
    // often strongly curved valley where damped Gauss-Newton crawls, so the
    // 2-d minimization uses Nelder-Mead, which handles that shape robustly.
    const std::size_t na = static_cast<std::size_t>(max_order) + 1;
    auto reduced_cost = [&](double wt, double gm) -> double {
        auto q = p;
        q[na] = wt;
        q[na + 1] = gm;
        try {
            refit_alpha(q);
        } catch (const std::runtime_error&) {
            return std::numeric_limits<double>::infinity();  // degenerate basis
        }
        return chi2(q);
    };
    struct Vertex {
        double w, g, c;
    };
    std::array<Vertex, 3> sx{{{omega_init, gamma_init, reduced_cost(omega_init, gamma_init)},
                              {1.05 * omega_init, gamma_init,
                               reduced_cost(1.05 * omega_init, gamma_init)},
                              {omega_init, 1.05 * gamma_init,
                               reduced_cost(omega_init, 1.05 * gamma_init)}}};
    auto order = [&] {
        std::sort(sx.begin(), sx.end(), [](const Vertex& a, const Vertex& b) { return a.c < b.c; });
    };
    order();
    bool converged = false;
    for (int it = 0; it < 1000 && !converged; ++it) {
        const double diam =
            (std::abs(sx[1].w - sx[0].w) + std::abs(sx[2].w - sx[0].w)) /
                std::max(std::abs(sx[0].w), 1e-30) +
            (std::abs(sx[1].g - sx[0].g) + std::abs(sx[2].g - sx[0].g)) /
                std::max(std::abs(sx[0].g), 1e-30);
        if (diam < 1e-10) {
            converged = true;
            break;
        }
        const double cw = 0.5 * (sx[0].w + sx[1].w), cg = 0.5 * (sx[0].g + sx[1].g);
        const double rw = 2.0 * cw - sx[2].w, rg = 2.0 * cg - sx[2].g;
        const double fr = reduced_cost(rw, rg);
        if (fr < sx[0].c) {
            const double ew = 3.0 * cw - 2.0 * sx[2].w, eg = 3.0 * cg - 2.0 * sx[2].g;
            const double fe = reduced_cost(ew, eg);
            sx[2] = fe < fr ? Vertex{ew, eg, fe} : Vertex{rw, rg, fr};
        } else if (fr < sx[1].c) {
            sx[2] = {rw, rg, fr};
        } else {
            const double kw = cw + 0.5 * (sx[2].w - cw), kg = cg + 0.5 * (sx[2].g - cg);
            const double fk = reduced_cost(kw, kg);
            if (fk < sx[2].c) {
                sx[2] = {kw, kg, fk};
            } else {
                for (int i = 1; i < 3; ++i) {
                    sx[i].w = sx[0].w + 0.5 * (sx[i].w - sx[0].w);
                    sx[i].g = sx[0].g + 0.5 * (sx[i].g - sx[0].g);
                    sx[i].c = reduced_cost(sx[i].w, sx[i].g);
                }
            }
        }
        order();
    }
    if (!converged || !std::isfinite(sx[0].c))
        throw std::runtime_error("fit_expansion did not converge in 1000 iterations");
    p[na] = sx[0].w;
    p[na + 1] = sx[0].g;
    refit_alpha(p);
    const double cost = chi2(p);

    FitResult out;
    out.alpha.assign(p.begin(), p.begin() + max_order + 1);
    out.omega_fit = std::abs(p[static_cast<std::size_t>(max_order) + 1]);
    out.gamma_fit = std::abs(p[static_cast<std::size_t>(max_order) + 2]);
    out.residual_rms = std::sqrt(cost / static_cast<double>(n));
    if (!(out.omega_fit > 0.0)) throw std::runtime_error("degenerate fitted frequency");

    // per-parameter variances from the residual-weighted normal equations
    {
        std::vector<std::vector<double>> jac(n, std::vector<double>(n_par));
        for (std::size_t j = 0; j < n_par; ++j) {
            const double h = 1e-6 * std::max(std::abs(p[j]), 1e-12);
            auto pl = p, pr = p;
            pl[j] -= h;
            pr[j] += h;
            for (std::size_t i = 0; i < n; ++i)
                jac[i][j] = (model.eval(pr, i) - model.eval(pl, i)) / (2.0 * h);
        }
        std::vector<std::vector<double>> jtj(n_par, std::vector<double>(n_par, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < n_par; ++a)
                for (std::size_t b = 0; b < n_par; ++b) jtj[a][b] += jac[i][a] * jac[i][b];
        const double dof = static_cast<double>(n) - static_cast<double>(n_par);
        const double s2 = cost / std::max(dof, 1.0);
        // symmetric Jacobi rescaling: parameters have wildly different units
        // (alpha ~ 1, omega ~ 1e6), so equilibrate the diagonal before
        // inverting and undo the scaling on the variances
        std::vector<double> d(n_par, 1.0);
        for (std::size_t a = 0; a < n_par; ++a)
            if (jtj[a][a] > 0.0) d[a] = 1.0 / std::sqrt(jtj[a][a]);
        for (std::size_t a = 0; a < n_par; ++a)
            for (std::size_t b = 0; b < n_par; ++b) jtj[a][b] *= d[a] * d[b];
        const auto inv = detail::invert(jtj);
        out.covariance_diag.resize(n_par);
        for (std::size_t a = 0; a < n_par; ++a) out.covariance_diag[a] = s2 * d[a] * d[a] * inv[a][a];
    }
    return out;
}

// Small-amplitude inversion: C_xi(tau) = (w0^2/4) (1 - g2/sigma_e_norm).
// Bins inside the antibunching dip (sigma_e_norm < 0.1 of its tail value) are
// masked with NaN.
inline std::vector<double> extract_cxi(const std::vector<double>& g2,
                                       const std::vector<double>& sigma_e_norm, double w0) {
    if (g2.size() != sigma_e_norm.size()) throw std::invalid_argument("array size mismatch");
    if (!(w0 > 0.0)) throw std::invalid_argument("w0 must be > 0");
    const double se_inf = sigma_e_norm.back();
    std::vector<double> c(g2.size());
    for (std::size_t i = 0; i < g2.size(); ++i) {
        if (sigma_e_norm[i] < 0.1 * se_inf) {
            c[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        c[i] = 0.25 * w0 * w0 * (1.0 - g2[i] / sigma_e_norm[i]);
    }
    return c;
}

} // namespace photomech
