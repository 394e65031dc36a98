#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "photomech/emitter.hpp"
#include "photomech/optics.hpp"
#include "photomech/rng.hpp"
#include "photomech/trajectory.hpp"

namespace photomech {

struct CorrelatorConfig {
    double tau_bin = 0.0;    // s
    double tau_max = 0.0;    // s
    int start_stride = 4;    // samples between candidate start times
    double x1 = 0.0;         // start detector center, m
    double x2 = 0.0;         // stop detector center, m

    enum class Mode { full_bloch, adiabatic } mode = Mode::full_bloch;
    enum class Normalization { analytic_flux, tail_average } normalization =
        Normalization::analytic_flux;
    double tail_window_lo = 0.8;  // tail window [lo, 1.0] * tau_max, tail_average mode

    // context for analytic-flux normalization and validity guards
    double dx_th = 0.0;    // rms spread of the thermal ensemble, m
    double omega_m = 0.0;  // mechanical angular frequency, rad/s (0: skip guard)
    double gamma_m = 0.0;  // mechanical damping, rad/s (0: skip tail-window guard)

    void validate(double trajectory_dt) const {
        if (!(tau_bin >= trajectory_dt)) throw std::invalid_argument("tau_bin must be >= trajectory dt");
        if (!(tau_max >= 10.0 * tau_bin)) throw std::invalid_argument("tau_max must be >= 10 tau_bin");
        if (start_stride < 1) throw std::invalid_argument("start_stride must be >= 1");
        if (normalization == Normalization::tail_average && gamma_m > 0.0 &&
            tail_window_lo * tau_max < 5.0 / gamma_m)
            throw std::invalid_argument("tail window overlaps oscillatory region (start < 5/gamma_m)");
    }
};

// Binned, mergeable accumulator for G2(tau, x1, x2). Histograms with identical
// binning and config form a commutative monoid under merge().
struct CorrelationHistogram {
    std::vector<double> bin_edges;    // n_bins + 1 entries, s
    std::vector<double> tau_centers;  // sampling lag per bin, s
    std::vector<double> weighted_sum;
    double weight_norm = 0.0;
    long long n_starts = 0;

    // per-ensemble-member statistics for standard errors
    std::vector<double> member_sum;    // sum over members of per-member g2
    std::vector<double> member_sqsum;  // sum of squares
    long long n_members = 0;

    CorrelatorConfig meta;
    std::string warning;

    std::size_t n_bins() const { return tau_centers.size(); }

    // Normalized g2 per bin. analytic_flux: weighted_sum / weight_norm.
    // tail_average: raw curve divided by its mean over the tail window.
    std::vector<double> g2() const {
        std::vector<double> out(n_bins());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = weighted_sum[k] / weight_norm;
        if (meta.normalization == CorrelatorConfig::Normalization::tail_average) {
            double acc = 0.0;
            std::size_t cnt = 0;
            for (std::size_t k = 0; k < out.size(); ++k) {
                if (tau_centers[k] >= meta.tail_window_lo * meta.tau_max) {
                    acc += out[k];
                    ++cnt;
                }
            }
            if (cnt == 0 || acc == 0.0) throw std::runtime_error("empty tail window");
            const double tail = acc / static_cast<double>(cnt);
            for (double& v : out) v /= tail;
        }
        return out;
    }

    // Standard error of the ensemble mean per bin (analytic-flux scale).
    std::vector<double> standard_error() const {
        std::vector<double> out(n_bins(), 0.0);
        if (n_members < 2) return out;
        const double n = static_cast<double>(n_members);
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double mean = member_sum[k] / n;
            const double var = std::max(member_sqsum[k] / n - mean * mean, 0.0);
            out[k] = std::sqrt(var / (n - 1.0));
        }
        return out;
    }
};

struct PhotonClick {
    double time;   // s
    int detector;  // 1 or 2
};

struct PhotonStream {
    std::vector<PhotonClick> clicks;  // strictly increasing times
    double duration = 0.0;            // s
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::size_t> lag_offsets(const CorrelatorConfig& cfg, double dt) {
    const std::size_t n_bins = static_cast<std::size_t>(std::llround(cfg.tau_max / cfg.tau_bin));
    std::vector<std::size_t> offsets(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k)
        offsets[k] = static_cast<std::size_t>(std::llround((static_cast<double>(k) + 0.5) * cfg.tau_bin / dt));
    return offsets;
}

inline CorrelationHistogram make_histogram(const CorrelatorConfig& cfg, double dt) {
    CorrelationHistogram h;
    h.meta = cfg;
    const auto offsets = lag_offsets(cfg, dt);
    h.tau_centers.resize(offsets.size());
    h.bin_edges.resize(offsets.size() + 1);
    for (std::size_t k = 0; k < offsets.size(); ++k) {
        h.tau_centers[k] = static_cast<double>(offsets[k]) * dt;
        h.bin_edges[k] = static_cast<double>(k) * cfg.tau_bin;
    }
    h.bin_edges.back() = static_cast<double>(offsets.size()) * cfg.tau_bin;
    h.weighted_sum.assign(offsets.size(), 0.0);
    h.member_sum.assign(offsets.size(), 0.0);
    h.member_sqsum.assign(offsets.size(), 0.0);
    return h;
}

// Deterministic parallel map-reduce over ensemble members: member results are
// computed in parallel but folded in index order, so the merged histogram is
// bit-identical for any worker count.
template <typename PerMember>
void for_each_member(std::size_t n, int n_threads, const PerMember& body) {
    if (n_threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + static_cast<std::size_t>(n_threads) - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
        const std::size_t lo = static_cast<std::size_t>(t) * chunk;
        const std::size_t hi = std::min(lo + chunk, n);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

struct MemberResult {
    std::vector<double> sum;   // accumulated weighted products per bin
    double norm = 0.0;         // accumulated normalization
    long long n_starts = 0;
};

inline void fold_members(CorrelationHistogram& h, const std::vector<MemberResult>& members) {
    for (const auto& m : members) {
        if (m.n_starts == 0) continue;
        for (std::size_t k = 0; k < h.weighted_sum.size(); ++k) h.weighted_sum[k] += m.sum[k];
        h.weight_norm += m.norm;
        h.n_starts += m.n_starts;
        ++h.n_members;
        for (std::size_t k = 0; k < h.weighted_sum.size(); ++k) {
            const double g = m.sum[k] / m.norm;
            h.member_sum[k] += g;
            h.member_sqsum[k] += g * g;
        }
    }
    if (h.n_starts == 0) throw std::runtime_error("no usable start events in ensemble");
}

} // namespace detail

// Start-weight validity guard; the time-averaged start weight approximation
// requires the emitter lifetime to stay short on the scale of the transit time.
inline bool start_weight_guard_ok(double dx_th, double w0, double gamma_rad, double omega_m) {
    if (omega_m <= 0.0) return true;
    return dx_th / w0 < 0.1 * (gamma_rad / omega_m);
}

// SI weighted-trajectory estimator of g2(tau, x1, x2) with full rate-equation
// integration of the emitter photophysics along each trajectory.
//
// For every start time on the stride grid the start weight is
// sigma_bar_e(xi) * Pi1(xi), and each lag bin accumulates
// weight * sigma_e(tau; ground start) * Pi2(xi(t + tau)).
//
// Broad pump: the Bloch response is position independent, so sigma_e(tau) is
// integrated once on a fine grid and shared between starts.
inline CorrelationHistogram g2_weighted(const std::vector<Trajectory>& ensemble,
                                        const EmitterParams& ep, const PumpProfile& pump,
                                        const Psf& psf1, const Psf& psf2,
                                        const CorrelatorConfig& cfg, int n_threads = 1) {
    if (ensemble.empty()) throw std::invalid_argument("empty trajectory ensemble");
    ep.validate();
    const double dt = ensemble.front().dt;
    cfg.validate(dt);
    const bool broad = pump.kind == PumpProfile::Kind::broad;
    if (!broad && cfg.normalization == CorrelatorConfig::Normalization::analytic_flux)
        throw std::invalid_argument("analytic_flux normalization requires a broad pump");
    CorrelationHistogram hist = detail::make_histogram(cfg, dt);
    if (!start_weight_guard_ok(cfg.dx_th, psf1.waist, ep.gamma_rad, cfg.omega_m))
        hist.warning = "start-weight approximation marginal: dx_th/w0 >= 0.1*gamma_rad/omega_m";
    const auto offsets = detail::lag_offsets(cfg, dt);
    const std::size_t max_off = offsets.back();

    // emitter response at the lag sampling times, for the broad-pump fast path
    std::vector<double> se_at_lag;
    double sigma_ss = 0.0;
    if (broad) {
        const double pump_rate = ep.pump_rate_per_intensity * pump.intensity;
        const double fine_dt = 0.05 / ep.max_rate(pump_rate);
        const auto se = step_response_constant(ep, pump_rate, cfg.tau_max + 2.0 * fine_dt, fine_dt);
        sigma_ss = steady_state(ep, pump_rate).sigma_e;
        se_at_lag.resize(offsets.size());
        for (std::size_t k = 0; k < offsets.size(); ++k) {
            const double x = hist.tau_centers[k] / fine_dt;
            const std::size_t i = std::min(static_cast<std::size_t>(x), se.size() - 2);
            const double frac = x - static_cast<double>(i);
            se_at_lag[k] = se[i] * (1.0 - frac) + se[i + 1] * frac;
        }
    }
    const double phi1 = mean_flux(psf1, cfg.dx_th);
    const double phi2 = mean_flux(psf2, cfg.dx_th);

    std::vector<detail::MemberResult> members(ensemble.size());
    detail::for_each_member(ensemble.size(), n_threads, [&](std::size_t mi) {
        const auto& x = ensemble[mi].positions;
        detail::MemberResult res;
        res.sum.assign(offsets.size(), 0.0);
        if (x.size() <= max_off) return;
        if (broad) {
            std::vector<double> p2(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) p2[i] = psf_eval(psf2, x[i]);
            for (std::size_t s = 0; s + max_off < x.size();
                 s += static_cast<std::size_t>(cfg.start_stride)) {
                const double w = sigma_ss * psf_eval(psf1, x[s]);
                for (std::size_t k = 0; k < offsets.size(); ++k)
                    res.sum[k] += w * se_at_lag[k] * p2[s + offsets[k]];
                ++res.n_starts;
            }
            if (cfg.normalization == CorrelatorConfig::Normalization::analytic_flux)
                res.norm = static_cast<double>(res.n_starts) * sigma_ss * sigma_ss * phi1 * phi2;
            else
                res.norm = static_cast<double>(res.n_starts);
        } else {
            // position-dependent pump: integrate the rate equations per start
            const double peak_rate = ep.max_rate(ep.pump_rate_per_intensity * pump.intensity);
            const int substeps = std::max(1, static_cast<int>(std::ceil(dt * peak_rate / 0.05)));
            const double sub_dt = dt / substeps;
            for (std::size_t s = 0; s + max_off < x.size();
                 s += static_cast<std::size_t>(cfg.start_stride)) {
                const double sbar =
                    steady_state(ep, ep.pump_rate_per_intensity * pump.intensity_at(x[s])).sigma_e;
                const double w = sbar * psf_eval(psf1, x[s]);
                std::array<double, 3> st{1.0, 0.0, 0.0};
                std::size_t next_bin = 0;
                for (std::size_t i = 0; i + 1 <= max_off && next_bin < offsets.size(); ++i) {
                    const double r0 = ep.pump_rate_per_intensity * pump.intensity_at(x[s + i]);
                    const double r1 = ep.pump_rate_per_intensity * pump.intensity_at(x[s + i + 1]);
                    for (int u = 0; u < substeps; ++u) {
                        const double f0 = static_cast<double>(u) / substeps;
                        const double f1 = static_cast<double>(u + 1) / substeps;
                        const double p0 = r0 + (r1 - r0) * f0;
                        const double p1 = r0 + (r1 - r0) * f1;
                        st = detail::rk4_step(ep, p0, 0.5 * (p0 + p1), p1, st, sub_dt);
                    }
                    while (next_bin < offsets.size() && offsets[next_bin] == i + 1) {
                        res.sum[next_bin] += w * st[1] * psf_eval(psf2, x[s + i + 1]);
                        ++next_bin;
                    }
                }
                ++res.n_starts;
            }
            res.norm = static_cast<double>(res.n_starts);
        }
        members[mi] = std::move(res);
    });
    detail::fold_members(hist, members);
    return hist;
}

// Adiabatic factorized estimator: G2_osc(tau) as the time/ensemble average of
// Pi1(xi(t)) Pi2(xi(t+tau)), multiplied by the emitter-normalized response
// sigma_e_norm (stationary_g2 values, -> 1 at large tau).
inline CorrelationHistogram g2_adiabatic(const std::vector<Trajectory>& ensemble, const Psf& psf1,
                                         const Psf& psf2,
                                         const std::vector<double>& sigma_e_norm_at_lag,
                                         const CorrelatorConfig& cfg, int n_threads = 1) {
    if (ensemble.empty()) throw std::invalid_argument("empty trajectory ensemble");
    const double dt = ensemble.front().dt;
    cfg.validate(dt);
    CorrelationHistogram hist = detail::make_histogram(cfg, dt);
    const auto offsets = detail::lag_offsets(cfg, dt);
    if (sigma_e_norm_at_lag.size() != offsets.size())
        throw std::invalid_argument("sigma_e_norm grid must match the lag bins");
    const std::size_t max_off = offsets.back();
    const double phi1 = mean_flux(psf1, cfg.dx_th);
    const double phi2 = mean_flux(psf2, cfg.dx_th);

    std::vector<detail::MemberResult> members(ensemble.size());
    detail::for_each_member(ensemble.size(), n_threads, [&](std::size_t mi) {
        const auto& x = ensemble[mi].positions;
        detail::MemberResult res;
        res.sum.assign(offsets.size(), 0.0);
        if (x.size() <= max_off) return;
        std::vector<double> p1(x.size()), p2(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            p1[i] = psf_eval(psf1, x[i]);
            p2[i] = psf_eval(psf2, x[i]);
        }
        for (std::size_t s = 0; s + max_off < x.size();
             s += static_cast<std::size_t>(cfg.start_stride)) {
            const double w = p1[s];
            for (std::size_t k = 0; k < offsets.size(); ++k)
                res.sum[k] += w * sigma_e_norm_at_lag[k] * p2[s + offsets[k]];
            ++res.n_starts;
        }
        if (cfg.normalization == CorrelatorConfig::Normalization::analytic_flux)
            res.norm = static_cast<double>(res.n_starts) * phi1 * phi2;
        else
            res.norm = static_cast<double>(res.n_starts);
        members[mi] = std::move(res);
    });
    detail::fold_members(hist, members);
    return hist;
}

// Stochastic photon click stream from jump sampling of the rate model:
// per-RK4-step Bernoulli emission with hazard gamma_rad * sigma_e * dt and
// ground-state reset at each emission; each emission lands on detector i with
// probability efficiency * Pi_i(xi)/2 (50:50 splitter), plus independent
// Poisson dark counts per channel.
inline PhotonStream sample_photon_stream(const Trajectory& t, const EmitterParams& ep,
                                         const PumpProfile& pump, const Psf& psf1, const Psf& psf2,
                                         double efficiency, double dark_rate, std::uint64_t seed) {
    ep.validate();
    if (!(efficiency > 0.0) || efficiency > 1.0)
        throw std::invalid_argument("efficiency must be in (0, 1]");
    if (dark_rate < 0.0) throw std::invalid_argument("dark_rate must be >= 0");
    const double duration = static_cast<double>(t.positions.size() - 1) * t.dt;
    const double peak_rate = ep.max_rate(ep.pump_rate_per_intensity * pump.intensity);
    const int substeps = std::max(1, static_cast<int>(std::ceil(t.dt * peak_rate / 0.05)));
    const double dt = t.dt / substeps;
    if (ep.gamma_rad * dt > 0.1)
        throw std::invalid_argument("emission hazard per step exceeds thinning bound 0.1");

    PhotonStream out;
    out.duration = duration;
    out.seed = seed;
    GaussianStream gs(substream_seed(seed, 0));
    std::array<double, 3> st{1.0, 0.0, 0.0};
    const bool broad = pump.kind == PumpProfile::Kind::broad;
    const double broad_rate = ep.pump_rate_per_intensity * pump.intensity;
    for (std::size_t i = 0; i + 1 < t.positions.size(); ++i) {
        const double xa = t.positions[i];
        const double xb = t.positions[i + 1];
        for (int u = 0; u < substeps; ++u) {
            const double f0 = static_cast<double>(u) / substeps;
            const double f1 = static_cast<double>(u + 1) / substeps;
            const double x0 = xa + (xb - xa) * f0;
            const double x1 = xa + (xb - xa) * f1;
            const double r0 = broad ? broad_rate : ep.pump_rate_per_intensity * pump.intensity_at(x0);
            const double r1 = broad ? broad_rate : ep.pump_rate_per_intensity * pump.intensity_at(x1);
            st = detail::rk4_step(ep, r0, 0.5 * (r0 + r1), r1, st, dt);
            const double p_emit = ep.gamma_rad * st[1] * dt;
            if (gs.next_uniform() < p_emit) {
                st = {1.0, 0.0, 0.0};  // ground-state reset
                const double time = (static_cast<double>(i) + f1) * t.dt;
                const double xe = x1;
                const double pd1 = 0.5 * efficiency * psf_eval(psf1, xe);
                const double pd2 = 0.5 * efficiency * psf_eval(psf2, xe);
                const double u2 = gs.next_uniform();
                if (u2 < pd1)
                    out.clicks.push_back({time, 1});
                else if (u2 < pd1 + pd2)
                    out.clicks.push_back({time, 2});
            }
        }
    }
    // dark counts: homogeneous Poisson processes on each channel
    if (dark_rate > 0.0) {
        for (int det = 1; det <= 2; ++det) {
            GaussianStream dark(substream_seed(seed, static_cast<std::uint64_t>(det)));
            double time = 0.0;
            while (true) {
                time += -std::log(dark.next_uniform()) / dark_rate;
                if (time >= duration) break;
                out.clicks.push_back({time, det});
            }
        }
        std::sort(out.clicks.begin(), out.clicks.end(),
                  [](const PhotonClick& a, const PhotonClick& b) { return a.time < b.time; });
    }
    return out;
}

// Multi-start correlation of a click stream: every detector-1 click starts a
// window; detector-2 clicks within tau_max are binned by delay. Normalized by
// the accidental-coincidence level Phi1 Phi2 tau_bin T.
inline CorrelationHistogram correlate_stream(const PhotonStream& s, const CorrelatorConfig& cfg) {
    if (s.clicks.empty()) throw std::invalid_argument("empty photon stream");
    if (cfg.tau_max > s.duration / 10.0)
        throw std::invalid_argument("tau_max must be <= duration/10");
    const std::size_t n_bins = static_cast<std::size_t>(std::llround(cfg.tau_max / cfg.tau_bin));
    CorrelationHistogram h;
    h.meta = cfg;
    h.meta.normalization = CorrelatorConfig::Normalization::analytic_flux;  // self-normalized
    h.weighted_sum.assign(n_bins, 0.0);
    h.member_sum.assign(n_bins, 0.0);
    h.member_sqsum.assign(n_bins, 0.0);
    h.tau_centers.resize(n_bins);
    h.bin_edges.resize(n_bins + 1);
    for (std::size_t k = 0; k <= n_bins; ++k) h.bin_edges[k] = static_cast<double>(k) * cfg.tau_bin;
    for (std::size_t k = 0; k < n_bins; ++k)
        h.tau_centers[k] = (static_cast<double>(k) + 0.5) * cfg.tau_bin;

    std::vector<double> t1, t2;
    for (const auto& c : s.clicks) (c.detector == 1 ? t1 : t2).push_back(c.time);
    std::size_t lo = 0;
    for (double start : t1) {
        while (lo < t2.size() && t2[lo] < start) ++lo;
        for (std::size_t j = lo; j < t2.size() && t2[j] - start < cfg.tau_max; ++j) {
            const std::size_t k = static_cast<std::size_t>((t2[j] - start) / cfg.tau_bin);
            if (k < n_bins) h.weighted_sum[k] += 1.0;
        }
        ++h.n_starts;
    }
    const double phi1 = static_cast<double>(t1.size()) / s.duration;
    const double phi2 = static_cast<double>(t2.size()) / s.duration;
    h.weight_norm = phi1 * phi2 * cfg.tau_bin * s.duration;
    if (h.weight_norm == 0.0) throw std::runtime_error("stream has an empty channel");
    h.n_members = 1;
    const double n = h.weight_norm;
    for (std::size_t k = 0; k < n_bins; ++k) {
        const double g = h.weighted_sum[k] / n;
        h.member_sum[k] = g;
        h.member_sqsum[k] = g * g;
    }
    return h;
}

// Elementwise histogram merge; requires identical binning and config.
inline CorrelationHistogram merge(const CorrelationHistogram& a, const CorrelationHistogram& b) {
    const auto& ma = a.meta;
    const auto& mb = b.meta;
    if (a.n_bins() != b.n_bins() || ma.tau_bin != mb.tau_bin || ma.tau_max != mb.tau_max ||
        ma.x1 != mb.x1 || ma.x2 != mb.x2 || ma.mode != mb.mode ||
        ma.normalization != mb.normalization)
        throw std::invalid_argument("histogram config mismatch");
    CorrelationHistogram out = a;
    for (std::size_t k = 0; k < out.weighted_sum.size(); ++k) {
        out.weighted_sum[k] += b.weighted_sum[k];
        out.member_sum[k] += b.member_sum[k];
        out.member_sqsum[k] += b.member_sqsum[k];
    }
    out.weight_norm += b.weight_norm;
    out.n_starts += b.n_starts;
    out.n_members += b.n_members;
    if (out.warning.empty()) out.warning = b.warning;
    return out;
}

} // namespace photomech
