#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "photomech/constants.hpp"

namespace photomech {

// Detection (or illumination) profile. Gaussian: Pi(x) = exp(-2 (x-c)^2 / w0^2),
// peak-normalized to 1. Tabulated profiles are linearly interpolated.
struct Psf {
    enum class Kind { gaussian, tabulated };

    Kind kind = Kind::gaussian;
    double center = 0.0;  // m
    double waist = 0.0;   // w0, m (gaussian only)
    std::vector<double> x_table;      // ascending, m
    std::vector<double> value_table;  // in [0, 1]

    static Psf gaussian(double center, double waist) {
        if (!(waist > 0.0)) throw std::invalid_argument("waist must be > 0");
        Psf p;
        p.kind = Kind::gaussian;
        p.center = center;
        p.waist = waist;
        return p;
    }

    static Psf tabulated(std::vector<double> x, std::vector<double> v) {
        if (x.size() != v.size() || x.size() < 2)
            throw std::invalid_argument("tabulated psf needs matching arrays of length >= 2");
        for (std::size_t i = 1; i < x.size(); ++i)
            if (!(x[i] > x[i - 1])) throw std::invalid_argument("tabulated psf x must be ascending");
        for (double val : v)
            if (val < 0.0 || val > 1.0) throw std::invalid_argument("tabulated psf values must be in [0,1]");
        Psf p;
        p.kind = Kind::tabulated;
        p.x_table = std::move(x);
        p.value_table = std::move(v);
        return p;
    }
};

struct PumpProfile {
    enum class Kind { broad, gaussian };

    Kind kind = Kind::broad;
    double intensity = 1.0;  // I0, normalized
    double center = 0.0;     // m (gaussian only)
    double waist = 0.0;      // m (gaussian only)

    static PumpProfile broad(double i0 = 1.0) {
        if (i0 < 0.0) throw std::invalid_argument("I0 must be >= 0");
        PumpProfile p;
        p.kind = Kind::broad;
        p.intensity = i0;
        return p;
    }

    static PumpProfile gaussian(double center, double waist, double i0 = 1.0) {
        if (!(waist > 0.0)) throw std::invalid_argument("waist must be > 0");
        if (i0 < 0.0) throw std::invalid_argument("I0 must be >= 0");
        PumpProfile p;
        p.kind = Kind::gaussian;
        p.center = center;
        p.waist = waist;
        p.intensity = i0;
        return p;
    }

    double intensity_at(double x) const {
        if (kind == Kind::broad) return intensity;
        const double u = x - center;
        return intensity * std::exp(-2.0 * u * u / (waist * waist));
    }
};

inline double psf_eval(const Psf& psf, double x) {
    if (psf.kind == Psf::Kind::gaussian) {
        const double u = x - psf.center;
        return std::exp(-2.0 * u * u / (psf.waist * psf.waist));
    }
    if (x < psf.x_table.front() || x > psf.x_table.back())
        throw std::out_of_range("x outside tabulated psf domain");
    const auto it = std::upper_bound(psf.x_table.begin(), psf.x_table.end(), x);
    const std::size_t i = std::min(static_cast<std::size_t>(it - psf.x_table.begin()),
                                   psf.x_table.size() - 1) - 1;
    const double frac = (x - psf.x_table[i]) / (psf.x_table[i + 1] - psf.x_table[i]);
    return psf.value_table[i] * (1.0 - frac) + psf.value_table[i + 1] * frac;
}

// Mean detected flux factor for a thermal Gaussian position distribution of
// rms spread dx_th centered at the origin:
//   Phi = integral P(x) Pi(x - center) dx
//       = exp(-center^2 / (2 (w0^2/4 + dx_th^2))) / sqrt(1 + 4 dx_th^2 / w0^2)
inline double mean_flux(const Psf& psf, double dx_th) {
    if (psf.kind != Psf::Kind::gaussian)
        throw std::invalid_argument("mean_flux closed form requires a gaussian psf");
    if (dx_th < 0.0) throw std::invalid_argument("dx_th must be >= 0");
    const double w0 = psf.waist;
    const double var = 0.25 * w0 * w0 + dx_th * dx_th;
    return std::exp(-psf.center * psf.center / (2.0 * var)) /
           std::sqrt(1.0 + 4.0 * dx_th * dx_th / (w0 * w0));
}

// Width of the thermally broadened fluorescence image, sqrt(w0^2/4 + dx_th^2).
inline double thermal_image_width(double w0, double dx_th) {
    if (!(w0 > 0.0) || dx_th < 0.0) throw std::invalid_argument("inputs must be positive");
    return std::sqrt(0.25 * w0 * w0 + dx_th * dx_th);
}

// Time-averaged fluorescence image of a coherently driven emitter,
//   F(x) = (1/T) integral_0^T exp(-2 (x - x0 - A cos(Omega t))^2 / w0^2) dt,
// evaluated by trapezoid over the phase (spectrally convergent for this
// smooth periodic integrand).
inline std::vector<double> coherent_drive_image(const std::vector<double>& x_grid, double x0,
                                                double amplitude, double w0,
                                                int phase_points = 256) {
    if (amplitude < 0.0) throw std::invalid_argument("amplitude must be >= 0");
    if (!(w0 > 0.0)) throw std::invalid_argument("w0 must be > 0");
    if (phase_points < 8) throw std::invalid_argument("phase_points too small");
    std::vector<double> out(x_grid.size(), 0.0);
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        double acc = 0.0;
        for (int k = 0; k < phase_points; ++k) {
            const double phase = 2.0 * pi * static_cast<double>(k) / phase_points;
            const double u = x_grid[i] - x0 - amplitude * std::cos(phase);
            acc += std::exp(-2.0 * u * u / (w0 * w0));
        }
        out[i] = acc / phase_points;
    }
    return out;
}

} // namespace photomech
