#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "photomech/correlator.hpp"
#include "photomech/emitter.hpp"
#include "photomech/mechanics.hpp"
#include "photomech/optics.hpp"
#include "photomech/trajectory.hpp"

namespace photomech {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parse a value with an optional SI-suffixed unit, e.g. "190 kHz", "380 nm",
// "6.2 pg", "4 K", "1e-6 s". The base unit is not checked against the field;
// only the scale matters.
inline double parse_quantity(const std::string& text) {
    const char* begin = text.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin) throw ScenarioError("not a number: '" + text + "'");
    std::string unit(end);
    std::size_t a = 0, b = unit.size();
    while (a < b && std::isspace(static_cast<unsigned char>(unit[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(unit[b - 1]))) --b;
    unit = unit.substr(a, b - a);
    if (unit.empty()) return value;

    static const std::map<std::string, double> base = {
        {"Hz", 1.0}, {"s", 1.0},  {"m", 1.0},   {"K", 1.0},  {"kg", 1.0},
        {"g", 1e-3}, {"/s", 1.0}, {"m^2", 1.0}, {"rad/s", 1.0},
    };
    static const std::map<char, double> prefix = {
        {'f', 1e-15}, {'p', 1e-12}, {'n', 1e-9}, {'u', 1e-6},
        {'m', 1e-3},  {'k', 1e3},   {'M', 1e6},  {'G', 1e9},
    };
    if (auto it = base.find(unit); it != base.end()) return value * it->second;
    const auto pf = prefix.find(unit[0]);
    if (pf != prefix.end()) {
        const auto bu = base.find(unit.substr(1));
        if (bu != base.end()) return value * pf->second * bu->second;
    }
    throw ScenarioError("unknown unit '" + unit + "'");
}

struct Scenario {
    OscillatorParams oscillator{2.0 * pi * 190e3, 2.0 * pi * 190e3 / 2.0, 1e-14, 300.0};
    EmitterParams emitter{};

    // optics
    double w0 = 380e-9;   // m
    double x1 = 0.0;      // m, start detector center
    double x2 = 0.0;      // m, stop detector center
    PumpProfile pump = PumpProfile::broad(1.0);
    double efficiency = 1.0;
    double dark_rate = 0.0;  // 1/s per detector

    // drive
    DriveKind drive = DriveKind::thermal;
    double amplitude = 0.0;      // m, coherent only
    double drive_phase = 0.0;    // rad

    // simulation
    double dt = 0.0;             // 0: auto (0.05 / omega_m)
    double duration = 0.0;       // s, per trajectory; 0: auto (30 damping times)
    std::size_t ensemble = 200;
    double tau_bin = 0.0;        // 0: auto (dt rounded up to >= dt)
    double tau_max = 0.0;        // 0: auto (3 periods)
    int start_stride = 4;
    CorrelatorConfig::Mode mode = CorrelatorConfig::Mode::full_bloch;
    CorrelatorConfig::Normalization normalization = CorrelatorConfig::Normalization::analytic_flux;
    double tail_window_lo = 0.8;
    int n_modes = 5;
    int max_order = 4;
    int pad_factor = 8;
    std::uint64_t seed = 1;

    std::vector<std::string> notes;  // defaults applied at load time

    double dx_th() const { return thermal_spread(oscillator); }
    double theta() const { return dx_th() / w0; }

    void apply_auto_defaults() {
        if (dt <= 0.0) {
            dt = 0.05 / oscillator.omega_m;
            notes.push_back("simulation.dt defaulted to 0.05/omega_m = " + std::to_string(dt));
        }
        if (tau_bin <= 0.0) {
            tau_bin = dt;
            notes.push_back("simulation.tau_bin defaulted to dt");
        }
        if (tau_max <= 0.0) {
            tau_max = 3.0 * 2.0 * pi / oscillator.omega_m;
            notes.push_back("simulation.tau_max defaulted to 3 periods");
        }
        if (duration <= 0.0) {
            duration = 30.0 / oscillator.gamma_m;
            notes.push_back("simulation.duration defaulted to 30/gamma_m");
        }
    }

    void validate() const {
        oscillator.validate();
        emitter.validate();
        if (!(w0 > 0.0)) throw ScenarioError("optics.w0 must be > 0");
        if (efficiency <= 0.0 || efficiency > 1.0)
            throw ScenarioError("optics.efficiency must be in (0, 1]");
        if (dark_rate < 0.0) throw ScenarioError("optics.dark_rate must be >= 0");
        if (dt * oscillator.omega_m >= 0.1)
            throw ScenarioError("simulation.dt violates dt * omega_m < 0.1");
        if (duration < 2.0 * tau_max)
            throw ScenarioError("simulation.duration must be >= 2 * tau_max");
        if (ensemble < 1) throw ScenarioError("simulation.ensemble must be >= 1");
        correlator_config().validate(dt);
        oscillator.omega_tilde();  // throws when not underdamped
    }

    TrajectoryGrid grid() const {
        TrajectoryGrid g;
        g.dt = dt;
        g.n_samples = static_cast<std::size_t>(duration / dt) + 1;
        return g;
    }

    CorrelatorConfig correlator_config() const {
        CorrelatorConfig c;
        c.tau_bin = tau_bin;
        c.tau_max = tau_max;
        c.start_stride = start_stride;
        c.x1 = x1;
        c.x2 = x2;
        c.mode = mode;
        c.normalization = normalization;
        c.tail_window_lo = tail_window_lo;
        c.dx_th = dx_th();
        c.omega_m = oscillator.omega_m;
        c.gamma_m = oscillator.gamma_m;
        return c;
    }
};

namespace detail {

struct IniEntry {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

using IniData = std::map<std::string, IniEntry>;  // "section.key" -> entry

inline IniData parse_ini(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ScenarioError("cannot open config file: " + path);
    IniData data;
    std::string line, section;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto cpos = line.find_first_of("#;");
        if (cpos != std::string::npos) line.erase(cpos);
        std::size_t a = line.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t");
        line = line.substr(a, b - a + 1);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ScenarioError(path + ":" + std::to_string(lineno) + ": unterminated section");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ScenarioError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        const auto v0 = val.find_first_not_of(" \t");
        val = v0 == std::string::npos ? "" : val.substr(v0);
        if (section.empty() || key.empty())
            throw ScenarioError(path + ":" + std::to_string(lineno) + ": key outside section");
        data["" + section + "." + key] = IniEntry{val, lineno, false};
    }
    return data;
}

} // namespace detail

inline Scenario load_scenario(const std::string& path) {
    const auto ini = detail::parse_ini(path);
    Scenario s;

    auto get = [&](const char* key, auto&& apply) {
        const auto it = ini.find(key);
        if (it == ini.end()) return false;
        it->second.used = true;
        try {
            apply(it->second.value);
        } catch (const std::exception& e) {
            throw ScenarioError(path + ":" + std::to_string(it->second.line) + ": " + key + ": " +
                                e.what());
        }
        return true;
    };
    auto num = [&](const char* key, double& target) {
        return get(key, [&](const std::string& v) { target = parse_quantity(v); });
    };

    double frequency_hz = -1.0, quality = -1.0, damping = -1.0, spread = -1.0;
    num("oscillator.frequency", frequency_hz);
    num("oscillator.quality", quality);
    num("oscillator.damping", damping);
    num("oscillator.mass", s.oscillator.m_eff);
    num("oscillator.temperature", s.oscillator.temperature_eff);
    num("oscillator.spread", spread);
    if (frequency_hz > 0.0) s.oscillator.omega_m = 2.0 * pi * frequency_hz;
    if (quality > 0.0 && damping > 0.0)
        throw ScenarioError("specify either oscillator.quality or oscillator.damping, not both");
    if (quality > 0.0)
        s.oscillator.gamma_m = s.oscillator.omega_m / quality;
    else if (damping > 0.0)
        s.oscillator.gamma_m = damping;
    else if (frequency_hz > 0.0)
        s.oscillator.gamma_m = s.oscillator.omega_m / 2.0;  // keep the default Q=2

    num("emitter.gamma_rad", s.emitter.gamma_rad);
    num("emitter.k_isc", s.emitter.k_isc);
    num("emitter.k_relax", s.emitter.k_relax);
    num("emitter.pump_rate_per_intensity", s.emitter.pump_rate_per_intensity);

    num("optics.w0", s.w0);
    num("optics.x1", s.x1);
    num("optics.x2", s.x2);
    num("optics.efficiency", s.efficiency);
    num("optics.dark_rate", s.dark_rate);
    {
        std::string pump_kind = "broad";
        double i0 = 1.0, pc = 0.0, pw = s.w0;
        get("optics.pump", [&](const std::string& v) { pump_kind = v; });
        num("optics.pump_intensity", i0);
        num("optics.pump_center", pc);
        num("optics.pump_waist", pw);
        if (pump_kind == "broad")
            s.pump = PumpProfile::broad(i0);
        else if (pump_kind == "gaussian")
            s.pump = PumpProfile::gaussian(pc, pw, i0);
        else
            throw ScenarioError("optics.pump must be 'broad' or 'gaussian'");
    }

    // spread overrides temperature: pin dx_th and back out T_eff
    if (spread > 0.0) {
        s.oscillator.temperature_eff = temperature_for_spread(s.oscillator, spread);
        s.notes.push_back("oscillator.temperature set from spread: " +
                          std::to_string(s.oscillator.temperature_eff) + " K");
    }

    get("drive.kind", [&](const std::string& v) {
        if (v == "thermal")
            s.drive = DriveKind::thermal;
        else if (v == "coherent")
            s.drive = DriveKind::coherent;
        else
            throw ScenarioError("drive.kind must be 'thermal' or 'coherent'");
    });
    num("drive.amplitude", s.amplitude);
    num("drive.phase", s.drive_phase);

    num("simulation.dt", s.dt);
    num("simulation.duration", s.duration);
    num("simulation.tau_bin", s.tau_bin);
    num("simulation.tau_max", s.tau_max);
    num("simulation.tail_window_lo", s.tail_window_lo);
    get("simulation.ensemble", [&](const std::string& v) {
        s.ensemble = static_cast<std::size_t>(std::stoull(v));
    });
    get("simulation.start_stride", [&](const std::string& v) { s.start_stride = std::stoi(v); });
    get("simulation.n_modes", [&](const std::string& v) { s.n_modes = std::stoi(v); });
    get("simulation.max_order", [&](const std::string& v) { s.max_order = std::stoi(v); });
    get("simulation.pad_factor", [&](const std::string& v) { s.pad_factor = std::stoi(v); });
    get("simulation.seed", [&](const std::string& v) {
        s.seed = static_cast<std::uint64_t>(std::stoull(v));
    });
    get("simulation.mode", [&](const std::string& v) {
        if (v == "full_bloch")
            s.mode = CorrelatorConfig::Mode::full_bloch;
        else if (v == "adiabatic")
            s.mode = CorrelatorConfig::Mode::adiabatic;
        else
            throw ScenarioError("simulation.mode must be 'full_bloch' or 'adiabatic'");
    });
    get("simulation.normalization", [&](const std::string& v) {
        if (v == "analytic_flux")
            s.normalization = CorrelatorConfig::Normalization::analytic_flux;
        else if (v == "tail_average")
            s.normalization = CorrelatorConfig::Normalization::tail_average;
        else
            throw ScenarioError("simulation.normalization must be 'analytic_flux' or 'tail_average'");
    });

    for (const auto& [key, entry] : ini)
        if (!entry.used)
            throw ScenarioError(path + ":" + std::to_string(entry.line) + ": unknown key '" + key +
                                "'");

    s.apply_auto_defaults();
    try {
        s.validate();
    } catch (const std::exception& e) {
        throw ScenarioError(std::string("validation: ") + e.what());
    }
    return s;
}

} // namespace photomech
