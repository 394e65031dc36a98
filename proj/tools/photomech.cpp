// photomech: command-line front end for the emitter-on-oscillator photon
// statistics toolkit. Every subcommand reads one scenario config, writes CSVs
// plus a run.json manifest into the output directory, and is bit-reproducible
// from (config, seed) for any worker count.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "photomech/analysis.hpp"
#include "photomech/correlator.hpp"
#include "photomech/csv.hpp"
#include "photomech/emitter.hpp"
#include "photomech/mechanics.hpp"
#include "photomech/optics.hpp"
#include "photomech/rng.hpp"
#include "photomech/scenario.hpp"
#include "photomech/trajectory.hpp"
#include "photomech/wick.hpp"

namespace pm = photomech;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunContext {
    pm::Scenario scenario;
    std::string config_path;  // empty: built-in defaults
    std::string out_dir;
    int threads = 1;
    std::vector<std::string> outputs;

    std::string path(const std::string& name) const {
        return (std::filesystem::path(out_dir) / name).string();
    }
};

std::vector<double> tau_grid(const pm::Scenario& s) {
    const auto offsets = pm::detail::lag_offsets(s.correlator_config(), s.dt);
    std::vector<double> tau(offsets.size());
    for (std::size_t k = 0; k < tau.size(); ++k) tau[k] = static_cast<double>(offsets[k]) * s.dt;
    return tau;
}

std::vector<pm::Trajectory> build_ensemble(const pm::Scenario& s, int threads) {
    std::vector<pm::Trajectory> ens(s.ensemble);
    const auto grid = s.grid();
    pm::detail::for_each_member(s.ensemble, threads, [&](std::size_t i) {
        if (s.drive == pm::DriveKind::thermal) {
            ens[i] = pm::simulate_thermal(s.oscillator, grid,
                                          pm::substream_seed(s.seed, static_cast<std::uint64_t>(i)));
        } else {
            // coherent drive: deterministic phase per member spread over the cycle
            const double phase =
                s.drive_phase + 2.0 * pm::pi * static_cast<double>(i) / static_cast<double>(s.ensemble);
            ens[i] = pm::simulate_coherent(s.amplitude, s.oscillator.omega_m, phase, grid);
        }
    });
    return ens;
}

pm::CorrelationHistogram run_simulate(const RunContext& ctx) {
    const auto& s = ctx.scenario;
    const auto ens = build_ensemble(s, ctx.threads);
    const auto cfg = s.correlator_config();
    const pm::Psf psf1 = pm::Psf::gaussian(s.x1, s.w0);
    const pm::Psf psf2 = pm::Psf::gaussian(s.x2, s.w0);
    if (cfg.mode == pm::CorrelatorConfig::Mode::adiabatic) {
        const double pump = s.emitter.pump_rate_per_intensity * s.pump.intensity;
        const auto se_norm = pm::stationary_g2(s.emitter, pump, tau_grid(s));
        return pm::g2_adiabatic(ens, psf1, psf2, se_norm, cfg, ctx.threads);
    }
    return pm::g2_weighted(ens, s.emitter, s.pump, psf1, psf2, cfg, ctx.threads);
}

void write_g2_csv(RunContext& ctx, const std::string& name, const pm::CorrelationHistogram& h) {
    const auto g2 = h.g2();
    const auto se = h.standard_error();
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < h.n_bins(); ++k)
        rows.push_back({h.tau_centers[k], g2[k], se[k]});
    pm::write_csv(ctx.path(name), {"tau_s", "g2", "stderr"}, rows);
    ctx.outputs.push_back(name);
}

int cmd_modes(RunContext& ctx) {
    const auto modes = pm::solve_beam_modes(ctx.scenario.n_modes);
    const std::string name = "modes.csv";
    std::ofstream f(ctx.path(name), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + ctx.path(name));
    f << "n,kL,A_n,meff_ratio\n";
    char buf[160];
    for (const auto& m : modes) {
        std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6g,%.6g\n", m.index, m.kL, m.A_n, m.meff_ratio);
        f << buf;
    }
    ctx.outputs.push_back(name);
    return 0;
}

int cmd_image(RunContext& ctx) {
    const auto& s = ctx.scenario;
    const double halfwidth =
        s.drive == pm::DriveKind::thermal
            ? 4.0 * pm::thermal_image_width(s.w0, s.dx_th())
            : 4.0 * (0.5 * s.w0 + s.amplitude);
    const int n = 201;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = -halfwidth + 2.0 * halfwidth * i / (n - 1);
    std::vector<std::vector<double>> rows;
    if (s.drive == pm::DriveKind::thermal) {
        for (double xi : x)
            rows.push_back({xi, pm::mean_flux(pm::Psf::gaussian(xi, s.w0), s.dx_th())});
    } else {
        const auto img = pm::coherent_drive_image(x, 0.0, s.amplitude, s.w0);
        for (int i = 0; i < n; ++i)
            rows.push_back({x[static_cast<std::size_t>(i)], img[static_cast<std::size_t>(i)]});
    }
    pm::write_csv(ctx.path("image.csv"), {"x_m", "flux"}, rows);
    ctx.outputs.push_back("image.csv");
    return 0;
}

int cmd_emitter_g2(RunContext& ctx) {
    const auto& s = ctx.scenario;
    const double pump = s.emitter.pump_rate_per_intensity * s.pump.intensity;
    const double slow = std::min({s.emitter.gamma_rad, std::max(s.emitter.k_relax, 1.0),
                                  std::max(s.emitter.k_isc, 1.0)});
    const double tmax = 10.0 / slow;
    const int n = 500;
    std::vector<double> tau(n);
    for (int i = 0; i < n; ++i) tau[static_cast<std::size_t>(i)] = tmax * i / (n - 1);
    const auto g2 = pm::stationary_g2(s.emitter, pump, tau);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < n; ++i)
        rows.push_back({tau[static_cast<std::size_t>(i)], g2[static_cast<std::size_t>(i)]});
    pm::write_csv(ctx.path("emitter_g2.csv"), {"tau_s", "g2"}, rows);
    ctx.outputs.push_back("emitter_g2.csv");
    return 0;
}

int cmd_simulate_g2(RunContext& ctx) {
    const auto hist = run_simulate(ctx);
    if (!hist.warning.empty()) std::cerr << "warning: " << hist.warning << "\n";
    write_g2_csv(ctx, "g2.csv", hist);
    return 0;
}

int cmd_analytic_g2(RunContext& ctx) {
    const auto& s = ctx.scenario;
    const double scale = s.w0 / std::sqrt(2.0);
    const pm::Geometry geom{s.x1 / scale, s.x2 / scale, s.theta()};
    const auto coeffs = pm::expansion_coefficients(geom, s.max_order);
    const auto tau = tau_grid(s);
    const double dx2 = s.dx_th() * s.dx_th();
    std::vector<double> c(tau.size());
    for (std::size_t k = 0; k < tau.size(); ++k)
        c[k] = dx2 * pm::position_autocorrelation(s.oscillator, tau[k]) /
               pm::position_autocorrelation(s.oscillator, 0.0);
    const double pump = s.emitter.pump_rate_per_intensity * s.pump.intensity;
    const auto se = pm::stationary_g2(s.emitter, pump, tau);
    const auto g2 = pm::g2_series(c, coeffs, se, s.w0);  // throws on non-convergence
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < tau.size(); ++k) rows.push_back({tau[k], g2[k]});
    pm::write_csv(ctx.path("analytic_g2.csv"), {"tau_s", "g2"}, rows);
    ctx.outputs.push_back("analytic_g2.csv");
    return 0;
}

int cmd_aj_table(RunContext& ctx) {
    const auto& s = ctx.scenario;
    const double scale = s.w0 / std::sqrt(2.0);
    const pm::Geometry geom{s.x1 / scale, s.x2 / scale, s.theta()};
    std::vector<std::vector<double>> rows;
    for (int j = 0; j <= s.max_order; ++j) {
        bool conv = false;
        const double aj = pm::aj_general(j, geom, 500, &conv);
        rows.push_back({static_cast<double>(j), aj, conv ? 1.0 : 0.0});
    }
    pm::write_csv(ctx.path("aj_table.csv"), {"j", "A_j", "converged"}, rows);
    ctx.outputs.push_back("aj_table.csv");
    return 0;
}

pm::PhotonStream make_stream(const RunContext& ctx) {
    const auto& s = ctx.scenario;
    pm::Trajectory t;
    if (s.drive == pm::DriveKind::thermal)
        t = pm::simulate_thermal(s.oscillator, s.grid(), pm::substream_seed(s.seed, 100));
    else
        t = pm::simulate_coherent(s.amplitude, s.oscillator.omega_m, s.drive_phase, s.grid());
    const pm::Psf psf1 = pm::Psf::gaussian(s.x1, s.w0);
    const pm::Psf psf2 = pm::Psf::gaussian(s.x2, s.w0);
    return pm::sample_photon_stream(t, s.emitter, s.pump, psf1, psf2, s.efficiency, s.dark_rate,
                                    pm::substream_seed(s.seed, 200));
}

int cmd_photon_stream(RunContext& ctx) {
    const auto stream = make_stream(ctx);
    std::vector<std::vector<double>> rows;
    for (const auto& c : stream.clicks)
        rows.push_back({c.time, static_cast<double>(c.detector)});
    pm::write_csv(ctx.path("stream.csv"), {"t_s", "detector"}, rows);
    ctx.outputs.push_back("stream.csv");
    return 0;
}

int cmd_correlate(RunContext& ctx, const std::string& input) {
    const auto& s = ctx.scenario;
    pm::PhotonStream stream;
    if (input.empty()) {
        stream = make_stream(ctx);
    } else {
        const auto t = pm::read_csv(input);
        const auto times = t.col("t_s");
        const auto det = t.col("detector");
        for (std::size_t i = 0; i < times.size(); ++i)
            stream.clicks.push_back({times[i], static_cast<int>(det[i])});
        stream.duration = s.duration;
        if (!stream.clicks.empty() && stream.clicks.back().time > stream.duration)
            throw pm::ScenarioError("stream extends past simulation.duration");
    }
    const auto hist = pm::correlate_stream(stream, s.correlator_config());
    write_g2_csv(ctx, "correlation.csv", hist);
    return 0;
}

int cmd_spectrum(RunContext& ctx, const std::string& input) {
    const auto t = pm::read_csv(input);
    const auto spec = pm::spectrum_from_g2(t.col("tau_s"), t.col("g2"), pm::SpectralWindow::hann,
                                           ctx.scenario.pad_factor);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < spec.freq.size(); ++k) rows.push_back({spec.freq[k], spec.psd[k]});
    pm::write_csv(ctx.path("spectrum.csv"), {"freq_hz", "psd"}, rows);
    ctx.outputs.push_back("spectrum.csv");
    return 0;
}

int cmd_fit(RunContext& ctx, const std::string& input) {
    const auto& s = ctx.scenario;
    const auto t = pm::read_csv(input);
    const auto tau = t.col("tau_s");
    const auto g2 = t.col("g2");
    const double pump = s.emitter.pump_rate_per_intensity * s.pump.intensity;
    const auto se_norm = pm::stationary_g2(s.emitter, pump, tau);
    const auto fit = pm::fit_expansion(tau, g2, se_norm, s.max_order);

    const std::string name = "fit.txt";
    std::ofstream f(ctx.path(name), std::ios::binary);
    for (std::size_t j = 0; j < fit.alpha.size(); ++j)
        f << "alpha" << j << " = " << pm::format_double(fit.alpha[j]) << "\n";
    f << "omega_fit = " << pm::format_double(fit.omega_fit) << "\n";
    f << "gamma_fit = " << pm::format_double(fit.gamma_fit) << "\n";
    f << "dx_fit = " << pm::format_double(fit.dx_fit) << "\n";
    f << "residual_rms = " << pm::format_double(fit.residual_rms) << "\n";
    for (std::size_t j = 0; j < fit.covariance_diag.size(); ++j)
        f << "stderr" << j << " = " << pm::format_double(std::sqrt(fit.covariance_diag[j])) << "\n";
    ctx.outputs.push_back(name);

    // residual curve against the fitted model
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double c = pm::damped_cosine(tau[i], fit.omega_fit, fit.gamma_fit);
        double acc = 0.0, zp = 1.0;
        for (const double a : fit.alpha) {
            acc += a * zp;
            zp *= -c;
        }
        const double model = se_norm[i] * acc;
        rows.push_back({tau[i], g2[i], model, g2[i] - model});
    }
    pm::write_csv(ctx.path("fit_residuals.csv"), {"tau_s", "g2", "model", "residual"}, rows);
    ctx.outputs.push_back("fit_residuals.csv");
    return 0;
}

void write_manifest(const RunContext& ctx, const std::string& subcommand, double wall_s) {
    const auto& s = ctx.scenario;
    json j;
    j["tool"] = "photomech";
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["config"] = ctx.config_path.empty() ? "(defaults)" : ctx.config_path;
    j["seed"] = s.seed;
    j["threads"] = ctx.threads;
    j["wall_time_s"] = wall_s;
    j["outputs"] = ctx.outputs;
    j["defaults_applied"] = s.notes;
    j["scenario"] = {
        {"omega_m", s.oscillator.omega_m},
        {"gamma_m", s.oscillator.gamma_m},
        {"m_eff", s.oscillator.m_eff},
        {"temperature_eff", s.oscillator.temperature_eff},
        {"dx_th", s.dx_th()},
        {"theta", s.theta()},
        {"w0", s.w0},
        {"x1", s.x1},
        {"x2", s.x2},
        {"gamma_rad", s.emitter.gamma_rad},
        {"k_isc", s.emitter.k_isc},
        {"k_relax", s.emitter.k_relax},
        {"pump_rate_per_intensity", s.emitter.pump_rate_per_intensity},
        {"pump_intensity", s.pump.intensity},
        {"efficiency", s.efficiency},
        {"dark_rate", s.dark_rate},
        {"drive", s.drive == pm::DriveKind::thermal ? "thermal" : "coherent"},
        {"amplitude", s.amplitude},
        {"dt", s.dt},
        {"duration", s.duration},
        {"ensemble", s.ensemble},
        {"tau_bin", s.tau_bin},
        {"tau_max", s.tau_max},
        {"start_stride", s.start_stride},
    };
    std::ofstream f(ctx.path("run.json"), std::ios::binary);
    f << j.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"photon statistics of a single emitter on a vibrating oscillator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, input_path;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    int threads = 1;
    if (const char* env = std::getenv("PHOTOMECH_OUT")) out_dir = env;
    if (out_dir.empty()) out_dir = ".";

    app.add_option("--config", config_path, "scenario config file (INI sections)");
    app.add_option("--seed", seed_flag, "override the scenario seed")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--threads", threads, "worker count (results independent of this)")
        ->check(CLI::Range(1, 256));
    app.add_option("--out", out_dir, "output directory (default: $PHOTOMECH_OUT or .)");

    auto* c_modes = app.add_subcommand("modes", "Euler-Bernoulli cantilever mode table");
    auto* c_image = app.add_subcommand("image", "time-averaged fluorescence image");
    auto* c_eg2 = app.add_subcommand("emitter-g2", "stationary emitter autocorrelation");
    auto* c_sim = app.add_subcommand("simulate-g2", "Monte-Carlo g2 from a trajectory ensemble");
    auto* c_ana = app.add_subcommand("analytic-g2", "series-expansion g2 prediction");
    auto* c_aj = app.add_subcommand("aj-table", "expansion coefficients A_j");
    auto* c_stream = app.add_subcommand("photon-stream", "stochastic photon click stream");
    auto* c_corr = app.add_subcommand("correlate", "multi-start correlation of a click stream");
    auto* c_spec = app.add_subcommand("spectrum", "power spectrum of g2 - 1");
    auto* c_fit = app.add_subcommand("fit", "expansion-model fit of a g2 curve");
    c_corr->add_option("--input", input_path, "stream CSV (default: simulate internally)");
    c_spec->add_option("--input", input_path, "g2 CSV with tau_s,g2 columns")->required();
    c_fit->add_option("--input", input_path, "g2 CSV with tau_s,g2 columns")->required();

    CLI11_PARSE(app, argc, argv);

    RunContext ctx;
    ctx.out_dir = out_dir;
    ctx.threads = threads;
    ctx.config_path = config_path;

    const auto t0 = std::chrono::steady_clock::now();
    std::string subcommand;
    int rc = 0;
    try {
        try {
            if (config_path.empty()) {
                ctx.scenario.apply_auto_defaults();
                ctx.scenario.validate();
            } else {
                ctx.scenario = pm::load_scenario(config_path);
            }
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
        if (seed_set) ctx.scenario.seed = seed_flag;
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);

        if (c_modes->parsed()) subcommand = "modes", rc = cmd_modes(ctx);
        else if (c_image->parsed()) subcommand = "image", rc = cmd_image(ctx);
        else if (c_eg2->parsed()) subcommand = "emitter-g2", rc = cmd_emitter_g2(ctx);
        else if (c_sim->parsed()) subcommand = "simulate-g2", rc = cmd_simulate_g2(ctx);
        else if (c_ana->parsed()) subcommand = "analytic-g2", rc = cmd_analytic_g2(ctx);
        else if (c_aj->parsed()) subcommand = "aj-table", rc = cmd_aj_table(ctx);
        else if (c_stream->parsed()) subcommand = "photon-stream", rc = cmd_photon_stream(ctx);
        else if (c_corr->parsed()) subcommand = "correlate", rc = cmd_correlate(ctx, input_path);
        else if (c_spec->parsed()) subcommand = "spectrum", rc = cmd_spectrum(ctx, input_path);
        else if (c_fit->parsed()) subcommand = "fit", rc = cmd_fit(ctx, input_path);
    } catch (const pm::ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        const bool nonconv = msg.find("converge") != std::string::npos ||
                             msg.find("series") != std::string::npos;
        return nonconv ? 3 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (rc == 0) write_manifest(ctx, subcommand, wall);
    return rc;
}
