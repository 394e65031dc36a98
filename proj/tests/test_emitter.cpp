#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "photomech/emitter.hpp"
#include "oracles.hpp"

using namespace photomech;
using Catch::Approx;

TEST_CASE("steady state is the fixed point of the rate equations") {
    EmitterParams ep;
    const double pump = 5e6;
    const auto ss = steady_state(ep, pump);
    CHECK(ss.sigma_g + ss.sigma_e + ss.sigma_m == Approx(1.0).margin(1e-14));
    const auto d = detail::rate_derivative(ep, pump, {ss.sigma_g, ss.sigma_e, ss.sigma_m});
    for (double v : d) CHECK(std::abs(v) < 1e-8 * ep.gamma_rad);

    SECTION("zero pump parks the emitter in the ground state") {
        const auto g = steady_state(ep, 0.0);
        CHECK(g.sigma_g == 1.0);
        CHECK(g.sigma_e == 0.0);
    }
}

TEST_CASE("step response converges to the steady state") {
    EmitterParams ep;
    const double pump = 1e7;
    const double dt = 0.02 / ep.max_rate(pump);
    const auto se = step_response_constant(ep, pump, 20.0 / ep.k_relax, dt);
    CHECK(se.front() == 0.0);
    CHECK(se.back() == Approx(steady_state(ep, pump).sigma_e).epsilon(1e-6));
}

TEST_CASE("constant-pump response matches the matrix exponential to 1e-8") {
    EmitterParams ep;
    const double pump = 1e7;
    const double dt = 0.02 / ep.max_rate(pump);
    const auto se = step_response_constant(ep, pump, 2e-6, dt);
    const auto gen = oracles::rate_generator(pump, ep.gamma_rad, ep.k_isc, ep.k_relax);
    for (std::size_t i : {10UL, 100UL, 500UL, se.size() - 1}) {
        const double t = static_cast<double>(i) * dt;
        oracles::Mat3 at = gen;
        for (auto& row : at)
            for (double& v : row) v *= t;
        const auto pops = oracles::apply(oracles::expm(at), {1.0, 0.0, 0.0});
        REQUIRE(std::abs(se[i] - pops[1]) < 1e-8);
    }
}

TEST_CASE("population sum drift stays below 1e-9 per million steps") {
    EmitterParams ep;
    const double pump = 1e7;
    const double dt = 0.05 / ep.max_rate(pump);
    std::array<double, 3> s{1.0, 0.0, 0.0};
    double worst = 0.0;
    for (int i = 0; i < 1000000; ++i) {
        s = detail::rk4_step(ep, pump, pump, pump, s, dt);
        worst = std::max(worst, std::abs(s[0] + s[1] + s[2] - 1.0));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("rate equations are linear in the initial condition") {
    EmitterParams ep;
    const double pump = 8e6;
    const double dt = 1e-9;
    std::array<double, 3> a{1.0, 0.0, 0.0}, b{0.2, 0.5, 0.3};
    std::array<double, 3> mix{0.6 * a[0] + 0.4 * b[0], 0.6 * a[1] + 0.4 * b[1],
                              0.6 * a[2] + 0.4 * b[2]};
    for (int i = 0; i < 200; ++i) {
        a = detail::rk4_step(ep, pump, pump, pump, a, dt);
        b = detail::rk4_step(ep, pump, pump, pump, b, dt);
        mix = detail::rk4_step(ep, pump, pump, pump, mix, dt);
    }
    for (int k = 0; k < 3; ++k)
        REQUIRE(std::abs(mix[k] - (0.6 * a[k] + 0.4 * b[k])) < 1e-10);
}

TEST_CASE("stationary g2: antibunched at zero, bunched shoulder, unit tail") {
    EmitterParams ep;
    const double pump = 1e7;
    std::vector<double> tau;
    for (int i = 0; i <= 400; ++i) tau.push_back(static_cast<double>(i) * 5e-9);
    const auto g2 = stationary_g2(ep, pump, tau);
    CHECK(g2.front() < 1e-3);
    CHECK(g2.back() == Approx(1.0).epsilon(1e-3));
    // metastable shelving raises g2 above 1 at intermediate delay
    const double mid = g2[40];  // 200 ns
    CHECK(mid > 1.0);
    // monotone initial rise over the first fraction of the excited-state lifetime
    const double rise_end = 0.5 / (pump + ep.gamma_rad);
    for (std::size_t i = 1; i < tau.size() && tau[i] <= rise_end; ++i) CHECK(g2[i] >= g2[i - 1]);
}

TEST_CASE("step guards") {
    EmitterParams ep;
    CHECK_THROWS_AS(step_response_constant(ep, 1e7, 1e-6, 0.2 / ep.gamma_rad),
                    std::invalid_argument);
    EmitterParams bad;
    bad.gamma_rad = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(stationary_g2(ep, 0.0, {0.0}), std::invalid_argument);
}
