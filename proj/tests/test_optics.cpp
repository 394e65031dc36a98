#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "photomech/constants.hpp"
#include "photomech/optics.hpp"

using namespace photomech;
using Catch::Approx;

TEST_CASE("gaussian psf evaluation") {
    const auto psf = Psf::gaussian(0.0, 380e-9);
    CHECK(psf_eval(psf, 0.0) == 1.0);
    CHECK(psf_eval(psf, 380e-9 / std::sqrt(2.0)) == Approx(std::exp(-1.0)).epsilon(1e-12));
    const auto off = Psf::gaussian(100e-9, 380e-9);
    CHECK(psf_eval(off, 100e-9) == 1.0);
}

TEST_CASE("tabulated psf interpolates and rejects out-of-range queries") {
    const auto psf = Psf::tabulated({0.0, 1.0, 2.0}, {0.0, 1.0, 0.5});
    CHECK(psf_eval(psf, 0.5) == Approx(0.5));
    CHECK(psf_eval(psf, 1.5) == Approx(0.75));
    CHECK(psf_eval(psf, 2.0) == Approx(0.5));
    CHECK_THROWS_AS(psf_eval(psf, 2.1), std::out_of_range);
    CHECK_THROWS_AS(Psf::tabulated({0.0, 1.0}, {0.0, 1.5}), std::invalid_argument);
    CHECK_THROWS_AS(Psf::tabulated({1.0, 0.0}, {0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("mean flux agrees with direct quadrature over the thermal distribution") {
    const double w0 = 380e-9;
    for (const double dx : {0.05 * w0, 0.3 * w0, 1.0 * w0}) {
        for (const double center : {0.0, 0.5 * w0, 1.2 * w0}) {
            const auto psf = Psf::gaussian(center, w0);
            // trapezoid over +-8 sigma of the position distribution
            const int n = 20000;
            const double lim = 8.0 * dx;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const double x = -lim + 2.0 * lim * (i + 0.5) / n;
                const double p = std::exp(-x * x / (2.0 * dx * dx)) /
                                 (dx * std::sqrt(2.0 * pi));
                acc += p * psf_eval(psf, x);
            }
            acc *= 2.0 * lim / n;
            REQUIRE(mean_flux(psf, dx) == Approx(acc).epsilon(1e-6));
        }
    }
}

TEST_CASE("mean flux limits") {
    const double w0 = 380e-9;
    CHECK(mean_flux(Psf::gaussian(0.0, w0), 0.0) == 1.0);
    // vanishing spread recovers the bare psf at the detector center
    const double c = 0.7 * w0;
    CHECK(mean_flux(Psf::gaussian(c, w0), 1e-15) ==
          Approx(std::exp(-2.0 * c * c / (w0 * w0))).epsilon(1e-9));
    // theta = 1 on-axis flux drop: 1/sqrt(5)
    CHECK(mean_flux(Psf::gaussian(0.0, w0), w0) == Approx(1.0 / std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("thermal image width follows the convolution rule") {
    CHECK(thermal_image_width(380e-9, 0.0) == Approx(190e-9).epsilon(1e-12));
    CHECK(thermal_image_width(380e-9, 380e-9) ==
          Approx(std::sqrt(0.25 + 1.0) * 380e-9).epsilon(1e-12));
}

TEST_CASE("coherent drive image: symmetry, double-hump onset, phase-grid convergence") {
    const double w0 = 380e-9;
    const double amp = 1.5 * w0;
    std::vector<double> x;
    for (int i = -60; i <= 60; ++i) x.push_back(static_cast<double>(i) * 0.05 * w0);
    const auto img = coherent_drive_image(x, 0.0, amp, w0, 256);
    const auto fine = coherent_drive_image(x, 0.0, amp, w0, 1024);
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(img[i] == Approx(img[n - 1 - i]).margin(1e-12));       // even in x
        CHECK(img[i] == Approx(fine[i]).margin(1e-10));              // converged in phase
    }
    // turning points of the cosine pile up probability near +-amp
    const auto at = [&](double xv) {
        return coherent_drive_image({xv}, 0.0, amp, w0)[0];
    };
    CHECK(at(amp) > at(0.0));

    SECTION("zero amplitude reduces to the bare psf") {
        const auto still = coherent_drive_image(x, 0.0, 0.0, w0);
        for (std::size_t i = 0; i < n; ++i)
            REQUIRE(still[i] == Approx(std::exp(-2.0 * x[i] * x[i] / (w0 * w0))).margin(1e-14));
    }
}

TEST_CASE("pump profiles") {
    const auto broad = PumpProfile::broad(2.0);
    CHECK(broad.intensity_at(1.0) == 2.0);
    const auto g = PumpProfile::gaussian(0.0, 380e-9, 1.0);
    CHECK(g.intensity_at(0.0) == 1.0);
    CHECK(g.intensity_at(380e-9 / std::sqrt(2.0)) == Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(PumpProfile::gaussian(0.0, 0.0), std::invalid_argument);
}
