#include <catch_amalgamated.hpp>

#include "tbench/analysis.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace tbench;
using Catch::Approx;

namespace {

std::vector<Real> sine(Real freq, Real amp, Real dt, std::size_t n, Real phase = 0.0) {
    std::vector<Real> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<Real>(i) * dt + phase);
    }
    return s;
}

} // namespace

TEST_CASE("natural frequency matches the three reference L-C pairs", "[analysis]") {
    CHECK(natural_frequency(12.45e-3, 13.2e-9) == Approx(12.4e3).epsilon(0.01));
    CHECK(natural_frequency(12.45e-3, 13.2e-9) == Approx(12415.0).epsilon(1e-3));
    CHECK(natural_frequency(12.45e-3, 8.8e-9) == Approx(15.2e3).epsilon(0.01));
    CHECK(natural_frequency(15.13e-3, 118e-9) == Approx(3.76e3).epsilon(0.02));
    CHECK_THROWS_AS(natural_frequency(0.0, 1e-9), std::invalid_argument);
    CHECK_THROWS_AS(natural_frequency(1e-3, -1.0), std::invalid_argument);
}

TEST_CASE("travel metrics expose both period conventions", "[analysis]") {
    const auto cable = travel_metrics(7100.0, 150e6);
    CHECK(cable.tau_s == Approx(47.333e-6).epsilon(1e-4));
    CHECK(cable.cycle_s == Approx(189.33e-6).epsilon(1e-4));
    CHECK(cable.f_cycle_hz == Approx(5282.0).epsilon(1e-3));

    // Short line fed through a high impedance: the 2*tau round trip governs.
    const auto line = travel_metrics(4000.0, 285.7e6);
    CHECK(line.tau_s == Approx(14e-6).epsilon(1e-3));
    CHECK(line.round_trip_s == Approx(28e-6).epsilon(1e-3));
    CHECK(line.f_round_trip_hz == Approx(35.7e3).epsilon(1e-2));

    const auto unit = travel_metrics(1.0, 1.0);
    CHECK(unit.tau_s == Approx(1.0));
    CHECK(unit.cycle_s == Approx(4.0));
    CHECK(unit.f_cycle_hz == Approx(0.25));

    CHECK_THROWS_AS(travel_metrics(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("dominant frequency of synthetic signals", "[analysis]") {
    const Real dt = 1e-6;

    SECTION("pure 5 kHz sine over a 10 ms window") {
        const auto s = sine(5e3, 1.0, dt, 10000);
        const auto peak = dominant_frequency(s, dt, 0.0, 0.0, 10e-3);
        REQUIRE(peak);
        CHECK(peak->frequency_hz == Approx(5000.0).margin(peak->bin_width_hz / 10.0));
        CHECK(peak->amplitude == Approx(1.0).epsilon(0.05));
    }

    SECTION("5 kHz dominates a weaker 12 kHz component") {
        auto s = sine(5e3, 1.0, dt, 10000);
        const auto other = sine(12e3, 0.3, dt, 10000);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += other[i];
        const auto peak = dominant_frequency(s, dt, 0.0, 0.0, 10e-3);
        REQUIRE(peak);
        CHECK(peak->frequency_hz == Approx(5000.0).margin(2.0 * peak->bin_width_hz));
    }

    SECTION("frequency floor removes the power-frequency component") {
        auto s = sine(50.0, 10.0, 1e-5, 40000);
        const auto ring = sine(3.77e3, 0.5, 1e-5, 40000);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += ring[i];
        const auto peak = dominant_frequency(s, 1e-5, 0.0, 0.0, 0.4);
        REQUIRE(peak);
        CHECK(peak->frequency_hz == Approx(3770.0).epsilon(0.01));
    }

    SECTION("all-zero signal reports no peak") {
        const std::vector<Real> s(1000, 0.0);
        CHECK_FALSE(dominant_frequency(s, dt, 0.0, 0.0, 1e-3));
    }

    SECTION("window too small is rejected") {
        const auto s = sine(5e3, 1.0, dt, 1000);
        CHECK_THROWS_AS(dominant_frequency(s, dt, 0.0, 0.0, 10 * dt), std::invalid_argument);
    }
}

TEST_CASE("dominant frequency recovers random sinusoids within half a bin", "[analysis][property]") {
    std::mt19937 rng(7321);
    std::uniform_real_distribution<Real> freq_dist(1e3, 50e3);
    std::uniform_real_distribution<Real> phase_dist(0.0, 2.0 * std::numbers::pi);
    for (int trial = 0; trial < 25; ++trial) {
        const Real f = freq_dist(rng);
        const Real dt = 1.0 / (f * 25.0);          // 25x oversampled
        const std::size_t n = static_cast<std::size_t>(std::ceil(30.0 / (f * dt)));
        const auto s = sine(f, 2.0, dt, n, phase_dist(rng));
        const auto peak = dominant_frequency(s, dt, 0.0, 0.0, static_cast<Real>(n) * dt, 100.0);
        REQUIRE(peak);
        CHECK(std::abs(peak->frequency_hz - f) <= 0.5 * peak->bin_width_hz);
    }
}

TEST_CASE("peak overvoltage uses the sqrt(2/3) base", "[analysis]") {
    std::vector<Real> flat(100, 122474.5);
    const auto rep = peak_overvoltage(flat, 1e-6, 0.0, 150e3);
    CHECK(rep.base_peak == Approx(122474.487).epsilon(1e-6));
    CHECK(rep.per_unit == Approx(1.0).epsilon(1e-4));

    std::vector<Real> wave = {0.0, -3.0, 2.0, -5.0, 1.0};
    const auto rep2 = peak_overvoltage(wave, 0.5, 1.0, 52.5e3);
    CHECK(rep2.base_peak == Approx(42866.07).epsilon(1e-4));
    CHECK(rep2.peak_abs == Approx(5.0));
    CHECK(rep2.time_of_peak_s == Approx(1.0 + 3 * 0.5));
    CHECK(rep2.per_unit == Approx(5.0 / 42866.07).epsilon(1e-6));

    CHECK_THROWS_AS(peak_overvoltage(flat, 1e-6, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("lattice oracle reproduces hand-computed reflection sums", "[analysis]") {
    const Real tau = 10e-6;

    SECTION("ideal source alternates 0/2/0") {
        CHECK(lattice_oracle(40.0, tau, 0.0, 1.0, 0.5 * tau) == Approx(0.0));
        CHECK(lattice_oracle(40.0, tau, 0.0, 1.0, 1.5 * tau) == Approx(2.0));
        CHECK(lattice_oracle(40.0, tau, 0.0, 1.0, 3.5 * tau) == Approx(0.0).margin(1e-12));
        CHECK(lattice_oracle(40.0, tau, 0.0, 1.0, 5.5 * tau) == Approx(2.0));
    }

    SECTION("matched source settles at the step forever") {
        for (const Real t : {1.1 * tau, 3.0 * tau, 50.0 * tau}) {
            CHECK(lattice_oracle(30.0, tau, 30.0, 1.0, t) == Approx(1.0));
        }
    }

    SECTION("two-term sum for r_source = 10, z_c = 30") {
        CHECK(lattice_oracle(30.0, tau, 10.0, 1.0, 1.5 * tau) == Approx(1.5));
        CHECK(lattice_oracle(30.0, tau, 10.0, 1.0, 3.5 * tau) == Approx(0.75));
    }

    SECTION("telescoping property for the ideal source") {
        for (int k = 0; k < 8; ++k) {
            const Real t = (2.0 * k + 1.5) * tau;
            const Real expected = (k % 2 == 0) ? 2.0 : 0.0;
            CHECK(lattice_oracle(75.0, tau, 0.0, 3.0, t) == Approx(3.0 * expected).margin(1e-9));
        }
    }
}

TEST_CASE("series LC step oracle", "[analysis]") {
    const Real l = 12.45e-3, c = 13.2e-9;
    const Real t_peak = std::numbers::pi * std::sqrt(l * c);

    CHECK(t_peak == Approx(40.3e-6).epsilon(1e-2));
    CHECK(lc_step_oracle(67e3, l, c, 0.0, t_peak) == Approx(134e3).epsilon(1e-6));
    CHECK(lc_step_oracle(1.0, l, c, 0.0, 0.0) == Approx(0.0));
    // Damped response settles to the step.
    CHECK(lc_step_oracle(1.0, l, c, 100.0, 1.0) == Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(lc_step_oracle(1.0, 1e-3, 1e-6, 1000.0, 1e-3), std::invalid_argument);

    SECTION("half-period antisymmetry about the step level") {
        for (const Real t : {0.0, 3e-6, 11e-6, 27e-6, 39e-6}) {
            const Real sum = lc_step_oracle(1.0, l, c, 0.0, t) +
                             lc_step_oracle(1.0, l, c, 0.0, t + t_peak);
            CHECK(sum == Approx(2.0).margin(1e-9));
        }
    }
}

TEST_CASE("rl exponential oracle", "[analysis]") {
    const Real l = 15e-3, z = 200.0;
    const Real tau = l / z;
    CHECK(tau == Approx(75e-6));
    CHECK(rl_exp_oracle(1.0, l, z, tau) == Approx(1.0 - 1.0 / std::numbers::e).epsilon(1e-9));
    CHECK(rl_exp_oracle(1.0, l, z, 0.0) == Approx(0.0));
    CHECK(rl_exp_oracle(2.5, l, z, 10.0) == Approx(2.5));
}
