#include <catch_amalgamated.hpp>

#include "tbench/analysis.hpp"
#include "tbench/circuit.hpp"
#include "tbench/solver.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace tbench;
using Catch::Approx;

namespace {

constexpr Real kPi = std::numbers::pi;

// Largest |sim - oracle(t)| over all samples of a probe.
Real max_error(const WaveformSet& waves, const std::string& probe, const auto& oracle) {
    Real worst = 0.0;
    const auto s = waves.samples(probe);
    for (std::size_t i = 0; i < s.size(); ++i) {
        worst = std::max(worst, std::abs(s[i] - oracle(waves.time_at(i))));
    }
    return worst;
}

} // namespace

TEST_CASE("companion stamps follow the trapezoidal formulas", "[solver]") {
    const auto l1 = companion_inductor(12.45e-3, 1e-6, 0.0, 0.0);
    CHECK(l1.g == Approx(4.0161e-5).epsilon(1e-4));
    CHECK(l1.i_hist == 0.0);

    const auto l2 = companion_inductor(10e-3, 10e-6, 100.0, 1.0);
    CHECK(l2.g == Approx(5e-4));
    CHECK(l2.i_hist == Approx(1.05));

    const auto c1 = companion_capacitor(13.2e-9, 1e-6, 0.0, 0.0);
    CHECK(c1.g == Approx(0.0264));
    CHECK(c1.i_hist == 0.0);

    const auto c2 = companion_capacitor(1e-6, 1e-6, 100.0, 0.0);
    CHECK(c2.g == Approx(2.0));
    CHECK(c2.i_hist == Approx(-200.0));

    CHECK(companion_capacitor(118e-9, 1e-6, 0.0, 0.0).g == Approx(0.236));

    CHECK_THROWS_AS(companion_inductor(-1.0, 1e-6, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(companion_capacitor(1e-9, 0.0, 0.0, 0.0), std::invalid_argument);

    CHECK(bergeron_history(40.0, 0.0, 0.0) == 0.0);
    CHECK(bergeron_history(40.0, 100.0, 0.0) == Approx(-2.5));
}

TEST_CASE("dc source with a resistor obeys Ohm's law", "[solver]") {
    Circuit c;
    c.add(VoltageSource{1, 10.0});
    const auto rid = c.add(Resistor{1, kGround, 100.0});
    c.add_probe(Probe::at_node("v1", 1));
    c.add_probe(Probe::at_branch("i_r", rid));
    c.add_probe(Probe::at_branch("i_src", 0));

    const auto waves = run(c, 1e-6, 1e-5);
    CHECK(waves.samples("v1").back() == Approx(10.0).epsilon(1e-9));
    CHECK(waves.samples("i_r").back() == Approx(0.1).epsilon(1e-9));
    CHECK(waves.samples("i_src").back() == Approx(0.1).epsilon(1e-9));
}

TEST_CASE("equal-resistor divider sits at half the source", "[solver]") {
    Circuit c;
    c.add(VoltageSource{1, 10.0});
    c.add(Resistor{1, 2, 470.0});
    c.add(Resistor{2, kGround, 470.0});
    c.add_probe(Probe::at_node("mid", 2));
    const auto waves = run(c, 1e-6, 1e-5);
    CHECK(waves.samples("mid").back() == Approx(5.0).epsilon(1e-9));
}

TEST_CASE("rc step response matches the closed form", "[solver]") {
    Circuit c;
    c.add(VoltageSource{1, 1.0});
    c.add(Resistor{1, 2, 100.0});
    c.add(Capacitor{2, kGround, 1e-6});
    c.add_probe(Probe::at_node("v_c", 2));
    const auto waves = run(c, 1e-6, 1e-3);

    const auto s = waves.samples("v_c");
    const Real v100 = s[100]; // t = 100 us = one time constant
    CHECK(v100 == Approx(1.0 - std::exp(-1.0)).epsilon(2e-3));
}

TEST_CASE("rl step current follows the 1-exp law", "[solver]") {
    Circuit c;
    c.add(VoltageSource{1, 1.0});
    c.add(Resistor{1, 2, 200.0});
    const auto lid = c.add(Inductor{2, kGround, 15e-3});
    c.add_probe(Probe::at_branch("i", lid));
    const auto waves = run(c, 1e-7, 3e-4);

    const auto s = waves.samples("i");
    const Real i75 = s[750]; // t = 75 us = L/R
    CHECK(i75 == Approx((1.0 / 200.0) * (1.0 - std::exp(-1.0))).epsilon(1e-3));
}

TEST_CASE("undamped lc step doubles the source", "[solver]") {
    Circuit c;
    c.add(VoltageSource{1, 1.0});
    c.add(Inductor{1, 2, 12.45e-3});
    c.add(Capacitor{2, kGround, 13.2e-9});
    c.add_probe(Probe::at_node("v_c", 2));

    const Real t0 = 1.0 / natural_frequency(12.45e-3, 13.2e-9);
    const Real dt = t0 / 220.0;
    const auto waves = run(c, dt, 3.0 * t0);

    Real peak = 0.0;
    Real t_peak = 0.0;
    const auto s = waves.samples("v_c");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] > peak) {
            peak = s[i];
            t_peak = waves.time_at(i);
        }
    }
    CHECK(peak == Approx(2.0).epsilon(5e-3));
    CHECK(t_peak == Approx(kPi * std::sqrt(12.45e-3 * 13.2e-9)).epsilon(0.05));
}

TEST_CASE("trapezoidal rule is second-order on the damped rlc oracle", "[solver]") {
    const Real r = 50.0, l = 10e-3, cf = 100e-9;
    auto build = [&] {
        Circuit c;
        c.add(VoltageSource{1, 1.0});
        c.add(Resistor{1, 2, r});
        c.add(Inductor{2, 3, l});
        c.add(Capacitor{3, kGround, cf});
        c.add_probe(Probe::at_node("v_c", 3));
        return c;
    };
    const auto oracle = [&](Real t) { return lc_step_oracle(1.0, l, cf, r, t); };

    const Circuit c1 = build();
    const Real err_h = max_error(run(c1, 2e-6, 2e-3), "v_c", oracle);
    const Circuit c2 = build();
    const Real err_h2 = max_error(run(c2, 1e-6, 2e-3), "v_c", oracle);

    INFO("err(h) = " << err_h << ", err(h/2) = " << err_h2);
    CHECK(err_h2 <= 0.3 * err_h);
}

TEST_CASE("undamped lc oscillation amplitude survives 50 cycles", "[solver]") {
    const Real l = 1e-3, cf = 1e-6;
    Circuit c;
    c.add(VoltageSource{1, 1.0});
    c.add(Inductor{1, 2, l});
    c.add(Capacitor{2, kGround, cf});
    c.add_probe(Probe::at_node("v_c", 2));

    const Real t0 = 2.0 * kPi * std::sqrt(l * cf);
    const auto waves = run(c, t0 / 256.0, 51.0 * t0);

    // Peak of the first cycle vs peak of the 50th cycle.
    const auto s = waves.samples("v_c");
    const std::size_t per = 256;
    Real first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < per; ++i) first = std::max(first, s[i]);
    for (std::size_t i = 49 * per; i < 50 * per && i < s.size(); ++i) last = std::max(last, s[i]);
    CHECK(std::abs(last - first) / first < 1e-3);
}

TEST_CASE("open-ended line matches the lattice oracle over 3 round trips", "[solver][line]") {
    const Real z = 40.0, tau = 10e-6, dt = 0.5e-6;
    Circuit c;
    c.add(VoltageSource{1, 1.0});
    c.add(BergeronLine{1, 2, z, tau});
    c.add_probe(Probe::at_node("v_far", 2));
    const auto waves = run(c, dt, 6.2 * tau);

    const auto s = waves.samples("v_far");
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Real t = waves.time_at(i);
        // Skip samples next to a wavefront arrival (t = tau, 3 tau, 5 tau).
        bool near_edge = false;
        for (int k = 1; k <= 7; k += 2) {
            if (std::abs(t - k * tau) <= 2.0 * dt) near_edge = true;
        }
        if (near_edge) continue;
        const Real expected = lattice_oracle(z, tau, 0.0, 1.0, t);
        CHECK(std::abs(s[i] - expected) <= 0.02 * 2.0);
    }
}

TEST_CASE("matched termination shows no reflection", "[solver][line]") {
    const Real z = 40.0, tau = 10.3e-6, dt = 1e-6; // non-integer tau/dt
    Circuit c;
    c.add(VoltageSource{1, 1.0});
    c.add(BergeronLine{1, 2, z, tau});
    c.add(Resistor{2, kGround, z});
    c.add_probe(Probe::at_node("v_far", 2));
    const auto waves = run(c, dt, 8.0 * tau);

    const auto s = waves.samples("v_far");
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Real t = waves.time_at(i);
        if (t < tau + 3.0 * dt) {
            if (t < tau - dt) CHECK(std::abs(s[i]) < 1e-9);
        } else {
            CHECK(s[i] == Approx(0.5).margin(0.005)); // interpolation ripple < 1%
        }
    }
}

TEST_CASE("shorted far end reflects with inverted sign", "[solver][line]") {
    const Real z = 40.0, tau = 10e-6, dt = 0.5e-6;
    Circuit c;
    c.add(VoltageSource{1, 1.0, 0.0, 0.0, z}); // matched source absorbs the return
    c.add(BergeronLine{1, 2, z, tau});
    c.add(Resistor{2, kGround, 1e-4});
    c.add_probe(Probe::at_node("v_send", 1));
    const auto waves = run(c, dt, 4.0 * tau);

    const auto s = waves.samples("v_send");
    for (std::size_t i = 1; i < s.size(); ++i) {
        const Real t = waves.time_at(i);
        if (t > dt && t < 2.0 * tau - 2.0 * dt) {
            CHECK(s[i] == Approx(0.5).margin(0.01));
        }
        if (t > 2.0 * tau + 2.0 * dt) {
            CHECK(std::abs(s[i]) < 0.01);
        }
    }
}

TEST_CASE("lumped line losses carry the dc drop", "[solver][line]") {
    Circuit c;
    c.add(VoltageSource{1, 1.0});
    c.add(BergeronLine{1, 2, 40.0, 10e-6, 8.0});
    c.add(Resistor{2, kGround, 72.0});
    c.add_probe(Probe::at_node("v_load", 2));
    const auto waves = run(c, 1e-6, 2e-3);
    CHECK(waves.samples("v_load").back() == Approx(72.0 / 80.0).epsilon(1e-3));
}

TEST_CASE("stored energy decays once sources are removed", "[solver][property]") {
    Circuit c;
    const Real l = 1e-3, cf = 2e-6, r = 25.0;
    const auto lid = c.add(Inductor{1, kGround, l, 1.5});
    c.add(Capacitor{1, kGround, cf, 5.0});
    c.add(Resistor{1, kGround, r});
    c.add_probe(Probe::at_node("v", 1));
    c.add_probe(Probe::at_branch("i_l", lid));
    const auto waves = run(c, 1e-6, 2e-3);

    const auto v = waves.samples("v");
    const auto il = waves.samples("i_l");
    Real prev = std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Real e = 0.5 * l * il[i] * il[i] + 0.5 * cf * v[i] * v[i];
        CHECK(e <= prev * (1.0 + 1e-12));
        prev = e;
    }
}

TEST_CASE("outputs scale exactly with source amplitude", "[solver][property]") {
    auto build = [](Real amp) {
        Circuit c;
        c.add(VoltageSource{1, amp, 50.0, 0.3, 5.0, 1e-3});
        c.add(Switch{1, 2, 2e-5});
        c.add(BergeronLine{2, 3, 40.0, 3e-5});
        c.add(Inductor{3, 4, 10e-3});
        c.add(Capacitor{4, kGround, 50e-9});
        c.add(Resistor{3, kGround, 300.0});
        c.add_probe(Probe::at_node("v3", 3));
        c.add_probe(Probe::at_node("v4", 4));
        return c;
    };

    const auto base = run(build(100.0), 1e-6, 1e-3);
    const auto doubled = run(build(200.0), 1e-6, 1e-3);
    const auto scaled = run(build(170.0), 1e-6, 1e-3);

    for (const auto& probe : {"v3", "v4"}) {
        const auto b = base.samples(probe);
        const auto d = doubled.samples(probe);
        const auto s = scaled.samples(probe);
        for (std::size_t i = 0; i < b.size(); ++i) {
            REQUIRE(d[i] == 2.0 * b[i]); // power-of-two scaling is bit-exact
            REQUIRE(s[i] == Approx(1.7 * b[i]).margin(1e-12 * std::abs(b[i]) + 1e-300));
        }
    }
}

TEST_CASE("identical runs are bit-identical", "[solver][property]") {
    auto build = [] {
        Circuit c;
        c.add(VoltageSource{1, 122474.0, 50.0, 0.0, 20.0});
        c.add(Switch{1, 2, 1.7e-5});
        c.add(BergeronLine{2, 3, 40.0, 4.733e-5});
        c.add(Inductor{3, 4, 101.6e-3});
        c.add(Capacitor{4, kGround, 13.2e-9});
        c.add_probe(Probe::at_node("v3", 3));
        c.add_probe(Probe::at_node("v4", 4));
        return c;
    };
    const auto a = run(build(), 1e-6, 2e-3);
    const auto b = run(build(), 1e-6, 2e-3);
    for (std::size_t p = 0; p < a.probe_names().size(); ++p) {
        const auto sa = a.samples(p);
        const auto sb = b.samples(p);
        REQUIRE(sa.size() == sb.size());
        for (std::size_t i = 0; i < sa.size(); ++i) REQUIRE(sa[i] == sb[i]);
    }
}

TEST_CASE("switch closes at the first step at or after t_close", "[solver]") {
    Circuit c;
    c.add(VoltageSource{1, 1.0});
    c.add(Switch{1, 2, 10.2e-6});
    c.add(Resistor{2, kGround, 1.0});
    c.add_probe(Probe::at_node("v2", 2));
    const auto waves = run(c, 1e-6, 2e-5);

    const auto s = waves.samples("v2");
    CHECK(std::abs(s[10]) < 1e-6);
    CHECK(s[11] > 0.99);
}

TEST_CASE("timestep is refused when a line travel time is under-resolved", "[solver]") {
    Circuit c;
    c.add(VoltageSource{1, 1.0});
    c.add(BergeronLine{1, 2, 40.0, 1e-5});
    c.add_probe(Probe::at_node("v2", 2));
    CHECK_THROWS_WITH(run(c, 2e-6, 1e-3), Catch::Matchers::ContainsSubstring("largest compliant dt"));
    CHECK_NOTHROW(run(c, 1e-6, 1e-4));
}

TEST_CASE("contradictory constraints raise a numeric fault", "[solver]") {
    Circuit c;
    c.add(VoltageSource{1, 10.0});
    c.add(VoltageSource{1, 5.0});
    c.add(Resistor{1, kGround, 10.0});
    c.add_probe(Probe::at_node("v1", 1));
    CHECK_THROWS_AS(run(c, 1e-6, 1e-4), NumericFault);
}

TEST_CASE("initial conditions relax with the analytic time constants", "[solver]") {
    SECTION("charged capacitor into a resistor") {
        Circuit c;
        c.add(Capacitor{1, kGround, 1e-6, 5.0});
        c.add(Resistor{1, kGround, 100.0});
        c.add_probe(Probe::at_node("v", 1));
        const auto waves = run(c, 1e-6, 5e-4);
        const auto s = waves.samples("v");
        CHECK(s[0] == Approx(5.0).epsilon(1e-6));
        CHECK(s[100] == Approx(5.0 * std::exp(-1.0)).epsilon(2e-3));
    }
    SECTION("inductor current into a resistor") {
        Circuit c;
        const auto lid = c.add(Inductor{1, kGround, 1e-3, 2.0});
        c.add(Resistor{1, kGround, 10.0});
        c.add_probe(Probe::at_branch("i", lid));
        const auto waves = run(c, 1e-6, 5e-4);
        const auto s = waves.samples("i");
        CHECK(s[0] == Approx(2.0));
        CHECK(s[100] == Approx(2.0 * std::exp(-1.0)).epsilon(2e-3));
    }
}

TEST_CASE("saturable inductor integrates a 1-cos flux from a voltage zero", "[solver][saturation]") {
    // Sine source (cosine with -pi/2 phase) starting at a rising voltage zero.
    const Real l = 10.0, omega = 2.0 * kPi * 50.0;

    SECTION("knee above 2 V/omega never saturates") {
        Circuit c;
        c.add(VoltageSource{1, 1.0, 50.0, -kPi / 2.0});
        const auto sid = c.add(SaturableInductor{1, kGround, l, l / 100.0, 2.5 / omega});
        c.add_probe(Probe::at_branch("i", sid));
        const auto waves = run(c, 1e-5, 60e-3);

        // i = flux / l with flux = (1 - cos(w t)) / w; peak 2/(w l).
        Real peak = 0.0;
        for (const Real i : waves.samples("i")) peak = std::max(peak, i);
        CHECK(peak == Approx(2.0 / (omega * l)).epsilon(1e-3));
        Real trough = 1.0;
        for (const Real i : waves.samples("i")) trough = std::min(trough, i);
        CHECK(trough >= -1e-6); // offset sinusoid stays unipolar
    }

    SECTION("low knee produces unipolar inrush pulses against an independent oracle") {
        const Real knee = 1.2 / omega, l_sat = l / 100.0, r_src = 1.0;
        Circuit c;
        c.add(VoltageSource{1, 1.0, 50.0, -kPi / 2.0, r_src});
        const auto sid = c.add(SaturableInductor{1, kGround, l, l_sat, knee});
        c.add_probe(Probe::at_branch("i", sid));
        const Real dt = 1e-5;
        const auto waves = run(c, dt, 40e-3);

        // Piecewise-linear flux-current oracle integrated at 1e-7 s.
        auto i_of_flux = [&](Real flux) {
            if (std::abs(flux) <= knee) return flux / l;
            const Real sign = flux >= 0.0 ? 1.0 : -1.0;
            return sign * knee / l + (flux - sign * knee) / l_sat;
        };
        const Real h = 1e-7;
        Real flux = 0.0;
        Real oracle_peak = 0.0;
        std::vector<Real> oracle_at_samples{0.0};
        for (long n = 0; static_cast<Real>(n) * h < 40e-3 - h / 2; ++n) {
            const Real t_mid = (static_cast<Real>(n) + 0.5) * h;
            // Semi-implicit midpoint on d(flux)/dt = e(t) - r * i(flux).
            const Real e_mid = std::sin(omega * t_mid);
            flux += h * (e_mid - r_src * i_of_flux(flux));
            oracle_peak = std::max(oracle_peak, i_of_flux(flux));
            const Real t_next = static_cast<Real>(n + 1) * h;
            if (std::abs(t_next / dt - std::round(t_next / dt)) < 1e-6) {
                oracle_at_samples.push_back(i_of_flux(flux));
            }
        }

        const auto s = waves.samples("i");
        Real sim_peak = 0.0, sim_trough = 0.0;
        for (const Real i : s) {
            sim_peak = std::max(sim_peak, i);
            sim_trough = std::min(sim_trough, i);
        }
        const Real unsaturated_peak = 2.0 / (omega * l);
        CHECK(sim_peak > 10.0 * unsaturated_peak);
        CHECK(sim_peak == Approx(oracle_peak).epsilon(0.05));
        CHECK(sim_trough > -0.05 * sim_peak); // pulses are unipolar

        REQUIRE(oracle_at_samples.size() >= s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(s[i] == Approx(oracle_at_samples[i]).margin(0.05 * oracle_peak));
        }
    }
}
