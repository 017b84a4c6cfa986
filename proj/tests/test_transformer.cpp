#include <catch_amalgamated.hpp>

#include "tbench/transformer.hpp"

#include <stdexcept>

using namespace tbench;
using Catch::Approx;

namespace {

TransformerNameplate zvd() {
    TransformerNameplate p;
    p.s_rated_va = 100e6;
    p.u_hv_v = 150e3;
    p.u_lv_v = 52.5e3;
    p.u_hv_tap1_v = 172.5e3;
    p.u_hv_tap_max_v = 127.5e3;
    p.tap_count = 21;
    p.z_leak_pct = 14.19;
    p.z_leak_tap1_pct = 15.19;
    p.z_leak_tap_max_pct = 13.43;
    p.i_mag_pct = 0.3;
    p.p_noload_w = 38.2e3;
    p.p_shortcircuit_w = 267.4e3;
    return p;
}

TransformerNameplate ddw() {
    TransformerNameplate p;
    p.s_rated_va = 80e6;
    p.u_hv_v = 150e3;
    p.u_lv_v = 52.5e3;
    p.u_hv_tap1_v = 172.5e3;
    p.u_hv_tap_max_v = 127.5e3;
    p.tap_count = 21;
    p.z_leak_pct = 13.8;
    p.i_mag_pct = 0.3;
    p.p_noload_w = 71e3;
    p.p_shortcircuit_w = 287e3;
    return p;
}

} // namespace

TEST_CASE("leakage inductance from nameplate data", "[transformer]") {
    CHECK(leakage_inductance(zvd(), 11, WindingSide::Lv) == Approx(12.45e-3).margin(0.01e-3));
    CHECK(leakage_inductance(ddw(), 11, WindingSide::Lv) == Approx(15.13e-3).margin(0.01e-3));
    CHECK(leakage_inductance(zvd(), 1, WindingSide::Lv) == Approx(13.33e-3).margin(0.01e-3));

    // HV-side referral scales with the squared tap voltage.
    const Real lv = leakage_inductance(zvd(), 11, WindingSide::Lv);
    const Real hv = leakage_inductance(zvd(), 11, WindingSide::Hv);
    const Real n = tap_ratio(zvd(), 11);
    CHECK(hv == Approx(lv * n * n).epsilon(1e-12));

    CHECK_THROWS_AS(leakage_inductance(zvd(), 0, WindingSide::Lv), std::invalid_argument);
    CHECK_THROWS_AS(leakage_inductance(zvd(), 22, WindingSide::Lv), std::invalid_argument);
}

TEST_CASE("tap voltages and ratios interpolate across the tabulated points", "[transformer]") {
    CHECK(tap_ratio(zvd(), 11) == Approx(150.0 / 52.5).epsilon(1e-12));
    CHECK(tap_ratio(zvd(), 1) == Approx(172.5 / 52.5).epsilon(1e-12));
    CHECK(tap_ratio(zvd(), 21) == Approx(127.5 / 52.5).epsilon(1e-12));
    CHECK(tap_voltage(zvd(), 6) == Approx(161.25e3));
    CHECK(tap_voltage(zvd(), 16) == Approx(138.75e3));

    // Leakage percent interpolates between 15.19 / 14.19 / 13.43.
    CHECK(leakage_pct(zvd(), 6) == Approx(14.69));
    CHECK(leakage_pct(zvd(), 16) == Approx(13.81));
    CHECK(leakage_pct(ddw(), 1) == Approx(13.8)); // no per-tap data: constant
    CHECK(leakage_pct(ddw(), 21) == Approx(13.8));
}

TEST_CASE("percent to inductance round trip is exact", "[transformer][property]") {
    const auto plate = zvd();
    const Real omega = 2.0 * 3.14159265358979323846 * plate.f_rated_hz;
    for (int tap = 1; tap <= plate.tap_count; ++tap) {
        const Real l = leakage_inductance(plate, tap, WindingSide::Lv);
        const Real z_back =
            l * plate.s_rated_va * omega / (plate.u_lv_v * plate.u_lv_v) * 100.0;
        CHECK(z_back == Approx(leakage_pct(plate, tap)).epsilon(1e-12));
    }
}

TEST_CASE("build_model derives the per-phase equivalent", "[transformer]") {
    const auto m = build_model(zvd(), 11);
    CHECK(m.ratio == Approx(150.0 / 52.5).epsilon(1e-12));
    CHECK(m.l_leak_lv_h == Approx(12.449e-3).margin(0.01e-3));
    CHECK(m.l_mag_lv_h == Approx(29.24).epsilon(1e-3));
    CHECK(m.r_mag_lv_ohm == Approx(72153.0).epsilon(1e-3));
    CHECK(m.r_series_lv_ohm == Approx(0.0737).epsilon(1e-2));
    CHECK(m.l_mag_lv_h / m.l_leak_lv_h > 100.0);
    CHECK(m.flux_knee_wb == 0.0);
    CHECK(m.c_hl_f == 0.0);

    SECTION("saturable option sets the knee at rated peak flux") {
        const auto sat = build_model(zvd(), 11, {.saturable = true});
        CHECK(sat.flux_knee_wb == Approx(0.13645).epsilon(1e-3));
        CHECK(sat.l_sat_lv_h == Approx(5.0 * sat.l_leak_lv_h).epsilon(1e-12));
    }

    SECTION("capacitive option fixes the divider ratio") {
        const auto cap = build_model(zvd(), 11, {.capacitive = true, .k_c = 0.2});
        CHECK(cap.c_hl_f / (cap.c_hl_f + cap.c_surge_f) == Approx(0.2).epsilon(1e-12));
        const auto cap35 = build_model(zvd(), 11, {.capacitive = true, .k_c = 0.35});
        CHECK(cap35.c_hl_f / (cap35.c_hl_f + cap35.c_surge_f) == Approx(0.35).epsilon(1e-12));
    }
}

TEST_CASE("build_model rejects inconsistent inputs", "[transformer]") {
    CHECK_THROWS_AS(build_model(zvd(), 0), std::invalid_argument);
    CHECK_THROWS_AS(build_model(zvd(), 25), std::invalid_argument);

    auto lossy = zvd();
    lossy.z_leak_pct = 0.2;
    lossy.p_shortcircuit_w = 0.02 * lossy.s_rated_va; // R_pu > z_pu
    CHECK_THROWS_AS(build_model(lossy, 11), std::invalid_argument);

    auto bad = zvd();
    bad.u_hv_tap_max_v = 200e3; // violates tap-1 > neutral > tap-max
    CHECK_THROWS_AS(build_model(bad, 11), std::invalid_argument);
}
