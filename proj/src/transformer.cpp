#include "tbench/transformer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tbench {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

void check_plate(const TransformerNameplate& p) {
    require(p.s_rated_va > 0.0, "s_rated_va must be > 0");
    require(p.u_hv_v > 0.0, "u_hv_v must be > 0");
    require(p.u_lv_v > 0.0, "u_lv_v must be > 0");
    require(p.tap_count >= 1, "tap_count must be >= 1");
    require(p.z_leak_pct > 0.0 && p.z_leak_pct < 100.0, "z_leak_pct must be in (0, 100)");
    require(p.f_rated_hz > 0.0, "f_rated_hz must be > 0");
    if (p.tap_count > 1) {
        require(p.u_hv_tap1_v > p.u_hv_v && p.u_hv_v > p.u_hv_tap_max_v,
                "tap voltages must satisfy u_hv_tap1_v > u_hv_v > u_hv_tap_max_v");
    }
}

void check_tap(const TransformerNameplate& p, int tap) {
    if (tap < 1 || tap > p.tap_count) {
        throw std::invalid_argument("tap out of range: " + std::to_string(tap) +
                                    " (valid 1.." + std::to_string(p.tap_count) + ")");
    }
}

int neutral_tap(const TransformerNameplate& p) { return (p.tap_count + 1) / 2; }

// Piecewise-linear interpolation through (1, v1), (neutral, vn), (tap_count, vmax).
Real interp_over_taps(const TransformerNameplate& p, int tap, Real v1, Real vn, Real vmax) {
    const int n = neutral_tap(p);
    if (tap == n || p.tap_count == 1) return vn;
    if (tap < n) {
        const Real a = static_cast<Real>(tap - 1) / static_cast<Real>(n - 1);
        return v1 + a * (vn - v1);
    }
    const Real a = static_cast<Real>(tap - n) / static_cast<Real>(p.tap_count - n);
    return vn + a * (vmax - vn);
}

} // namespace

Real tap_voltage(const TransformerNameplate& plate, int tap) {
    check_plate(plate);
    check_tap(plate, tap);
    if (plate.tap_count == 1) return plate.u_hv_v;
    return interp_over_taps(plate, tap, plate.u_hv_tap1_v, plate.u_hv_v, plate.u_hv_tap_max_v);
}

Real tap_ratio(const TransformerNameplate& plate, int tap) {
    return tap_voltage(plate, tap) / plate.u_lv_v;
}

Real leakage_pct(const TransformerNameplate& plate, int tap) {
    check_plate(plate);
    check_tap(plate, tap);
    if (!plate.z_leak_tap1_pct || !plate.z_leak_tap_max_pct || plate.tap_count == 1) {
        return plate.z_leak_pct;
    }
    return interp_over_taps(plate, tap, *plate.z_leak_tap1_pct, plate.z_leak_pct,
                            *plate.z_leak_tap_max_pct);
}

Real leakage_inductance(const TransformerNameplate& plate, int tap, WindingSide side) {
    const Real z = leakage_pct(plate, tap) / 100.0;
    const Real u = (side == WindingSide::Lv) ? plate.u_lv_v : tap_voltage(plate, tap);
    const Real omega = 2.0 * std::numbers::pi * plate.f_rated_hz;
    return z * u * u / (plate.s_rated_va * omega);
}

Real rated_peak_flux_lv(const TransformerNameplate& plate) {
    check_plate(plate);
    const Real omega = 2.0 * std::numbers::pi * plate.f_rated_hz;
    const Real u_phase_peak = std::sqrt(2.0 / 3.0) * plate.u_lv_v;
    return u_phase_peak / omega;
}

TransformerModel build_model(const TransformerNameplate& plate, int tap,
                             const TransformerBuildOptions& options) {
    check_plate(plate);
    check_tap(plate, tap);

    const Real omega = 2.0 * std::numbers::pi * plate.f_rated_hz;
    const Real z_base_lv = plate.u_lv_v * plate.u_lv_v / plate.s_rated_va;

    TransformerModel m;
    m.ratio = tap_ratio(plate, tap);
    m.l_leak_lv_h = leakage_inductance(plate, tap, WindingSide::Lv);

    // Series resistance from the short-circuit (load) losses,
    // R = P_sc / (3 * I_rated^2) on the LV side.
    if (plate.p_shortcircuit_w > 0.0) {
        const Real i_rated = plate.s_rated_va / (std::sqrt(3.0) * plate.u_lv_v);
        m.r_series_lv_ohm = plate.p_shortcircuit_w / (3.0 * i_rated * i_rated);
        const Real r_pu = plate.p_shortcircuit_w / plate.s_rated_va;
        if (r_pu >= plate.z_leak_pct / 100.0) {
            throw std::invalid_argument(
                "inconsistent nameplate: short-circuit losses imply a series "
                "resistance above the leakage impedance");
        }
    }

    // Magnetizing branch from the excitation current and no-load losses.
    if (plate.i_mag_pct > 0.0) {
        m.l_mag_lv_h = z_base_lv / (plate.i_mag_pct / 100.0) / omega;
    }
    if (plate.p_noload_w > 0.0) {
        m.r_mag_lv_ohm = plate.u_lv_v * plate.u_lv_v / plate.p_noload_w;
    }

    if (options.saturable) {
        m.flux_knee_wb = rated_peak_flux_lv(plate);
        m.l_sat_lv_h = 5.0 * m.l_leak_lv_h;
    }

    if (options.capacitive) {
        require(options.k_c > 0.0 && options.k_c < 1.0, "k_c must be in (0, 1)");
        // Only the ratio c_hl/(c_hl + c_surge) is observable in the step
        // divider; the absolute scale is a stray-capacitance order of
        // magnitude (10 nF total).
        constexpr Real c_total = 10e-9;
        m.c_hl_f = options.k_c * c_total;
        m.c_surge_f = (1.0 - options.k_c) * c_total;
    }

    return m;
}

} // namespace tbench
