#pragma once

#include <optional>

namespace tbench {

using Real = double;

/// Which winding a quantity is referred to.
enum class WindingSide { Hv, Lv };

/// Nameplate data of a two-winding transformer with an HV tap changer.
/// Voltages are line-line rms; tap 1 carries the highest HV voltage and
/// tap `tap_count` the lowest. Per-tap leakage impedances are optional;
/// when absent the neutral-tap value is used for every tap.
struct TransformerNameplate {
    Real s_rated_va = 0.0;
    Real u_hv_v = 0.0;          // at the neutral tap
    Real u_lv_v = 0.0;
    Real u_hv_tap1_v = 0.0;
    Real u_hv_tap_max_v = 0.0;
    int tap_count = 1;
    Real z_leak_pct = 0.0;      // at the neutral tap
    std::optional<Real> z_leak_tap1_pct;
    std::optional<Real> z_leak_tap_max_pct;
    Real i_mag_pct = 0.0;
    Real p_noload_w = 0.0;
    Real p_shortcircuit_w = 0.0;
    Real f_rated_hz = 50.0;
};

/// Per-phase transient equivalent: ideal ratio, series leakage branch and
/// shunt magnetizing branch, all referred to the LV winding. Saturation and
/// the capacitive step divider are optional extensions.
struct TransformerModel {
    Real ratio = 1.0;           // u_hv(tap) / u_lv
    Real l_leak_lv_h = 0.0;
    Real r_series_lv_ohm = 0.0;
    Real l_mag_lv_h = 0.0;
    Real r_mag_lv_ohm = 0.0;    // 0 disables the core-loss branch
    // Saturation (magnetizing branch); l_sat_lv_h == 0 keeps it linear.
    Real flux_knee_wb = 0.0;
    Real l_sat_lv_h = 0.0;
    // Capacitive step-transfer divider; both zero when disabled.
    Real c_hl_f = 0.0;
    Real c_surge_f = 0.0;
};

struct TransformerBuildOptions {
    bool saturable = false;
    bool capacitive = false;
    Real k_c = 0.2;             // c_hl / (c_hl + c_surge)
};

/// HV tap voltage, interpolated linearly across tap indices between the
/// tabulated tap-1 / neutral / tap-max values.
Real tap_voltage(const TransformerNameplate& plate, int tap);

/// u_hv(tap) / u_lv.
Real tap_ratio(const TransformerNameplate& plate, int tap);

/// Leakage impedance in percent at a tap (linear interpolation between the
/// tabulated points when per-tap values are present).
Real leakage_pct(const TransformerNameplate& plate, int tap);

/// Leakage inductance referred to the chosen winding,
/// L = (z%/100) * U_side^2 / (S * 2*pi*f_rated).
Real leakage_inductance(const TransformerNameplate& plate, int tap, WindingSide side);

/// Rated peak flux of the LV winding (phase quantity, wye connection).
Real rated_peak_flux_lv(const TransformerNameplate& plate);

/// Convert a nameplate into the per-phase transient model.
/// Throws std::invalid_argument on out-of-range taps or a nameplate whose
/// short-circuit losses imply a series resistance above the leakage impedance.
TransformerModel build_model(const TransformerNameplate& plate, int tap,
                             const TransformerBuildOptions& options = {});

} // namespace tbench
