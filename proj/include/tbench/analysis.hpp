#pragma once

#include <optional>
#include <span>

namespace tbench {

using Real = double;

struct SpectrumPeak {
    Real frequency_hz = 0.0;
    Real amplitude = 0.0;    // same unit as the input samples
    Real bin_width_hz = 0.0;
};

struct OvervoltageReport {
    Real peak_abs = 0.0;
    Real base_peak = 0.0;
    Real per_unit = 0.0;
    Real time_of_peak_s = 0.0;
};

struct TravelMetrics {
    Real tau_s = 0.0;          // one-way travel time
    Real round_trip_s = 0.0;   // 2*tau
    Real cycle_s = 0.0;        // 4*tau, open-ended-line square-wave period
    Real f_round_trip_hz = 0.0;
    Real f_cycle_hz = 0.0;
};

/// f = 1 / (2*pi*sqrt(l*c)). Throws std::invalid_argument on non-positive input.
Real natural_frequency(Real l_h, Real c_f);

/// Travel time of a line plus both period conventions: the full square-wave
/// cycle 4*tau of an open-ended line fed from a stiff bus, and the 2*tau
/// round trip that governs a line fed through a high impedance.
TravelMetrics travel_metrics(Real length_m, Real velocity_m_per_s);

/// Dominant frequency of a waveform slice: mean-removed, Hann-windowed DFT,
/// largest bin above exclude_below, refined by parabolic interpolation over
/// the neighboring bins. Returns nullopt when the slice carries no signal.
/// Throws std::invalid_argument when the window holds fewer than 16 samples.
std::optional<SpectrumPeak> dominant_frequency(std::span<const Real> samples, Real dt, Real t0,
                                               Real t_start, Real t_end,
                                               Real exclude_below_hz = 500.0);

/// Peak magnitude in per unit of sqrt(2/3) * u_rated_rms_ll.
OvervoltageReport peak_overvoltage(std::span<const Real> samples, Real dt, Real t0,
                                   Real u_rated_rms_ll_v);

/// Closed-form Bewley lattice sum: far-end voltage of an open-ended line of
/// surge impedance z_c and travel time tau, fed by a step v_step behind
/// r_source at t = 0.
Real lattice_oracle(Real z_c_ohm, Real tau_s, Real r_source_ohm, Real v_step_v, Real t_s);

/// Capacitor voltage of a series R-L-C energized by a step at t = 0.
/// Requires an underdamped (or lossless) circuit.
Real lc_step_oracle(Real v_step_v, Real l_h, Real c_f, Real r_ohm, Real t_s);

/// Step response of an inductance in series with a surge impedance,
/// v_step * (1 - exp(-t*z/l)); the time constant is l/z.
Real rl_exp_oracle(Real v_step_v, Real l_h, Real z_ohm, Real t_s);

} // namespace tbench
