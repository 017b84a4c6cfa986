#include "tbench/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace tbench {

namespace {

constexpr Real kPi = std::numbers::pi;

void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

// Iterative radix-2 Cooley-Tukey; n must be a power of two.
void fft_inplace(std::vector<std::complex<Real>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const Real ang = -2.0 * kPi / static_cast<Real>(len);
        const std::complex<Real> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<Real> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace

Real natural_frequency(Real l_h, Real c_f) {
    require(l_h > 0.0, "l must be > 0");
    require(c_f > 0.0, "c must be > 0");
    return 1.0 / (2.0 * kPi * std::sqrt(l_h * c_f));
}

TravelMetrics travel_metrics(Real length_m, Real velocity_m_per_s) {
    require(length_m > 0.0, "length must be > 0");
    require(velocity_m_per_s > 0.0, "velocity must be > 0");
    TravelMetrics m;
    m.tau_s = length_m / velocity_m_per_s;
    m.round_trip_s = 2.0 * m.tau_s;
    m.cycle_s = 4.0 * m.tau_s;
    m.f_round_trip_hz = 1.0 / m.round_trip_s;
    m.f_cycle_hz = 1.0 / m.cycle_s;
    return m;
}

std::optional<SpectrumPeak> dominant_frequency(std::span<const Real> samples, Real dt, Real t0,
                                               Real t_start, Real t_end,
                                               Real exclude_below_hz) {
    require(dt > 0.0, "dt must be > 0");
    require(t_end > t_start, "window must be non-empty");

    const auto n_total = static_cast<long>(samples.size());
    long i0 = static_cast<long>(std::ceil((t_start - t0) / dt - 1e-9));
    long i1 = static_cast<long>(std::floor((t_end - t0) / dt + 1e-9));
    i0 = std::clamp(i0, 0L, n_total - 1);
    i1 = std::clamp(i1, 0L, n_total - 1);
    const long n = i1 - i0 + 1;
    require(n >= 16, "window must contain at least 16 samples");

    Real mean = 0.0;
    for (long i = i0; i <= i1; ++i) mean += samples[static_cast<std::size_t>(i)];
    mean /= static_cast<Real>(n);

    const std::size_t n_fft = next_pow2(static_cast<std::size_t>(n));
    std::vector<std::complex<Real>> buf(n_fft, {0.0, 0.0});
    Real window_sum = 0.0;
    for (long i = 0; i < n; ++i) {
        const Real w = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<Real>(i) /
                                            static_cast<Real>(n - 1));
        window_sum += w;
        buf[static_cast<std::size_t>(i)] =
            w * (samples[static_cast<std::size_t>(i0 + i)] - mean);
    }
    fft_inplace(buf);

    const Real bin_width = 1.0 / (static_cast<Real>(n_fft) * dt);
    const std::size_t k_min =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(exclude_below_hz / bin_width)));
    const std::size_t k_max = n_fft / 2;

    std::size_t k_peak = 0;
    Real best = 0.0;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        const Real mag = std::abs(buf[k]);
        if (mag > best) {
            best = mag;
            k_peak = k;
        }
    }
    if (k_peak == 0 || best <= 0.0) return std::nullopt;

    // Parabolic refinement on log magnitude over the three neighboring bins.
    Real delta = 0.0;
    if (k_peak > k_min && k_peak < k_max) {
        const Real eps = best * 1e-12 + 1e-300;
        const Real ym = std::log(std::abs(buf[k_peak - 1]) + eps);
        const Real y0 = std::log(best + eps);
        const Real yp = std::log(std::abs(buf[k_peak + 1]) + eps);
        const Real denom = ym - 2.0 * y0 + yp;
        if (denom < 0.0) delta = 0.5 * (ym - yp) / denom;
        delta = std::clamp(delta, -0.5, 0.5);
    }

    SpectrumPeak peak;
    peak.frequency_hz = (static_cast<Real>(k_peak) + delta) * bin_width;
    peak.amplitude = 2.0 * best / window_sum;
    peak.bin_width_hz = bin_width;
    return peak;
}

OvervoltageReport peak_overvoltage(std::span<const Real> samples, Real dt, Real t0,
                                   Real u_rated_rms_ll_v) {
    require(!samples.empty(), "waveform must be non-empty");
    require(u_rated_rms_ll_v > 0.0, "base voltage must be > 0");

    OvervoltageReport rep;
    rep.base_peak = std::sqrt(2.0 / 3.0) * u_rated_rms_ll_v;
    std::size_t i_peak = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (std::abs(samples[i]) > rep.peak_abs) {
            rep.peak_abs = std::abs(samples[i]);
            i_peak = i;
        }
    }
    rep.per_unit = rep.peak_abs / rep.base_peak;
    rep.time_of_peak_s = t0 + static_cast<Real>(i_peak) * dt;
    return rep;
}

Real lattice_oracle(Real z_c_ohm, Real tau_s, Real r_source_ohm, Real v_step_v, Real t_s) {
    require(z_c_ohm > 0.0, "z_c must be > 0");
    require(tau_s > 0.0, "tau must be > 0");
    require(r_source_ohm >= 0.0, "r_source must be >= 0");
    if (t_s < tau_s) return 0.0;

    const Real launch = v_step_v * z_c_ohm / (r_source_ohm + z_c_ohm);
    const Real rho = (r_source_ohm - z_c_ohm) / (r_source_ohm + z_c_ohm);
    // Arrivals at (2k+1)*tau, each adding twice the incident wave amplitude
    // (open-end reflection +1); the wave picks up one source reflection per
    // round trip.
    Real v = 0.0;
    Real wave = launch;
    for (Real t_arrival = tau_s; t_arrival <= t_s; t_arrival += 2.0 * tau_s) {
        v += 2.0 * wave;
        wave *= rho;
        if (std::abs(wave) < 1e-300) break;
    }
    return v;
}

Real lc_step_oracle(Real v_step_v, Real l_h, Real c_f, Real r_ohm, Real t_s) {
    require(l_h > 0.0, "l must be > 0");
    require(c_f > 0.0, "c must be > 0");
    require(r_ohm >= 0.0, "r must be >= 0");
    const Real omega0 = 1.0 / std::sqrt(l_h * c_f);
    const Real zeta = 0.5 * r_ohm * std::sqrt(c_f / l_h);
    require(zeta < 1.0, "overdamped circuit is outside the oracle's intended use");
    if (t_s <= 0.0) return 0.0;
    if (r_ohm == 0.0) {
        return v_step_v * (1.0 - std::cos(omega0 * t_s));
    }
    const Real omega_d = omega0 * std::sqrt(1.0 - zeta * zeta);
    const Real decay = std::exp(-zeta * omega0 * t_s);
    return v_step_v * (1.0 - decay * (std::cos(omega_d * t_s) +
                                      zeta * omega0 / omega_d * std::sin(omega_d * t_s)));
}

Real rl_exp_oracle(Real v_step_v, Real l_h, Real z_ohm, Real t_s) {
    require(l_h > 0.0, "l must be > 0");
    require(z_ohm > 0.0, "z must be > 0");
    if (t_s <= 0.0) return 0.0;
    return v_step_v * (1.0 - std::exp(-t_s * z_ohm / l_h));
}

} // namespace tbench
