#pragma once

#include "tbench/circuit.hpp"

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tbench {

/// Norton companion of a reactive element under the trapezoidal rule:
/// conductance g in parallel with a history current source injected
/// from n1 to n2.
struct CompanionStamp {
    Real g;
    Real i_hist;
};

/// g = dt/(2l), i_hist = i_prev + g*v_prev.
CompanionStamp companion_inductor(Real l_h, Real dt, Real v_prev, Real i_prev);

/// g = 2c/dt, i_hist = -i_prev - g*v_prev.
CompanionStamp companion_capacitor(Real c_f, Real dt, Real v_prev, Real i_prev);

/// Lossless travelling-wave history current for one line end, from the far
/// end's voltage and into-line current one travel time ago.
Real bergeron_history(Real z_c_ohm, Real v_far, Real i_far);

/// Non-finite solution or an unsolvable system during time marching.
class NumericFault : public std::runtime_error {
public:
    NumericFault(const std::string& what, long step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    [[nodiscard]] long step() const { return step_; }

private:
    long step_;
};

/// Uniformly sampled probe waveforms produced by a run; immutable afterwards.
class WaveformSet {
public:
    WaveformSet() = default;
    WaveformSet(Real dt, Real t0, std::vector<std::string> names,
                std::vector<std::vector<Real>> samples);

    [[nodiscard]] Real dt() const { return dt_; }
    [[nodiscard]] Real t0() const { return t0_; }
    [[nodiscard]] std::size_t sample_count() const;
    [[nodiscard]] Real time_at(std::size_t i) const { return t0_ + static_cast<Real>(i) * dt_; }
    [[nodiscard]] const std::vector<std::string>& probe_names() const { return names_; }
    [[nodiscard]] bool has_probe(std::string_view name) const;
    [[nodiscard]] std::size_t probe_index(std::string_view name) const; // throws on unknown
    [[nodiscard]] std::span<const Real> samples(std::size_t probe) const;
    [[nodiscard]] std::span<const Real> samples(std::string_view name) const;

private:
    Real dt_ = 0.0;
    Real t0_ = 0.0;
    std::vector<std::string> names_;
    std::vector<std::vector<Real>> samples_;
};

/// Step-by-step trapezoidal solve of a circuit: companion stamping, dense LU
/// on the nodal system with extended rows for ideal-ratio transformers and
/// EMF constraints, Bergeron history buffers, switch and saturation events.
/// One session is strictly sequential; independent sessions do not share
/// state and may run concurrently.
class SolverSession {
public:
    SolverSession(const Circuit& circuit, Real dt);
    ~SolverSession();
    SolverSession(SolverSession&&) noexcept;
    SolverSession& operator=(SolverSession&&) noexcept;

    /// Advance one fixed step (events and saturation handled inside).
    void advance();

    [[nodiscard]] long step() const;
    [[nodiscard]] Real time() const;
    [[nodiscard]] Real dt() const;
    [[nodiscard]] Real node_voltage(NodeId node) const;
    [[nodiscard]] Real branch_current(ElementId element, BranchTap tap = BranchTap::Main) const;
    [[nodiscard]] Real probe_value(const Probe& probe) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Validate and time-march a circuit from t = 0 to t_end with fixed dt,
/// recording every probe each step. Deterministic: identical inputs give
/// bit-identical outputs. Throws std::invalid_argument when dt exceeds a
/// tenth of any line travel time (the message names the largest compliant
/// dt) and NumericFault on solver faults.
WaveformSet run(const Circuit& circuit, Real dt, Real t_end);

} // namespace tbench
