#pragma once

#include "tbench/circuit.hpp"
#include "tbench/solver.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbench {

/// Configuration problem: carries the dotted field path it refers to.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field_path, const std::string& message)
        : std::runtime_error(field_path.empty() ? message : field_path + ": " + message),
          field_path_(std::move(field_path)) {}
    [[nodiscard]] const std::string& field_path() const { return field_path_; }

private:
    std::string field_path_;
};

enum class CaseKind { CaseA, CaseB, Custom };
enum class SecondaryKind { Cable, Line, None };
enum class SwitchingMode { PhaseAPeak, PhaseAZero, Explicit };
enum class SwitchedObject { Combined, LineOnly };
enum class NeutralTreatment { Grounded, Floating };

struct SourceConfig {
    Real u_ll_rms_v = 0.0;
    Real f_hz = 50.0;
    Real sc_current_a = 0.0;            // > 0 derives l_thev when l_thev unset
    std::optional<Real> r_thev_ohm;     // default: per case (bus surge equivalent)
    std::optional<Real> l_thev_h;
    bool operator==(const SourceConfig&) const = default;
};

struct PrimaryCableConfig {
    Real length_m = 7100.0;
    Real velocity_m_per_s = 150e6;
    Real z_c_ohm = 40.0;
    Real r_total_ohm = 0.0;
    bool operator==(const PrimaryCableConfig&) const = default;
};

struct SecondaryConfig {
    SecondaryKind kind = SecondaryKind::None;
    // kind == Cable: explicit capacitance wins, else 13.2 nF scaled by length/60 m.
    std::optional<Real> capacitance_f;
    Real length_m = 0.0;
    // kind == Line
    Real velocity_m_per_s = 285.714e6;
    std::optional<Real> z_c_ohm;            // default keeps total_capacitance_f
    std::optional<Real> total_capacitance_f; // default 118 nF
    Real r_total_ohm = 0.0;
    bool operator==(const SecondaryConfig&) const = default;
};

struct TransformerConfig {
    TransformerNameplate nameplate;
    int tap = 11;
    bool saturable = false;
    bool capacitive = false;
    Real k_c = 0.2;
    NeutralTreatment lv_neutral = NeutralTreatment::Grounded;
    bool operator==(const TransformerConfig&) const = default;
};

struct SwitchingConfig {
    SwitchingMode mode = SwitchingMode::PhaseAPeak;
    SwitchedObject object = SwitchedObject::Combined;
    std::array<Real, 3> t_close_s{0.0, 0.0, 0.0};
    std::optional<Real> settle_cycles;  // default: per case
    bool operator==(const SwitchingConfig&) const = default;
};

struct SimConfig {
    std::optional<Real> dt_s;
    std::optional<Real> t_end_s;
    bool operator==(const SimConfig&) const = default;
};

struct ScenarioConfig {
    CaseKind case_kind = CaseKind::Custom;
    int phases = 3;
    bool parallel_branch = false;       // case A: already-energized twin feeder
    SourceConfig source;
    std::optional<PrimaryCableConfig> primary_cable;
    SecondaryConfig secondary;
    TransformerConfig transformer;
    SwitchingConfig switching;
    SimConfig sim;
    std::vector<std::string> probes;    // empty selects the per-case default set
    bool operator==(const ScenarioConfig&) const = default;
};

struct BuiltScenario {
    Circuit circuit;
    ScenarioConfig resolved;
    std::array<Real, 3> pole_close_s{0.0, 0.0, 0.0};
    Real t_close_s = 0.0;               // phase A
    Real dt_s = 0.0;
    Real t_end_s = 0.0;
};

/// Thevenin inductance of a purely inductive source from the power-frequency
/// short-circuit level: X = U/(sqrt(3)*I_sc), L = X/(2*pi*f).
Real thevenin_from_short_circuit(Real u_ll_rms_v, Real i_sc_rms_a, Real f_hz);

/// Parse a scenario document (JSON); unknown keys are rejected, defaults for
/// the declared case are applied and switching selectors are resolved into
/// concrete close times. Throws ConfigError.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig parse_scenario_file(const std::string& path);

/// Apply dotted-path overrides (e.g. "transformer.tap=21") to a scenario
/// document and return the amended text. Values parse as JSON literals where
/// possible, else as strings.
std::string apply_overrides(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& overrides);

/// Canonical serialization of a resolved config; parse(serialize(c)) == c.
std::string serialize_scenario(const ScenarioConfig& config);

/// FNV-1a digest of the canonical serialization.
std::string scenario_digest(const ScenarioConfig& config);

/// Apply defaults and resolve selectors without building. Idempotent.
ScenarioConfig resolve_scenario(const ScenarioConfig& config);

/// Assemble the circuit for a resolved (or raw) config.
BuiltScenario build_scenario(const ScenarioConfig& config);

/// Case-specific wrappers; these check case_kind.
BuiltScenario build_case_a(const ScenarioConfig& config);
BuiltScenario build_case_b(const ScenarioConfig& config);

/// Run a built scenario with its resolved dt / t_end.
WaveformSet run_scenario(const BuiltScenario& scenario);

} // namespace tbench
