#include "tbench/scenarios.hpp"

#include "tbench/analysis.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace tbench {

namespace {

using nlohmann::json;

constexpr Real kFloatingTieOhm = 1e9;
constexpr Real kCableCapPerMeter = 13.2e-9 / 60.0; // 60 m XLPE reference section

TransformerNameplate zvd_nameplate() {
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
    p.f_rated_hz = 50.0;
    return p;
}

TransformerNameplate ddw_nameplate() {
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
    p.f_rated_hz = 50.0;
    return p;
}

ScenarioConfig case_default_config(CaseKind kind) {
    ScenarioConfig c;
    c.case_kind = kind;
    c.source.u_ll_rms_v = 150e3;
    switch (kind) {
        case CaseKind::CaseA:
            c.parallel_branch = true;
            c.primary_cable = PrimaryCableConfig{};
            c.secondary.kind = SecondaryKind::Cable;
            c.secondary.length_m = 60.0;
            c.transformer.nameplate = zvd_nameplate();
            break;
        case CaseKind::CaseB:
            c.secondary.kind = SecondaryKind::Line;
            c.secondary.length_m = 4000.0;
            c.transformer.nameplate = ddw_nameplate();
            break;
        case CaseKind::Custom:
            c.source.u_ll_rms_v = 0.0;
            break;
    }
    return c;
}

// -- JSON helpers ------------------------------------------------------------

Real get_real(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<Real>();
}

int get_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<int>();
}

bool get_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
    return v.get<bool>();
}

std::string get_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

// Iterates an object's keys against a fixed table; unknown keys are rejected
// with their full path.
class StrictObject {
public:
    StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(path_, "expected an object");
    }

    template <typename F>
    StrictObject& field(const char* key, F&& f) {
        known_.push_back(key);
        if (const auto it = j_.find(key); it != j_.end()) {
            f(*it, path_ + "." + key);
        }
        return *this;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
                throw ConfigError(path_ + "." + key, "unknown key");
            }
        }
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> known_;
};

CaseKind case_kind_from_string(const std::string& s, const std::string& path) {
    if (s == "case_a") return CaseKind::CaseA;
    if (s == "case_b") return CaseKind::CaseB;
    if (s == "custom") return CaseKind::Custom;
    throw ConfigError(path, "expected one of case_a|case_b|custom");
}

const char* to_string(CaseKind k) {
    switch (k) {
        case CaseKind::CaseA: return "case_a";
        case CaseKind::CaseB: return "case_b";
        default: return "custom";
    }
}

SecondaryKind secondary_kind_from_string(const std::string& s, const std::string& path) {
    if (s == "cable") return SecondaryKind::Cable;
    if (s == "line") return SecondaryKind::Line;
    if (s == "none") return SecondaryKind::None;
    throw ConfigError(path, "expected one of cable|line|none");
}

const char* to_string(SecondaryKind k) {
    switch (k) {
        case SecondaryKind::Cable: return "cable";
        case SecondaryKind::Line: return "line";
        default: return "none";
    }
}

SwitchingMode mode_from_string(const std::string& s, const std::string& path) {
    if (s == "phase_a_peak") return SwitchingMode::PhaseAPeak;
    if (s == "phase_a_zero") return SwitchingMode::PhaseAZero;
    if (s == "explicit") return SwitchingMode::Explicit;
    throw ConfigError(path, "expected one of phase_a_peak|phase_a_zero|explicit");
}

const char* to_string(SwitchingMode m) {
    switch (m) {
        case SwitchingMode::PhaseAPeak: return "phase_a_peak";
        case SwitchingMode::PhaseAZero: return "phase_a_zero";
        default: return "explicit";
    }
}

SwitchedObject object_from_string(const std::string& s, const std::string& path) {
    if (s == "combined") return SwitchedObject::Combined;
    if (s == "line_only") return SwitchedObject::LineOnly;
    throw ConfigError(path, "expected one of combined|line_only");
}

const char* to_string(SwitchedObject o) {
    return o == SwitchedObject::Combined ? "combined" : "line_only";
}

NeutralTreatment neutral_from_string(const std::string& s, const std::string& path) {
    if (s == "grounded") return NeutralTreatment::Grounded;
    if (s == "floating") return NeutralTreatment::Floating;
    throw ConfigError(path, "expected one of grounded|floating");
}

const char* to_string(NeutralTreatment n) {
    return n == NeutralTreatment::Grounded ? "grounded" : "floating";
}

void parse_source(const json& j, const std::string& path, SourceConfig& out) {
    StrictObject obj(j, path);
    obj.field("u_ll_rms_v", [&](const json& v, const std::string& p) { out.u_ll_rms_v = get_real(v, p); })
        .field("f_hz", [&](const json& v, const std::string& p) { out.f_hz = get_real(v, p); })
        .field("sc_current_a", [&](const json& v, const std::string& p) { out.sc_current_a = get_real(v, p); })
        .field("r_thev_ohm", [&](const json& v, const std::string& p) { out.r_thev_ohm = get_real(v, p); })
        .field("l_thev_h", [&](const json& v, const std::string& p) { out.l_thev_h = get_real(v, p); })
        .finish();
}

void parse_primary_cable(const json& j, const std::string& path, std::optional<PrimaryCableConfig>& out) {
    if (!out) out = PrimaryCableConfig{};
    StrictObject obj(j, path);
    obj.field("length_m", [&](const json& v, const std::string& p) { out->length_m = get_real(v, p); })
        .field("velocity_m_per_s", [&](const json& v, const std::string& p) { out->velocity_m_per_s = get_real(v, p); })
        .field("z_c_ohm", [&](const json& v, const std::string& p) { out->z_c_ohm = get_real(v, p); })
        .field("r_total_ohm", [&](const json& v, const std::string& p) { out->r_total_ohm = get_real(v, p); })
        .finish();
}

void parse_secondary(const json& j, const std::string& path, SecondaryConfig& out) {
    StrictObject obj(j, path);
    obj.field("kind", [&](const json& v, const std::string& p) { out.kind = secondary_kind_from_string(get_string(v, p), p); })
        .field("capacitance_f", [&](const json& v, const std::string& p) { out.capacitance_f = get_real(v, p); })
        .field("length_m", [&](const json& v, const std::string& p) { out.length_m = get_real(v, p); })
        .field("velocity_m_per_s", [&](const json& v, const std::string& p) { out.velocity_m_per_s = get_real(v, p); })
        .field("z_c_ohm", [&](const json& v, const std::string& p) { out.z_c_ohm = get_real(v, p); })
        .field("total_capacitance_f", [&](const json& v, const std::string& p) { out.total_capacitance_f = get_real(v, p); })
        .field("r_total_ohm", [&](const json& v, const std::string& p) { out.r_total_ohm = get_real(v, p); })
        .finish();
}

void parse_transformer(const json& j, const std::string& path, TransformerConfig& out) {
    auto& np = out.nameplate;
    StrictObject obj(j, path);
    obj.field("s_va", [&](const json& v, const std::string& p) { np.s_rated_va = get_real(v, p); })
        .field("u_hv_v", [&](const json& v, const std::string& p) { np.u_hv_v = get_real(v, p); })
        .field("u_lv_v", [&](const json& v, const std::string& p) { np.u_lv_v = get_real(v, p); })
        .field("u_hv_tap1_v", [&](const json& v, const std::string& p) { np.u_hv_tap1_v = get_real(v, p); })
        .field("u_hv_tap_max_v", [&](const json& v, const std::string& p) { np.u_hv_tap_max_v = get_real(v, p); })
        .field("tap_count", [&](const json& v, const std::string& p) { np.tap_count = get_int(v, p); })
        .field("z_leak_pct", [&](const json& v, const std::string& p) { np.z_leak_pct = get_real(v, p); })
        .field("z_leak_tap1_pct", [&](const json& v, const std::string& p) { np.z_leak_tap1_pct = get_real(v, p); })
        .field("z_leak_tap_max_pct", [&](const json& v, const std::string& p) { np.z_leak_tap_max_pct = get_real(v, p); })
        .field("i_mag_pct", [&](const json& v, const std::string& p) { np.i_mag_pct = get_real(v, p); })
        .field("p_noload_w", [&](const json& v, const std::string& p) { np.p_noload_w = get_real(v, p); })
        .field("p_shortcircuit_w", [&](const json& v, const std::string& p) { np.p_shortcircuit_w = get_real(v, p); })
        .field("f_rated_hz", [&](const json& v, const std::string& p) { np.f_rated_hz = get_real(v, p); })
        .field("tap", [&](const json& v, const std::string& p) { out.tap = get_int(v, p); })
        .field("saturable", [&](const json& v, const std::string& p) { out.saturable = get_bool(v, p); })
        .field("capacitive", [&](const json& v, const std::string& p) { out.capacitive = get_bool(v, p); })
        .field("k_c", [&](const json& v, const std::string& p) { out.k_c = get_real(v, p); })
        .field("lv_neutral", [&](const json& v, const std::string& p) { out.lv_neutral = neutral_from_string(get_string(v, p), p); })
        .finish();
}

void parse_switching(const json& j, const std::string& path, SwitchingConfig& out) {
    StrictObject obj(j, path);
    obj.field("mode", [&](const json& v, const std::string& p) { out.mode = mode_from_string(get_string(v, p), p); })
        .field("object", [&](const json& v, const std::string& p) { out.object = object_from_string(get_string(v, p), p); })
        .field("t_close_s",
               [&](const json& v, const std::string& p) {
                   if (!v.is_array() || v.size() != 3) {
                       throw ConfigError(p, "expected an array of 3 pole close times");
                   }
                   for (std::size_t i = 0; i < 3; ++i) {
                       out.t_close_s[i] = get_real(v[i], p + "[" + std::to_string(i) + "]");
                   }
               })
        .field("settle_cycles", [&](const json& v, const std::string& p) { out.settle_cycles = get_real(v, p); })
        .finish();
}

void parse_sim(const json& j, const std::string& path, SimConfig& out) {
    StrictObject obj(j, path);
    obj.field("dt_s", [&](const json& v, const std::string& p) { out.dt_s = get_real(v, p); })
        .field("t_end_s", [&](const json& v, const std::string& p) { out.t_end_s = get_real(v, p); })
        .finish();
}

const std::array<std::string, 3> kPhaseSuffix{"_a", "_b", "_c"};
const std::array<Real, 3> kPhaseShift{0.0, -2.0 * std::numbers::pi / 3.0,
                                      2.0 * std::numbers::pi / 3.0};

bool has_phase_suffix(const std::string& name) {
    for (const auto& sfx : kPhaseSuffix) {
        if (name.size() > sfx.size() && name.ends_with(sfx)) return true;
    }
    return false;
}

} // namespace

Real thevenin_from_short_circuit(Real u_ll_rms_v, Real i_sc_rms_a, Real f_hz) {
    if (u_ll_rms_v <= 0.0) throw std::invalid_argument("u_ll_rms must be > 0");
    if (i_sc_rms_a <= 0.0) throw std::invalid_argument("i_sc_rms must be > 0");
    if (f_hz <= 0.0) throw std::invalid_argument("f must be > 0");
    const Real x = u_ll_rms_v / (std::sqrt(3.0) * i_sc_rms_a);
    return x / (2.0 * std::numbers::pi * f_hz);
}

ScenarioConfig parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
        throw ConfigError("", "syntax error at line " + std::to_string(line) + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("", "scenario document must be an object");

    CaseKind kind = CaseKind::Custom;
    if (const auto it = doc.find("case_kind"); it != doc.end()) {
        kind = case_kind_from_string(get_string(*it, "case_kind"), "case_kind");
    }
    ScenarioConfig cfg = case_default_config(kind);

    StrictObject obj(doc, "");
    obj.field("case_kind", [&](const json&, const std::string&) {})
        .field("phases", [&](const json& v, const std::string& p) { cfg.phases = get_int(v, p); })
        .field("parallel_branch", [&](const json& v, const std::string& p) { cfg.parallel_branch = get_bool(v, p); })
        .field("source", [&](const json& v, const std::string& p) { parse_source(v, p, cfg.source); })
        .field("primary_cable", [&](const json& v, const std::string& p) { parse_primary_cable(v, p, cfg.primary_cable); })
        .field("secondary", [&](const json& v, const std::string& p) { parse_secondary(v, p, cfg.secondary); })
        .field("transformer", [&](const json& v, const std::string& p) { parse_transformer(v, p, cfg.transformer); })
        .field("switching", [&](const json& v, const std::string& p) { parse_switching(v, p, cfg.switching); })
        .field("sim", [&](const json& v, const std::string& p) { parse_sim(v, p, cfg.sim); })
        .field("probes",
               [&](const json& v, const std::string& p) {
                   if (!v.is_array()) throw ConfigError(p, "expected an array of probe names");
                   cfg.probes.clear();
                   for (std::size_t i = 0; i < v.size(); ++i) {
                       cfg.probes.push_back(get_string(v[i], p + "[" + std::to_string(i) + "]"));
                   }
               })
        .finish();

    return resolve_scenario(cfg);
}

ScenarioConfig parse_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot read scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string apply_overrides(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("syntax error: ") + e.what());
    }
    for (const auto& [path, value] : overrides) {
        if (path.empty()) throw ConfigError("", "empty override path");
        json* node = &doc;
        std::size_t begin = 0;
        while (true) {
            const std::size_t dot = path.find('.', begin);
            const std::string key = path.substr(begin, dot - begin);
            if (key.empty()) throw ConfigError(path, "malformed override path");
            if (dot == std::string::npos) {
                json parsed = json::parse(value, nullptr, false);
                (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
                break;
            }
            node = &(*node)[key];
            begin = dot + 1;
        }
    }
    return doc.dump();
}

std::string serialize_scenario(const ScenarioConfig& c) {
    json j;
    j["case_kind"] = to_string(c.case_kind);
    j["phases"] = c.phases;
    j["parallel_branch"] = c.parallel_branch;

    json src;
    src["u_ll_rms_v"] = c.source.u_ll_rms_v;
    src["f_hz"] = c.source.f_hz;
    src["sc_current_a"] = c.source.sc_current_a;
    if (c.source.r_thev_ohm) src["r_thev_ohm"] = *c.source.r_thev_ohm;
    if (c.source.l_thev_h) src["l_thev_h"] = *c.source.l_thev_h;
    j["source"] = src;

    if (c.primary_cable) {
        json pc;
        pc["length_m"] = c.primary_cable->length_m;
        pc["velocity_m_per_s"] = c.primary_cable->velocity_m_per_s;
        pc["z_c_ohm"] = c.primary_cable->z_c_ohm;
        pc["r_total_ohm"] = c.primary_cable->r_total_ohm;
        j["primary_cable"] = pc;
    }

    json sec;
    sec["kind"] = to_string(c.secondary.kind);
    if (c.secondary.capacitance_f) sec["capacitance_f"] = *c.secondary.capacitance_f;
    sec["length_m"] = c.secondary.length_m;
    sec["velocity_m_per_s"] = c.secondary.velocity_m_per_s;
    if (c.secondary.z_c_ohm) sec["z_c_ohm"] = *c.secondary.z_c_ohm;
    if (c.secondary.total_capacitance_f) sec["total_capacitance_f"] = *c.secondary.total_capacitance_f;
    sec["r_total_ohm"] = c.secondary.r_total_ohm;
    j["secondary"] = sec;

    json tr;
    const auto& np = c.transformer.nameplate;
    tr["s_va"] = np.s_rated_va;
    tr["u_hv_v"] = np.u_hv_v;
    tr["u_lv_v"] = np.u_lv_v;
    tr["u_hv_tap1_v"] = np.u_hv_tap1_v;
    tr["u_hv_tap_max_v"] = np.u_hv_tap_max_v;
    tr["tap_count"] = np.tap_count;
    tr["z_leak_pct"] = np.z_leak_pct;
    if (np.z_leak_tap1_pct) tr["z_leak_tap1_pct"] = *np.z_leak_tap1_pct;
    if (np.z_leak_tap_max_pct) tr["z_leak_tap_max_pct"] = *np.z_leak_tap_max_pct;
    tr["i_mag_pct"] = np.i_mag_pct;
    tr["p_noload_w"] = np.p_noload_w;
    tr["p_shortcircuit_w"] = np.p_shortcircuit_w;
    tr["f_rated_hz"] = np.f_rated_hz;
    tr["tap"] = c.transformer.tap;
    tr["saturable"] = c.transformer.saturable;
    tr["capacitive"] = c.transformer.capacitive;
    tr["k_c"] = c.transformer.k_c;
    tr["lv_neutral"] = to_string(c.transformer.lv_neutral);
    j["transformer"] = tr;

    json sw;
    sw["mode"] = to_string(c.switching.mode);
    sw["object"] = to_string(c.switching.object);
    sw["t_close_s"] = c.switching.t_close_s;
    if (c.switching.settle_cycles) sw["settle_cycles"] = *c.switching.settle_cycles;
    j["switching"] = sw;

    json sim;
    if (c.sim.dt_s) sim["dt_s"] = *c.sim.dt_s;
    if (c.sim.t_end_s) sim["t_end_s"] = *c.sim.t_end_s;
    j["sim"] = sim;

    j["probes"] = c.probes;

    return j.dump(2) + "\n";
}

std::string scenario_digest(const ScenarioConfig& config) {
    const std::string text = serialize_scenario(config);
    std::uint64_t hash = 1469598103934665603ull;
    for (const unsigned char ch : text) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

ScenarioConfig resolve_scenario(const ScenarioConfig& input) {
    ScenarioConfig c = input;

    if (c.source.u_ll_rms_v <= 0.0) throw ConfigError("source.u_ll_rms_v", "missing or non-positive");
    if (c.source.f_hz <= 0.0) throw ConfigError("source.f_hz", "must be > 0");
    if (c.phases != 1 && c.phases != 3) throw ConfigError("phases", "must be 1 or 3");

    auto& np = c.transformer.nameplate;
    if (np.s_rated_va <= 0.0) {
        if (c.case_kind == CaseKind::Custom) throw ConfigError("transformer.s_va", "missing required field");
        np = (c.case_kind == CaseKind::CaseA) ? zvd_nameplate() : ddw_nameplate();
    }
    if (c.transformer.tap < 1 || c.transformer.tap > np.tap_count) {
        throw ConfigError("transformer.tap",
                          "tap out of range (1.." + std::to_string(np.tap_count) + ")");
    }
    if (c.transformer.capacitive && (c.transformer.k_c <= 0.0 || c.transformer.k_c >= 1.0)) {
        throw ConfigError("transformer.k_c", "must be in (0, 1)");
    }

    if (c.parallel_branch && !c.primary_cable) {
        throw ConfigError("parallel_branch", "requires a primary_cable");
    }
    if (c.switching.object == SwitchedObject::LineOnly &&
        c.secondary.kind != SecondaryKind::Line) {
        throw ConfigError("switching.object", "line_only requires secondary.kind = line");
    }

    // Source impedance. The default bus equivalent is surge-resistive: a pure
    // power-frequency Thevenin inductance would smear the launched wavefront
    // over L/(R+Z_c) and suppress the travelling-wave pattern entirely.
    if (!c.source.r_thev_ohm) {
        c.source.r_thev_ohm = (c.case_kind == CaseKind::CaseA) ? 20.0 : 0.0;
    }
    if (!c.source.l_thev_h) {
        c.source.l_thev_h = (c.source.sc_current_a > 0.0)
                                ? thevenin_from_short_circuit(c.source.u_ll_rms_v,
                                                              c.source.sc_current_a, c.source.f_hz)
                                : 0.0;
    }

    if (c.primary_cable) {
        auto& pc = *c.primary_cable;
        if (pc.length_m <= 0.0) throw ConfigError("primary_cable.length_m", "must be > 0");
        if (pc.velocity_m_per_s <= 0.0) throw ConfigError("primary_cable.velocity_m_per_s", "must be > 0");
        if (pc.z_c_ohm <= 0.0) throw ConfigError("primary_cable.z_c_ohm", "must be > 0");
    }

    auto& sec = c.secondary;
    if (sec.kind == SecondaryKind::Cable) {
        if (sec.length_m <= 0.0) sec.length_m = 60.0;
        if (!sec.capacitance_f) sec.capacitance_f = kCableCapPerMeter * sec.length_m;
        if (*sec.capacitance_f <= 0.0) throw ConfigError("secondary.capacitance_f", "must be > 0");
    } else if (sec.kind == SecondaryKind::Line) {
        if (sec.length_m <= 0.0) sec.length_m = 4000.0;
        if (sec.velocity_m_per_s <= 0.0) throw ConfigError("secondary.velocity_m_per_s", "must be > 0");
        const Real tau = sec.length_m / sec.velocity_m_per_s;
        if (!sec.z_c_ohm) {
            // Preserve the total line capacitance (the resonance-governing
            // quantity) and let the surge impedance follow z = tau/C.
            const Real c_total = sec.total_capacitance_f.value_or(118e-9);
            if (c_total <= 0.0) throw ConfigError("secondary.total_capacitance_f", "must be > 0");
            sec.z_c_ohm = tau / c_total;
        }
        if (*sec.z_c_ohm <= 0.0) throw ConfigError("secondary.z_c_ohm", "must be > 0");
        sec.total_capacitance_f = tau / *sec.z_c_ohm;
    }

    // Switching instants.
    if (!c.switching.settle_cycles) {
        if (c.case_kind == CaseKind::CaseA) {
            c.switching.settle_cycles = 3.0;
        } else if (c.switching.object == SwitchedObject::LineOnly) {
            c.switching.settle_cycles = 3.0;
        } else {
            c.switching.settle_cycles = 1.0;
        }
    }
    const Real f = c.source.f_hz;
    const Real settle = *c.switching.settle_cycles;
    if (c.switching.mode == SwitchingMode::PhaseAPeak) {
        const Real k = std::max(1.0, std::ceil(settle - 1e-9));
        c.switching.t_close_s.fill(k / f);
    } else if (c.switching.mode == SwitchingMode::PhaseAZero) {
        const Real k = std::max(0.0, std::ceil(settle - 0.75 - 1e-9));
        c.switching.t_close_s.fill((k + 0.75) / f);
    } else {
        for (std::size_t i = 0; i < 3; ++i) {
            if (!(c.switching.t_close_s[i] >= 0.0)) {
                throw ConfigError("switching.t_close_s[" + std::to_string(i) + "]",
                                  "must be >= 0");
            }
        }
    }

    // Simulation grid.
    const Real l_leak = leakage_inductance(np, c.transformer.tap, WindingSide::Lv);
    Real dt = 1.0 / (2000.0 * f);
    if (c.primary_cable) {
        dt = std::min(dt, c.primary_cable->length_m / c.primary_cable->velocity_m_per_s / 20.0);
    }
    Real c_nat = 0.0;
    if (sec.kind == SecondaryKind::Cable) {
        c_nat = *sec.capacitance_f;
    } else if (sec.kind == SecondaryKind::Line) {
        dt = std::min(dt, sec.length_m / sec.velocity_m_per_s / 20.0);
        c_nat = *sec.total_capacitance_f;
    }
    if (c_nat > 0.0) {
        dt = std::min(dt, 1.0 / (200.0 * natural_frequency(l_leak, c_nat)));
    }
    if (!c.sim.dt_s) c.sim.dt_s = dt;
    if (*c.sim.dt_s <= 0.0) throw ConfigError("sim.dt_s", "must be > 0");
    const Real t_close_max = *std::max_element(c.switching.t_close_s.begin(),
                                               c.switching.t_close_s.end());
    if (!c.sim.t_end_s) c.sim.t_end_s = t_close_max + 0.05;
    if (*c.sim.t_end_s <= *c.sim.dt_s) throw ConfigError("sim.t_end_s", "must be > sim.dt_s");

    // Probe selection: defaults per case, base names expanded per phase.
    if (c.probes.empty()) {
        if (c.case_kind == CaseKind::CaseA) {
            c.probes = {"v_bus", "v_hv", "v_lv"};
        } else {
            c.probes = {"v_lv"};
            if (sec.kind == SecondaryKind::Line) c.probes.push_back("v_line_end");
        }
        if (c.transformer.saturable) c.probes.push_back("i_mag");
    }
    std::vector<std::string> expanded;
    for (const auto& name : c.probes) {
        if (has_phase_suffix(name)) {
            expanded.push_back(name);
        } else {
            for (int p = 0; p < c.phases; ++p) expanded.push_back(name + kPhaseSuffix[static_cast<std::size_t>(p)]);
        }
    }
    c.probes = std::move(expanded);

    return c;
}

namespace {

// Per-phase circuit assembly shared by all cases.
struct Builder {
    const ScenarioConfig& cfg;
    Circuit circuit;
    std::map<std::string, Probe> catalog;

    explicit Builder(const ScenarioConfig& config) : cfg(config) {
        circuit.phase_count = cfg.phases;
    }

    void offer(const std::string& base, int phase, Probe probe) {
        probe.name = base + kPhaseSuffix[static_cast<std::size_t>(phase)];
        catalog.emplace(probe.name, std::move(probe));
    }

    NodeId lv_neutral_node() {
        if (cfg.transformer.lv_neutral == NeutralTreatment::Grounded) return kGround;
        const NodeId n = circuit.new_node();
        circuit.add(Resistor{n, kGround, kFloatingTieOhm});
        return n;
    }

    void attach_secondary(NodeId lv, int phase, Real t_close, const std::string& tag) {
        const auto& sec = cfg.secondary;
        if (sec.kind == SecondaryKind::Cable) {
            circuit.add(Capacitor{lv, kGround, *sec.capacitance_f});
        } else if (sec.kind == SecondaryKind::Line) {
            NodeId from = lv;
            if (cfg.switching.object == SwitchedObject::LineOnly && tag.empty()) {
                from = circuit.new_node();
                circuit.add(Switch{lv, from, t_close});
            }
            const NodeId end = circuit.new_node();
            const Real tau = sec.length_m / sec.velocity_m_per_s;
            const ElementId line =
                circuit.add(BergeronLine{from, end, *sec.z_c_ohm, tau, sec.r_total_ohm});
            offer("v_line_end" + tag, phase, Probe::at_node("", end));
            offer("i_line_send" + tag, phase, Probe::at_branch("", line, BranchTap::Send));
        }
    }

    void build_phase(int phase) {
        const Real amplitude = std::sqrt(2.0 / 3.0) * cfg.source.u_ll_rms_v;
        const Real t_close = cfg.switching.t_close_s[static_cast<std::size_t>(phase)];
        const TransformerModel model =
            build_model(cfg.transformer.nameplate, cfg.transformer.tap,
                        {cfg.transformer.saturable, cfg.transformer.capacitive,
                         cfg.transformer.k_c});

        const NodeId bus = circuit.new_node();
        const ElementId src =
            circuit.add(VoltageSource{bus, amplitude, cfg.source.f_hz,
                                      kPhaseShift[static_cast<std::size_t>(phase)],
                                      *cfg.source.r_thev_ohm, *cfg.source.l_thev_h});
        offer("v_bus", phase, Probe::at_node("", bus));
        offer("i_src", phase, Probe::at_branch("", src));

        // Switched feeder: breaker at the bus, then the cable when present.
        const bool combined = cfg.switching.object == SwitchedObject::Combined;
        NodeId hv = circuit.new_node();
        if (cfg.primary_cable) {
            const NodeId send = circuit.new_node();
            circuit.add(Switch{bus, send, combined ? t_close : 0.0});
            const auto& pc = *cfg.primary_cable;
            circuit.add(BergeronLine{send, hv, pc.z_c_ohm, pc.length_m / pc.velocity_m_per_s,
                                     pc.r_total_ohm});
            offer("v_cable_send", phase, Probe::at_node("", send));
        } else {
            circuit.add(Switch{bus, hv, combined ? t_close : 0.0});
        }

        const NodeId lv = circuit.new_node();
        const NodeId lvn = lv_neutral_node();
        const ElementId xfmr = circuit.add(Transformer{hv, kGround, lv, lvn, model});
        offer("v_hv", phase, Probe::at_node("", hv));
        offer("v_lv", phase, Probe::at_node("", lv));
        offer("i_hv", phase, Probe::at_branch("", xfmr, BranchTap::HvPort));
        offer("i_mag", phase, Probe::at_branch("", xfmr, BranchTap::Magnetizing));

        attach_secondary(lv, phase, t_close, "");

        // Already-energized twin feeder on the same bus (its breaker closes
        // at t = 0; analysis windows discard the settling cycles).
        if (cfg.parallel_branch && cfg.primary_cable) {
            const NodeId send2 = circuit.new_node();
            circuit.add(Switch{bus, send2, 0.0});
            const NodeId hv2 = circuit.new_node();
            const auto& pc = *cfg.primary_cable;
            circuit.add(BergeronLine{send2, hv2, pc.z_c_ohm,
                                     pc.length_m / pc.velocity_m_per_s, pc.r_total_ohm});
            const NodeId lv2 = circuit.new_node();
            const NodeId lvn2 = lv_neutral_node();
            circuit.add(Transformer{hv2, kGround, lv2, lvn2, model});
            offer("v_hv2", phase, Probe::at_node("", hv2));
            offer("v_lv2", phase, Probe::at_node("", lv2));
            if (cfg.secondary.kind == SecondaryKind::Cable) {
                circuit.add(Capacitor{lv2, kGround, *cfg.secondary.capacitance_f});
            }
        }
    }
};

} // namespace

BuiltScenario build_scenario(const ScenarioConfig& config) {
    const ScenarioConfig resolved = resolve_scenario(config);

    Builder builder(resolved);
    for (int p = 0; p < resolved.phases; ++p) builder.build_phase(p);

    for (const auto& name : resolved.probes) {
        const auto it = builder.catalog.find(name);
        if (it == builder.catalog.end()) {
            throw ConfigError("probes", "unknown probe '" + name + "'");
        }
        builder.circuit.add_probe(it->second);
    }

    BuiltScenario built;
    built.circuit = std::move(builder.circuit);
    built.resolved = resolved;
    built.pole_close_s = resolved.switching.t_close_s;
    built.t_close_s = resolved.switching.t_close_s[0];
    built.dt_s = *resolved.sim.dt_s;
    built.t_end_s = *resolved.sim.t_end_s;
    return built;
}

BuiltScenario build_case_a(const ScenarioConfig& config) {
    if (config.case_kind != CaseKind::CaseA) throw ConfigError("case_kind", "expected case_a");
    return build_scenario(config);
}

BuiltScenario build_case_b(const ScenarioConfig& config) {
    if (config.case_kind != CaseKind::CaseB) throw ConfigError("case_kind", "expected case_b");
    return build_scenario(config);
}

WaveformSet run_scenario(const BuiltScenario& scenario) {
    return run(scenario.circuit, scenario.dt_s, scenario.t_end_s);
}

} // namespace tbench
