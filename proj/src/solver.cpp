#include "tbench/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <variant>

namespace tbench {

CompanionStamp companion_inductor(Real l_h, Real dt, Real v_prev, Real i_prev) {
    if (l_h <= 0.0) throw std::invalid_argument("l must be > 0");
    if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
    const Real g = dt / (2.0 * l_h);
    return {g, i_prev + g * v_prev};
}

CompanionStamp companion_capacitor(Real c_f, Real dt, Real v_prev, Real i_prev) {
    if (c_f <= 0.0) throw std::invalid_argument("c must be > 0");
    if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
    const Real g = 2.0 * c_f / dt;
    return {g, -i_prev - g * v_prev};
}

Real bergeron_history(Real z_c_ohm, Real v_far, Real i_far) {
    return -v_far / z_c_ohm - i_far;
}

// ---------------------------------------------------------------------------
// WaveformSet
// ---------------------------------------------------------------------------

WaveformSet::WaveformSet(Real dt, Real t0, std::vector<std::string> names,
                         std::vector<std::vector<Real>> samples)
    : dt_(dt), t0_(t0), names_(std::move(names)), samples_(std::move(samples)) {
    for (const auto& s : samples_) {
        if (s.size() != samples_.front().size()) {
            throw std::invalid_argument("probe arrays must have equal length");
        }
    }
}

std::size_t WaveformSet::sample_count() const {
    return samples_.empty() ? 0 : samples_.front().size();
}

bool WaveformSet::has_probe(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t WaveformSet::probe_index(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        throw std::invalid_argument("unknown probe: " + std::string(name));
    }
    return static_cast<std::size_t>(it - names_.begin());
}

std::span<const Real> WaveformSet::samples(std::size_t probe) const {
    return samples_.at(probe);
}

std::span<const Real> WaveformSet::samples(std::string_view name) const {
    return samples_[probe_index(name)];
}

// ---------------------------------------------------------------------------
// Solver internals
// ---------------------------------------------------------------------------

namespace {

constexpr Real kSwitchOpenS = 1e-9;
constexpr Real kSwitchClosedS = 1e9;
constexpr int kMaxHalvingDepth = 12;

// Time-indexed history of one line end; linear interpolation between stored
// samples, zeros before the recorded past (de-energized line).
class LineHistory {
public:
    void reset(Real horizon) {
        horizon_ = horizon;
        samples_.clear();
    }

    void push(Real t, Real v, Real i) {
        samples_.push_back({t, v, i});
        while (samples_.size() > 2 && samples_[1].t <= t - horizon_) {
            samples_.pop_front();
        }
    }

    [[nodiscard]] std::pair<Real, Real> at(Real t) const {
        if (samples_.empty() || t < samples_.front().t) {
            return {0.0, 0.0};
        }
        const auto it = std::lower_bound(
            samples_.begin(), samples_.end(), t,
            [](const Sample& s, Real value) { return s.t < value; });
        if (it == samples_.end()) {
            return {samples_.back().v, samples_.back().i};
        }
        if (it == samples_.begin()) return {it->v, it->i};
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const Real frac = (t - lo.t) / (hi.t - lo.t);
        return {lo.v + frac * (hi.v - lo.v), lo.i + frac * (hi.i - lo.i)};
    }

private:
    struct Sample {
        Real t, v, i;
    };
    std::deque<Sample> samples_;
    Real horizon_ = 0.0;
};

// Trapezoidal companion branch (L, C or two-slope saturable L) between two
// matrix indices (-1 = ground).
struct Companion {
    enum class Kind { Inductor, Capacitor, Saturable };
    Kind kind = Kind::Inductor;
    int a = -1, b = -1;
    Real value = 0.0;   // inductance or capacitance
    Real l_sat = 0.0;   // Saturable only
    Real knee = 0.0;
    // Per-step state
    Real g = 0.0;
    Real i_hist = 0.0;
    Real v_prev = 0.0;
    Real i_prev = 0.0;
    Real flux = 0.0;
    bool saturated = false;

    [[nodiscard]] Real effective_l() const {
        return saturated ? l_sat : value;
    }

    void refresh(Real h) {
        if (kind == Kind::Capacitor) {
            g = 2.0 * value / h;
        } else {
            g = h / (2.0 * effective_l());
        }
    }

    void refresh_history() {
        i_hist = (kind == Kind::Capacitor) ? -i_prev - g * v_prev : i_prev + g * v_prev;
    }
};

struct PResistor {
    int a, b;
    Real g;
};

struct PInductor {
    int comp;
};

struct PCapacitor {
    int comp;
};

struct PSaturable {
    int comp;
};

struct PSource {
    int row = -1;     // EMF constraint row
    int emf_idx = -1; // matrix index of the EMF node
    Real amplitude, omega, phase;
    int r_a = -1, r_b = -1;
    Real g_r = 0.0;
    int comp_l = -1;
    Real last_delivered = 0.0;
};

struct PSwitch {
    int a, b;
    Real t_close;
    bool closed = false;
};

struct PLine {
    int a, b;           // send / receive matrix indices
    Real z_mod;         // z_c + r/4
    Real h_factor;      // (z_c - r/4) / (z_c + r/4); 1 for lossless
    Real tau;
    LineHistory hist_send, hist_recv;
    Real ih_send = 0.0, ih_recv = 0.0;
    Real last_i_send = 0.0, last_i_recv = 0.0;
};

struct PTransformer {
    int hp, hn, lp, ln;
    int m = -1; // LV-side image of the HV port
    int k = -1; // between series resistance and leakage
    int row = -1;
    Real ratio = 1.0;
    Real g_series = 0.0;
    Real g_mag_r = 0.0;
    int comp_leak = -1;
    int comp_mag = -1;
    int comp_chl = -1;
    int comp_csurge = -1;
    Real last_hv_current = 0.0;
};

using PElement = std::variant<PResistor, PInductor, PCapacitor, PSaturable, PSource, PSwitch,
                              PLine, PTransformer>;

Real saturable_current(Real flux, Real l_unsat, Real l_sat, Real knee) {
    if (std::abs(flux) <= knee) return flux / l_unsat;
    const Real sign = flux >= 0.0 ? 1.0 : -1.0;
    return sign * knee / l_unsat + (flux - sign * knee) / l_sat;
}

} // namespace

struct SolverSession::Impl {
    Circuit circuit;
    Real dt;
    long step_count = 0;
    Real time = 0.0;

    int n_unknowns = 0;
    Eigen::MatrixXd A;
    Eigen::VectorXd b, x;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    bool matrix_dirty = true;
    Real stamped_h = 0.0;

    std::vector<Real> node_v; // committed node voltages, index = NodeId
    std::vector<Companion> companions;
    std::vector<PElement> prepared;

    explicit Impl(const Circuit& c, Real dt_in) : circuit(c), dt(dt_in) {
        if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
        check_line_timestep();
        prepare();
        apply_switch_events(0.0);
        initialize_state();
    }

    [[nodiscard]] int idx(NodeId n) const { return n == kGround ? -1 : n - 1; }

    void check_line_timestep() const {
        Real tau_min = std::numeric_limits<Real>::infinity();
        for (const auto& e : circuit.elements()) {
            if (const auto* line = std::get_if<BergeronLine>(&e)) {
                tau_min = std::min(tau_min, line->tau_s);
            }
        }
        if (std::isfinite(tau_min) && dt > tau_min / 10.0 * (1.0 + 1e-12)) {
            throw std::invalid_argument(
                "dt too large for Bergeron line: largest compliant dt = " +
                std::to_string(tau_min / 10.0) + " s (tau = " + std::to_string(tau_min) + " s)");
        }
    }

    int alloc_internal() { return n_unknowns++; }

    int add_companion(Companion c) {
        companions.push_back(c);
        return static_cast<int>(companions.size() - 1);
    }

    void prepare() {
        const int user_unknowns = circuit.node_count() - 1;
        n_unknowns = user_unknowns;
        node_v.assign(static_cast<std::size_t>(circuit.node_count()), 0.0);

        std::vector<int> rows_pending; // resolved after internal nodes are known
        for (const auto& e : circuit.elements()) {
            std::visit([this](const auto& el) { prepare_element(el); }, e);
        }

        A.resize(n_unknowns, n_unknowns);
        b.resize(n_unknowns);
        x.resize(n_unknowns);
        matrix_dirty = true;
    }

    void prepare_element(const Resistor& el) {
        prepared.emplace_back(PResistor{idx(el.n1), idx(el.n2), 1.0 / el.r_ohm});
    }

    void prepare_element(const Inductor& el) {
        Companion c;
        c.kind = Companion::Kind::Inductor;
        c.a = idx(el.n1);
        c.b = idx(el.n2);
        c.value = el.l_h;
        c.i_prev = el.i0_a;
        prepared.emplace_back(PInductor{add_companion(c)});
    }

    void prepare_element(const Capacitor& el) {
        Companion c;
        c.kind = Companion::Kind::Capacitor;
        c.a = idx(el.n1);
        c.b = idx(el.n2);
        c.value = el.c_f;
        c.v_prev = el.v0_v;
        prepared.emplace_back(PCapacitor{add_companion(c)});
    }

    void prepare_element(const SaturableInductor& el) {
        Companion c;
        c.kind = Companion::Kind::Saturable;
        c.a = idx(el.n1);
        c.b = idx(el.n2);
        c.value = el.l_unsat_h;
        c.l_sat = el.l_sat_h;
        c.knee = el.flux_knee_wb;
        c.flux = el.flux0_wb;
        c.saturated = std::abs(el.flux0_wb) > el.flux_knee_wb;
        c.i_prev = saturable_current(el.flux0_wb, el.l_unsat_h, el.l_sat_h, el.flux_knee_wb);
        prepared.emplace_back(PSaturable{add_companion(c)});
    }

    void prepare_element(const VoltageSource& el) {
        PSource s;
        s.amplitude = el.amplitude_v;
        s.omega = 2.0 * std::numbers::pi * el.freq_hz;
        s.phase = el.phase_rad;
        const int n_pos = idx(el.n_pos);
        const bool has_r = el.r_thev_ohm > 0.0;
        const bool has_l = el.l_thev_h > 0.0;
        if (!has_r && !has_l) {
            s.emf_idx = n_pos;
        } else {
            s.emf_idx = alloc_internal();
            int tail = s.emf_idx;
            if (has_r) {
                const int next = has_l ? alloc_internal() : n_pos;
                s.r_a = tail;
                s.r_b = next;
                s.g_r = 1.0 / el.r_thev_ohm;
                tail = next;
            }
            if (has_l) {
                Companion c;
                c.kind = Companion::Kind::Inductor;
                c.a = tail;
                c.b = n_pos;
                c.value = el.l_thev_h;
                s.comp_l = add_companion(c);
            }
        }
        s.row = alloc_internal();
        prepared.emplace_back(s);
    }

    void prepare_element(const Switch& el) {
        prepared.emplace_back(PSwitch{idx(el.n1), idx(el.n2), el.t_close_s, false});
    }

    void prepare_element(const BergeronLine& el) {
        PLine line;
        line.a = idx(el.n_send);
        line.b = idx(el.n_recv);
        const Real r4 = el.r_total_ohm / 4.0;
        line.z_mod = el.z_c_ohm + r4;
        line.h_factor = (el.z_c_ohm - r4) / (el.z_c_ohm + r4);
        line.tau = el.tau_s;
        line.hist_send.reset(el.tau_s + 4.0 * dt);
        line.hist_recv.reset(el.tau_s + 4.0 * dt);
        prepared.emplace_back(std::move(line));
    }

    void prepare_element(const Transformer& el) {
        const auto& m = el.model;
        PTransformer t;
        t.hp = idx(el.hv_pos);
        t.hn = idx(el.hv_neg);
        t.lp = idx(el.lv_pos);
        t.ln = idx(el.lv_neg);
        t.ratio = m.ratio;
        t.m = alloc_internal();

        if (m.r_series_lv_ohm > 0.0) {
            t.k = alloc_internal();
            t.g_series = 1.0 / m.r_series_lv_ohm;
        } else {
            t.k = t.m;
        }

        Companion leak;
        leak.kind = Companion::Kind::Inductor;
        leak.a = t.k;
        leak.b = t.lp;
        leak.value = m.l_leak_lv_h;
        t.comp_leak = add_companion(leak);

        if (m.l_mag_lv_h > 0.0) {
            Companion mag;
            mag.a = t.lp;
            mag.b = t.ln;
            if (m.l_sat_lv_h > 0.0) {
                mag.kind = Companion::Kind::Saturable;
                mag.value = m.l_mag_lv_h;
                mag.l_sat = m.l_sat_lv_h;
                mag.knee = m.flux_knee_wb;
            } else {
                mag.kind = Companion::Kind::Inductor;
                mag.value = m.l_mag_lv_h;
            }
            t.comp_mag = add_companion(mag);
        }
        if (m.r_mag_lv_ohm > 0.0) {
            t.g_mag_r = 1.0 / m.r_mag_lv_ohm;
        }
        if (m.c_hl_f > 0.0) {
            Companion chl;
            chl.kind = Companion::Kind::Capacitor;
            chl.a = t.hp;
            chl.b = t.lp;
            chl.value = m.c_hl_f;
            t.comp_chl = add_companion(chl);
        }
        if (m.c_surge_f > 0.0) {
            Companion cs;
            cs.kind = Companion::Kind::Capacitor;
            cs.a = t.lp;
            cs.b = t.ln;
            cs.value = m.c_surge_f;
            t.comp_csurge = add_companion(cs);
        }
        t.row = alloc_internal();
        prepared.emplace_back(std::move(t));
    }

    // Consistent t = 0 snapshot: inductive branches carry their initial
    // currents as fixed sources, capacitive branches pin their initial
    // voltages through constraint rows. The solution supplies the companion
    // histories with right-limit values, which keeps the trapezoidal march
    // second-order from the first step.
    void initialize_state() {
        std::vector<int> cap_rows(companions.size(), -1);
        int m = n_unknowns;
        for (std::size_t ci = 0; ci < companions.size(); ++ci) {
            if (companions[ci].kind == Companion::Kind::Capacitor) cap_rows[ci] = m++;
        }

        Eigen::MatrixXd aux = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);

        auto stamp_aux_g = [&](int a, int bnode, Real g) {
            if (a >= 0) {
                aux(a, a) += g;
                if (bnode >= 0) aux(a, bnode) -= g;
            }
            if (bnode >= 0) {
                aux(bnode, bnode) += g;
                if (a >= 0) aux(bnode, a) -= g;
            }
        };
        auto inject = [&](int a, int bnode, Real i) {
            if (a >= 0) rhs(a) -= i;
            if (bnode >= 0) rhs(bnode) += i;
        };

        for (std::size_t ci = 0; ci < companions.size(); ++ci) {
            const auto& c = companions[ci];
            if (c.kind == Companion::Kind::Capacitor) {
                const int row = cap_rows[ci];
                if (c.a >= 0) {
                    aux(row, c.a) = 1.0;
                    aux(c.a, row) = 1.0;
                }
                if (c.b >= 0) {
                    aux(row, c.b) = -1.0;
                    aux(c.b, row) = -1.0;
                }
                rhs(row) = c.v_prev;
            } else {
                inject(c.a, c.b, c.i_prev);
            }
        }

        for (const auto& pe : prepared) {
            std::visit(
                [&](const auto& el) {
                    using T = std::decay_t<decltype(el)>;
                    if constexpr (std::is_same_v<T, PResistor>) {
                        stamp_aux_g(el.a, el.b, el.g);
                    } else if constexpr (std::is_same_v<T, PSource>) {
                        if (el.g_r > 0.0) stamp_aux_g(el.r_a, el.r_b, el.g_r);
                        aux(el.row, el.emf_idx) = 1.0;
                        aux(el.emf_idx, el.row) = 1.0;
                        rhs(el.row) = emf_value(el, 0.0);
                    } else if constexpr (std::is_same_v<T, PSwitch>) {
                        stamp_aux_g(el.a, el.b, el.closed ? kSwitchClosedS : kSwitchOpenS);
                    } else if constexpr (std::is_same_v<T, PLine>) {
                        const Real g = 1.0 / el.z_mod;
                        if (el.a >= 0) aux(el.a, el.a) += g;
                        if (el.b >= 0) aux(el.b, el.b) += g;
                    } else if constexpr (std::is_same_v<T, PTransformer>) {
                        if (el.g_series > 0.0) stamp_aux_g(el.m, el.k, el.g_series);
                        if (el.g_mag_r > 0.0) stamp_aux_g(el.lp, el.ln, el.g_mag_r);
                        auto put = [&](int row, int col, Real v) {
                            if (col >= 0) {
                                aux(row, col) += v;
                                aux(col, row) += v;
                            }
                        };
                        put(el.row, el.hp, 1.0);
                        put(el.row, el.hn, -1.0);
                        put(el.row, el.m, -el.ratio);
                        put(el.row, el.ln, el.ratio);
                    }
                },
                pe);
        }

        Eigen::VectorXd sol = aux.partialPivLu().solve(rhs);
        if (!sol.allFinite()) {
            throw NumericFault("inconsistent or floating initial conditions", 0);
        }
        auto v_of = [&](int index) { return index < 0 ? 0.0 : sol(index); };

        for (std::size_t ci = 0; ci < companions.size(); ++ci) {
            auto& c = companions[ci];
            if (c.kind == Companion::Kind::Capacitor) {
                c.i_prev = sol(cap_rows[ci]);
            } else {
                c.v_prev = v_of(c.a) - v_of(c.b);
            }
        }
        for (auto& pe : prepared) {
            std::visit(
                [&](auto& el) {
                    using T = std::decay_t<decltype(el)>;
                    if constexpr (std::is_same_v<T, PSource>) {
                        el.last_delivered = -sol(el.row);
                    } else if constexpr (std::is_same_v<T, PLine>) {
                        const Real v_s = v_of(el.a);
                        const Real v_r = v_of(el.b);
                        el.last_i_send = v_s / el.z_mod;
                        el.last_i_recv = v_r / el.z_mod;
                        el.hist_send.push(0.0, v_s, el.last_i_send);
                        el.hist_recv.push(0.0, v_r, el.last_i_recv);
                    } else if constexpr (std::is_same_v<T, PTransformer>) {
                        el.last_hv_current = sol(el.row);
                    }
                },
                pe);
        }
        for (NodeId n = 1; n < circuit.node_count(); ++n) {
            node_v[static_cast<std::size_t>(n)] = sol(n - 1);
        }
    }

    // -- assembly -----------------------------------------------------------

    void stamp_g(int a, int bnode, Real g) {
        if (a >= 0) {
            A(a, a) += g;
            if (bnode >= 0) A(a, bnode) -= g;
        }
        if (bnode >= 0) {
            A(bnode, bnode) += g;
            if (a >= 0) A(bnode, a) -= g;
        }
    }

    void rebuild_matrix(Real h) {
        A.setZero();
        for (auto& c : companions) c.refresh(h);

        for (auto& pe : prepared) {
            std::visit(
                [this](auto& el) {
                    using T = std::decay_t<decltype(el)>;
                    if constexpr (std::is_same_v<T, PResistor>) {
                        stamp_g(el.a, el.b, el.g);
                    } else if constexpr (std::is_same_v<T, PInductor> ||
                                         std::is_same_v<T, PCapacitor> ||
                                         std::is_same_v<T, PSaturable>) {
                        const auto& c = companions[static_cast<std::size_t>(el.comp)];
                        stamp_g(c.a, c.b, c.g);
                    } else if constexpr (std::is_same_v<T, PSource>) {
                        if (el.g_r > 0.0) stamp_g(el.r_a, el.r_b, el.g_r);
                        if (el.comp_l >= 0) {
                            const auto& c = companions[static_cast<std::size_t>(el.comp_l)];
                            stamp_g(c.a, c.b, c.g);
                        }
                        // EMF constraint: v(emf) = e(t)
                        A(el.row, el.emf_idx) = 1.0;
                        A(el.emf_idx, el.row) = 1.0;
                    } else if constexpr (std::is_same_v<T, PSwitch>) {
                        stamp_g(el.a, el.b, el.closed ? kSwitchClosedS : kSwitchOpenS);
                    } else if constexpr (std::is_same_v<T, PLine>) {
                        const Real g = 1.0 / el.z_mod;
                        if (el.a >= 0) A(el.a, el.a) += g;
                        if (el.b >= 0) A(el.b, el.b) += g;
                    } else if constexpr (std::is_same_v<T, PTransformer>) {
                        if (el.g_series > 0.0) stamp_g(el.m, el.k, el.g_series);
                        if (el.g_mag_r > 0.0) stamp_g(el.lp, el.ln, el.g_mag_r);
                        for (int comp : {el.comp_leak, el.comp_mag, el.comp_chl, el.comp_csurge}) {
                            if (comp < 0) continue;
                            const auto& c = companions[static_cast<std::size_t>(comp)];
                            stamp_g(c.a, c.b, c.g);
                        }
                        // Ideal-ratio constraint v_hv = ratio * v_lv' and the
                        // matching port currents (j at HV, -ratio*j at LV').
                        auto put = [this](int row, int col, Real v) {
                            if (col >= 0) {
                                A(row, col) += v;
                                A(col, row) += v;
                            }
                        };
                        put(el.row, el.hp, 1.0);
                        put(el.row, el.hn, -1.0);
                        put(el.row, el.m, -el.ratio);
                        put(el.row, el.ln, el.ratio);
                    }
                },
                pe);
        }
        lu.compute(A);
        stamped_h = h;
        matrix_dirty = false;
    }

    [[nodiscard]] Real emf_value(const PSource& s, Real t) const {
        return s.amplitude * std::cos(s.omega * t + s.phase);
    }

    void add_hist(int a, int bnode, Real i_hist) {
        // Norton injection from a to b: i = g*v + i_hist leaves node a.
        if (a >= 0) b(a) -= i_hist;
        if (bnode >= 0) b(bnode) += i_hist;
    }

    void build_rhs(Real t_target) {
        b.setZero();
        for (auto& c : companions) {
            c.refresh_history();
            add_hist(c.a, c.b, c.i_hist);
        }
        for (auto& pe : prepared) {
            std::visit(
                [&](auto& el) {
                    using T = std::decay_t<decltype(el)>;
                    if constexpr (std::is_same_v<T, PSource>) {
                        b(el.row) = emf_value(el, t_target);
                    } else if constexpr (std::is_same_v<T, PLine>) {
                        const auto [v_recv, i_recv] = el.hist_recv.at(t_target - el.tau);
                        const auto [v_send, i_send] = el.hist_send.at(t_target - el.tau);
                        const Real wf = 0.5 * (1.0 + el.h_factor);
                        const Real wn = 0.5 * (1.0 - el.h_factor);
                        el.ih_send = -wf * (v_recv / el.z_mod + el.h_factor * i_recv) -
                                     wn * (v_send / el.z_mod + el.h_factor * i_send);
                        el.ih_recv = -wf * (v_send / el.z_mod + el.h_factor * i_send) -
                                     wn * (v_recv / el.z_mod + el.h_factor * i_recv);
                        if (el.a >= 0) b(el.a) -= el.ih_send;
                        if (el.b >= 0) b(el.b) -= el.ih_recv;
                    }
                },
                pe);
        }
    }

    [[nodiscard]] Real solved_v(int index) const { return index < 0 ? 0.0 : x(index); }

    void solve(Real t_target) {
        x = lu.solve(b);
        if (!x.allFinite()) {
            // Identify the first offending unknown for the diagnostic.
            int bad = 0;
            for (int i = 0; i < x.size(); ++i) {
                if (!std::isfinite(x(i))) {
                    bad = i;
                    break;
                }
            }
            std::string what = "non-finite solution at t = " + std::to_string(t_target);
            if (bad < circuit.node_count() - 1) {
                what += "; node " + std::to_string(bad + 1) +
                        " may belong to a floating subnetwork (run validate())";
            }
            throw NumericFault(what, step_count);
        }
    }

    // Returns true when any saturable companion's segment disagrees with the
    // flux implied by the candidate solution, and flips those segments.
    bool flip_inconsistent_segments(Real h) {
        bool flipped = false;
        for (auto& c : companions) {
            if (c.kind != Companion::Kind::Saturable) continue;
            const Real v_new = solved_v(c.a) - solved_v(c.b);
            const Real flux_cand = c.flux + 0.5 * h * (c.v_prev + v_new);
            const bool sat_cand = std::abs(flux_cand) > c.knee;
            if (sat_cand != c.saturated) {
                c.saturated = sat_cand;
                flipped = true;
            }
        }
        return flipped;
    }

    void commit(Real h, Real t_target) {
        for (auto& c : companions) {
            const Real v_new = solved_v(c.a) - solved_v(c.b);
            const Real i_new = c.g * v_new + c.i_hist;
            if (c.kind == Companion::Kind::Saturable) {
                c.flux += 0.5 * h * (c.v_prev + v_new);
            }
            c.v_prev = v_new;
            c.i_prev = i_new;
        }
        for (auto& pe : prepared) {
            std::visit(
                [&](auto& el) {
                    using T = std::decay_t<decltype(el)>;
                    if constexpr (std::is_same_v<T, PSource>) {
                        el.last_delivered = -x(el.row);
                    } else if constexpr (std::is_same_v<T, PLine>) {
                        const Real v_s = solved_v(el.a);
                        const Real v_r = solved_v(el.b);
                        el.last_i_send = v_s / el.z_mod + el.ih_send;
                        el.last_i_recv = v_r / el.z_mod + el.ih_recv;
                        el.hist_send.push(t_target, v_s, el.last_i_send);
                        el.hist_recv.push(t_target, v_r, el.last_i_recv);
                    } else if constexpr (std::is_same_v<T, PTransformer>) {
                        el.last_hv_current = x(el.row);
                    }
                },
                pe);
        }
        for (NodeId n = 1; n < circuit.node_count(); ++n) {
            node_v[static_cast<std::size_t>(n)] = x(n - 1);
        }
    }

    void apply_switch_events(Real t_target) {
        const Real eps = dt * 1e-7;
        for (auto& pe : prepared) {
            if (auto* sw = std::get_if<PSwitch>(&pe)) {
                if (!sw->closed && sw->t_close <= t_target + eps) {
                    sw->closed = true;
                    matrix_dirty = true;
                }
            }
        }
    }

    void advance_once(Real h, Real t_from, int depth) {
        const Real t_target = t_from + h;
        if (matrix_dirty || stamped_h != h) rebuild_matrix(h);
        build_rhs(t_target);
        solve(t_target);

        if (flip_inconsistent_segments(h)) {
            // Single re-solve with the flipped segments.
            rebuild_matrix(h);
            build_rhs(t_target);
            solve(t_target);
            if (flip_inconsistent_segments(h) && depth < kMaxHalvingDepth) {
                // Still inconsistent: the segment oscillates within the step.
                // Halve locally; segment states re-derive from the sub-steps.
                advance_once(0.5 * h, t_from, depth + 1);
                advance_once(0.5 * h, t_from + 0.5 * h, depth + 1);
                return;
            }
        }
        commit(h, t_target);
    }

    void advance() {
        const Real t_target = static_cast<Real>(step_count + 1) * dt;
        apply_switch_events(t_target);
        advance_once(dt, time, 0);
        ++step_count;
        time = t_target;
    }

    [[nodiscard]] Real branch_current(ElementId id, BranchTap tap) const {
        if (id < 0 || id >= static_cast<ElementId>(prepared.size())) {
            throw std::invalid_argument("unknown element id: " + std::to_string(id));
        }
        const auto& pe = prepared[static_cast<std::size_t>(id)];
        return std::visit(
            [&](const auto& el) -> Real {
                using T = std::decay_t<decltype(el)>;
                if constexpr (std::is_same_v<T, PResistor>) {
                    return el.g * (committed_v(el.a) - committed_v(el.b));
                } else if constexpr (std::is_same_v<T, PInductor> ||
                                     std::is_same_v<T, PCapacitor> ||
                                     std::is_same_v<T, PSaturable>) {
                    return companions[static_cast<std::size_t>(el.comp)].i_prev;
                } else if constexpr (std::is_same_v<T, PSource>) {
                    return el.last_delivered;
                } else if constexpr (std::is_same_v<T, PSwitch>) {
                    const Real g = el.closed ? kSwitchClosedS : kSwitchOpenS;
                    return g * (committed_v(el.a) - committed_v(el.b));
                } else if constexpr (std::is_same_v<T, PLine>) {
                    return tap == BranchTap::Recv ? el.last_i_recv : el.last_i_send;
                } else if constexpr (std::is_same_v<T, PTransformer>) {
                    switch (tap) {
                        case BranchTap::Series:
                            return companions[static_cast<std::size_t>(el.comp_leak)].i_prev;
                        case BranchTap::Magnetizing:
                            if (el.comp_mag < 0) return 0.0;
                            return companions[static_cast<std::size_t>(el.comp_mag)].i_prev;
                        default:
                            return el.last_hv_current;
                    }
                }
                return 0.0;
            },
            pe);
    }

    [[nodiscard]] Real committed_v(int index) const {
        return index < 0 ? 0.0 : node_v[static_cast<std::size_t>(index + 1)];
    }
};

SolverSession::SolverSession(const Circuit& circuit, Real dt)
    : impl_(std::make_unique<Impl>(circuit, dt)) {}
SolverSession::~SolverSession() = default;
SolverSession::SolverSession(SolverSession&&) noexcept = default;
SolverSession& SolverSession::operator=(SolverSession&&) noexcept = default;

void SolverSession::advance() { impl_->advance(); }
long SolverSession::step() const { return impl_->step_count; }
Real SolverSession::time() const { return impl_->time; }
Real SolverSession::dt() const { return impl_->dt; }

Real SolverSession::node_voltage(NodeId node) const {
    if (node < 0 || node >= impl_->circuit.node_count()) {
        throw std::invalid_argument("unknown node: " + std::to_string(node));
    }
    return impl_->node_v[static_cast<std::size_t>(node)];
}

Real SolverSession::branch_current(ElementId element, BranchTap tap) const {
    return impl_->branch_current(element, tap);
}

Real SolverSession::probe_value(const Probe& probe) const {
    if (probe.kind == Probe::Kind::NodeVoltage) return node_voltage(probe.node);
    return branch_current(probe.element, probe.tap);
}

WaveformSet run(const Circuit& circuit, Real dt, Real t_end) {
    if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
    if (t_end <= dt) throw std::invalid_argument("t_end must be > dt");
    if (const auto issues = circuit.validate(); !issues.empty()) {
        throw std::invalid_argument("circuit failed validation: " + issues.front().detail);
    }

    SolverSession session(circuit, dt);
    const auto& probes = circuit.probes();
    const auto n_steps = static_cast<long>(std::floor(t_end / dt + 1e-9));

    std::vector<std::string> names;
    names.reserve(probes.size());
    for (const auto& p : probes) names.push_back(p.name);

    std::vector<std::vector<Real>> samples(probes.size());
    for (auto& s : samples) s.reserve(static_cast<std::size_t>(n_steps) + 1);

    for (std::size_t p = 0; p < probes.size(); ++p) {
        samples[p].push_back(session.probe_value(probes[p]));
    }
    for (long i = 0; i < n_steps; ++i) {
        session.advance();
        for (std::size_t p = 0; p < probes.size(); ++p) {
            samples[p].push_back(session.probe_value(probes[p]));
        }
    }
    return WaveformSet(dt, 0.0, std::move(names), std::move(samples));
}

} // namespace tbench
