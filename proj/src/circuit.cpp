#include "tbench/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tbench {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

void check_element(const Element& e) {
    std::visit(
        [](const auto& el) {
            using T = std::decay_t<decltype(el)>;
            if constexpr (std::is_same_v<T, Resistor>) {
                require(el.r_ohm > 0.0, "r must be > 0");
            } else if constexpr (std::is_same_v<T, Inductor>) {
                require(el.l_h > 0.0, "l must be > 0");
            } else if constexpr (std::is_same_v<T, Capacitor>) {
                require(el.c_f > 0.0, "c must be > 0");
            } else if constexpr (std::is_same_v<T, SaturableInductor>) {
                require(el.l_unsat_h > 0.0, "l_unsat must be > 0");
                require(el.l_sat_h > 0.0, "l_sat must be > 0");
                require(el.l_sat_h <= el.l_unsat_h, "l_sat must be <= l_unsat");
                require(el.flux_knee_wb > 0.0, "flux_knee must be > 0");
            } else if constexpr (std::is_same_v<T, VoltageSource>) {
                require(std::isfinite(el.amplitude_v), "amplitude must be finite");
                require(el.freq_hz >= 0.0, "freq must be >= 0");
                require(el.r_thev_ohm >= 0.0, "r_thev must be >= 0");
                require(el.l_thev_h >= 0.0, "l_thev must be >= 0");
            } else if constexpr (std::is_same_v<T, Switch>) {
                require(el.t_close_s >= 0.0, "t_close must be >= 0 (or never)");
            } else if constexpr (std::is_same_v<T, BergeronLine>) {
                require(el.z_c_ohm > 0.0, "z_c must be > 0");
                require(el.tau_s > 0.0, "tau must be > 0");
                require(el.r_total_ohm >= 0.0, "r_total must be >= 0");
                require(el.r_total_ohm < 4.0 * el.z_c_ohm,
                        "r_total must be < 4*z_c for the lumped-loss line model");
            } else if constexpr (std::is_same_v<T, Transformer>) {
                require(el.model.ratio > 0.0, "transformer ratio must be > 0");
                require(el.model.l_leak_lv_h > 0.0, "l_leak must be > 0");
                require(el.model.r_series_lv_ohm >= 0.0, "r_series must be >= 0");
            }
        },
        e);
}

void for_each_terminal(const Element& e, const auto& fn) {
    std::visit(
        [&](const auto& el) {
            using T = std::decay_t<decltype(el)>;
            if constexpr (std::is_same_v<T, Resistor> || std::is_same_v<T, Inductor> ||
                          std::is_same_v<T, Capacitor> || std::is_same_v<T, SaturableInductor> ||
                          std::is_same_v<T, Switch>) {
                fn(el.n1);
                fn(el.n2);
            } else if constexpr (std::is_same_v<T, VoltageSource>) {
                fn(el.n_pos);
            } else if constexpr (std::is_same_v<T, BergeronLine>) {
                fn(el.n_send);
                fn(el.n_recv);
            } else if constexpr (std::is_same_v<T, Transformer>) {
                fn(el.hv_pos);
                fn(el.hv_neg);
                fn(el.lv_pos);
                fn(el.lv_neg);
            }
        },
        e);
}

struct UnionFind {
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void join(int a, int b) { parent[find(a)] = find(b); }
    std::vector<int> parent;
};

} // namespace

Probe Probe::at_node(std::string name, NodeId node) {
    Probe p;
    p.name = std::move(name);
    p.kind = Kind::NodeVoltage;
    p.node = node;
    return p;
}

Probe Probe::at_branch(std::string name, ElementId element, BranchTap tap) {
    Probe p;
    p.name = std::move(name);
    p.kind = Kind::BranchCurrent;
    p.element = element;
    p.tap = tap;
    return p;
}

NodeId Circuit::new_node() { return node_count_++; }

void Circuit::register_node(NodeId n) {
    require(n >= 0, "node index must be >= 0");
    node_count_ = std::max(node_count_, n + 1);
}

ElementId Circuit::add(Element element) {
    check_element(element);
    for_each_terminal(element, [this](NodeId n) { register_node(n); });
    elements_.push_back(std::move(element));
    return static_cast<ElementId>(elements_.size() - 1);
}

void Circuit::add_probe(Probe probe) {
    for (const auto& existing : probes_) {
        require(existing.name != probe.name, "probe name not unique: " + probe.name);
    }
    if (probe.kind == Probe::Kind::BranchCurrent) {
        require(probe.element >= 0 && probe.element < static_cast<ElementId>(elements_.size()),
                "branch probe references unknown element: " + probe.name);
    }
    probes_.push_back(std::move(probe));
}

std::vector<ValidationIssue> Circuit::validate() const {
    std::vector<ValidationIssue> issues;

    if (elements_.empty()) {
        issues.push_back({ValidationIssue::Code::NoElements, "no elements"});
    }

    // Galvanic connectivity from ground. Open switches still define topology;
    // a transformer couples only within each winding (the windings are
    // galvanically isolated), and line/source terminals carry ground return.
    UnionFind uf(node_count_);
    for (const auto& e : elements_) {
        std::visit(
            [&](const auto& el) {
                using T = std::decay_t<decltype(el)>;
                if constexpr (std::is_same_v<T, Resistor> || std::is_same_v<T, Inductor> ||
                              std::is_same_v<T, Capacitor> ||
                              std::is_same_v<T, SaturableInductor> || std::is_same_v<T, Switch>) {
                    uf.join(el.n1, el.n2);
                } else if constexpr (std::is_same_v<T, VoltageSource>) {
                    uf.join(el.n_pos, kGround);
                } else if constexpr (std::is_same_v<T, BergeronLine>) {
                    uf.join(el.n_send, kGround);
                    uf.join(el.n_recv, kGround);
                } else if constexpr (std::is_same_v<T, Transformer>) {
                    uf.join(el.hv_pos, el.hv_neg);
                    uf.join(el.lv_pos, el.lv_neg);
                }
            },
            e);
    }

    std::vector<bool> referenced(node_count_, false);
    referenced[kGround] = true;
    for (const auto& e : elements_) {
        for_each_terminal(e, [&](NodeId n) { referenced[n] = true; });
    }

    for (NodeId n = 1; n < node_count_; ++n) {
        if (!referenced[n]) continue; // reported via dangling probes if probed
        if (uf.find(n) != uf.find(kGround)) {
            issues.push_back({ValidationIssue::Code::DisconnectedNode,
                              "node " + std::to_string(n) +
                                  " has no galvanic path to ground"});
        }
    }

    for (const auto& p : probes_) {
        if (p.kind == Probe::Kind::NodeVoltage) {
            if (p.node < 0 || p.node >= node_count_ || !referenced[p.node]) {
                issues.push_back({ValidationIssue::Code::DanglingProbe,
                                  "dangling probe '" + p.name + "' on node " +
                                      std::to_string(p.node)});
            }
        } else if (p.element < 0 || p.element >= static_cast<ElementId>(elements_.size())) {
            issues.push_back({ValidationIssue::Code::DanglingProbe,
                              "dangling probe '" + p.name + "'"});
        }
    }

    return issues;
}

} // namespace tbench
