#pragma once

#include "tbench/transformer.hpp"

#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace tbench {

using NodeId = int;
using ElementId = int;

inline constexpr NodeId kGround = 0;
inline constexpr double kNeverCloses = std::numeric_limits<double>::infinity();

struct Resistor {
    NodeId n1, n2;
    Real r_ohm;
};

struct Inductor {
    NodeId n1, n2;
    Real l_h;
    Real i0_a = 0.0;
};

struct Capacitor {
    NodeId n1, n2;
    Real c_f;
    Real v0_v = 0.0;
};

/// Two-slope flux-current curve, symmetric about zero flux:
/// slope l_unsat below |flux_knee|, l_sat above.
struct SaturableInductor {
    NodeId n1, n2;
    Real l_unsat_h;
    Real l_sat_h;
    Real flux_knee_wb;
    Real flux0_wb = 0.0;
};

/// Sinusoidal EMF to ground behind an optional Thevenin R-L chain,
/// e(t) = amplitude * cos(2*pi*freq*t + phase). freq = 0 gives a DC source.
struct VoltageSource {
    NodeId n_pos;
    Real amplitude_v;
    Real freq_hz = 0.0;
    Real phase_rad = 0.0;
    Real r_thev_ohm = 0.0;
    Real l_thev_h = 0.0;
};

/// Ideal switch realized as a conductance swap at the first step >= t_close.
struct Switch {
    NodeId n1, n2;
    Real t_close_s = kNeverCloses;
};

/// Distributed-parameter line with ground return at both terminals.
/// Losses are lumped (r/4 at the ends, r/2 in the middle) in the solver.
struct BergeronLine {
    NodeId n_send, n_recv;
    Real z_c_ohm;
    Real tau_s;
    Real r_total_ohm = 0.0;
};

/// Two-winding per-phase transformer; the model is produced by build_model().
struct Transformer {
    NodeId hv_pos, hv_neg;
    NodeId lv_pos, lv_neg;
    TransformerModel model;
};

using Element = std::variant<Resistor, Inductor, Capacitor, SaturableInductor,
                             VoltageSource, Switch, BergeronLine, Transformer>;

/// A probed element current. Main is the natural branch of simple elements;
/// composite elements expose their internal branches by role.
enum class BranchTap {
    Main,
    HvPort,      // Transformer: current into the HV + terminal
    Series,      // Transformer: leakage branch current toward lv_pos
    Magnetizing, // Transformer: magnetizing branch current
    Send,        // BergeronLine: sending-end current into the line
    Recv,        // BergeronLine: receiving-end current into the line
};

struct Probe {
    enum class Kind { NodeVoltage, BranchCurrent };

    std::string name;
    Kind kind = Kind::NodeVoltage;
    NodeId node = kGround;
    ElementId element = -1;
    BranchTap tap = BranchTap::Main;

    static Probe at_node(std::string name, NodeId node);
    static Probe at_branch(std::string name, ElementId element, BranchTap tap = BranchTap::Main);
};

struct ValidationIssue {
    enum class Code { NoElements, DisconnectedNode, DanglingProbe };
    Code code;
    std::string detail;
};

/// Netlist of nodes, elements and probes. Node 0 is always ground. Completed
/// circuits are immutable value objects; construction is single-threaded.
class Circuit {
public:
    /// Allocate the next unused node id.
    NodeId new_node();

    /// Append an element; node references extend the node count as needed.
    /// Throws std::invalid_argument on parameter-invariant violations.
    ElementId add(Element element);

    /// Register a probe. Names must be unique; branch probes must reference
    /// an existing element (checked here), node probes are checked by
    /// validate() so that dangling references surface as issues.
    void add_probe(Probe probe);

    /// Structural checks; an empty report means the circuit is solvable.
    [[nodiscard]] std::vector<ValidationIssue> validate() const;

    [[nodiscard]] int node_count() const { return node_count_; }
    [[nodiscard]] const std::vector<Element>& elements() const { return elements_; }
    [[nodiscard]] const std::vector<Probe>& probes() const { return probes_; }

    int phase_count = 1;

private:
    void register_node(NodeId n);

    int node_count_ = 1; // ground always present
    std::vector<Element> elements_;
    std::vector<Probe> probes_;
};

} // namespace tbench
