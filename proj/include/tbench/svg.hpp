#pragma once

#include "tbench/solver.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tbench {

struct PlotRequest {
    std::vector<std::string> probes;
    std::optional<std::pair<Real, Real>> t_range; // full-panel window, seconds
    std::optional<std::pair<Real, Real>> zoom;    // inset window, seconds
};

struct PlotResult {
    std::string svg;
    std::vector<std::string> warnings;
};

/// Render probe traces as a standalone SVG: axes, one polyline per probe,
/// legend and an optional zoom inset. Deterministic bytes for identical
/// inputs. Throws std::invalid_argument on an empty or unknown selection.
PlotResult render_svg(const WaveformSet& waves, const PlotRequest& request);

} // namespace tbench
