#include "tbench/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tbench {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

Real nice_step(Real range, int target_ticks) {
    const Real raw = range / static_cast<Real>(target_ticks);
    const Real mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (const Real m : {1.0, 2.0, 5.0, 10.0}) {
        if (m * mag >= raw) return m * mag;
    }
    return 10.0 * mag;
}

struct Panel {
    Real x, y, w, h;       // pixel rect
    Real t0, t1, v0, v1;   // data window

    [[nodiscard]] Real px(Real t) const { return x + (t - t0) / (t1 - t0) * w; }
    [[nodiscard]] Real py(Real v) const { return y + h - (v - v0) / (v1 - v0) * h; }
};

void render_traces(std::string& svg, const WaveformSet& waves,
                   const std::vector<std::size_t>& probe_idx, const Panel& panel) {
    const auto n = static_cast<long>(waves.sample_count());
    long i0 = static_cast<long>(std::ceil((panel.t0 - waves.t0()) / waves.dt()));
    long i1 = static_cast<long>(std::floor((panel.t1 - waves.t0()) / waves.dt()));
    i0 = std::clamp(i0, 0L, n - 1);
    i1 = std::clamp(i1, 0L, n - 1);
    const long count = i1 - i0 + 1;
    const long stride = std::max(1L, count / 4000);

    for (std::size_t k = 0; k < probe_idx.size(); ++k) {
        const auto samples = waves.samples(probe_idx[k]);
        std::string points;
        for (long i = i0; i <= i1; i += stride) {
            points += num(panel.px(waves.time_at(static_cast<std::size_t>(i))));
            points += ',';
            points += num(panel.py(samples[static_cast<std::size_t>(i)]));
            points += ' ';
        }
        if ((i1 - i0) % stride != 0) {
            points += num(panel.px(waves.time_at(static_cast<std::size_t>(i1))));
            points += ',';
            points += num(panel.py(samples[static_cast<std::size_t>(i1)]));
        }
        svg += "<polyline fill=\"none\" stroke=\"";
        svg += kPalette[k % std::size(kPalette)];
        svg += "\" stroke-width=\"1.2\" points=\"" + points + "\"/>\n";
    }
}

std::pair<Real, Real> value_range(const WaveformSet& waves,
                                  const std::vector<std::size_t>& probe_idx, Real t0, Real t1) {
    Real lo = 0.0, hi = 0.0;
    bool first = true;
    const auto n = static_cast<long>(waves.sample_count());
    long i0 = static_cast<long>(std::ceil((t0 - waves.t0()) / waves.dt()));
    long i1 = static_cast<long>(std::floor((t1 - waves.t0()) / waves.dt()));
    i0 = std::clamp(i0, 0L, n - 1);
    i1 = std::clamp(i1, 0L, n - 1);
    for (const std::size_t p : probe_idx) {
        const auto samples = waves.samples(p);
        for (long i = i0; i <= i1; ++i) {
            const Real v = samples[static_cast<std::size_t>(i)];
            if (first || v < lo) lo = first ? v : std::min(lo, v);
            if (first || v > hi) hi = first ? v : std::max(hi, v);
            first = false;
        }
    }
    if (first) {
        lo = -1.0;
        hi = 1.0;
    }
    if (lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    const Real pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

void render_axes(std::string& svg, const Panel& panel, bool labels) {
    svg += "<rect x=\"" + num(panel.x) + "\" y=\"" + num(panel.y) + "\" width=\"" +
           num(panel.w) + "\" height=\"" + num(panel.h) +
           "\" fill=\"white\" stroke=\"#333333\"/>\n";

    const Real tx = nice_step(panel.t1 - panel.t0, 6);
    for (Real t = std::ceil(panel.t0 / tx) * tx; t <= panel.t1 + 1e-12 * tx; t += tx) {
        const Real x = panel.px(t);
        svg += "<line x1=\"" + num(x) + "\" y1=\"" + num(panel.y) + "\" x2=\"" + num(x) +
               "\" y2=\"" + num(panel.y + panel.h) + "\" stroke=\"#dddddd\"/>\n";
        if (labels) {
            svg += "<text x=\"" + num(x) + "\" y=\"" + num(panel.y + panel.h + 16) +
                   "\" text-anchor=\"middle\">" + num(t) + "</text>\n";
        }
    }
    const Real vy = nice_step(panel.v1 - panel.v0, 5);
    for (Real v = std::ceil(panel.v0 / vy) * vy; v <= panel.v1 + 1e-12 * vy; v += vy) {
        const Real y = panel.py(v);
        svg += "<line x1=\"" + num(panel.x) + "\" y1=\"" + num(y) + "\" x2=\"" +
               num(panel.x + panel.w) + "\" y2=\"" + num(y) + "\" stroke=\"#dddddd\"/>\n";
        if (labels) {
            svg += "<text x=\"" + num(panel.x - 6) + "\" y=\"" + num(y + 4) +
                   "\" text-anchor=\"end\">" + num(v) + "</text>\n";
        }
    }
}

} // namespace

PlotResult render_svg(const WaveformSet& waves, const PlotRequest& request) {
    if (request.probes.empty()) throw std::invalid_argument("no probes selected");
    std::vector<std::size_t> probe_idx;
    for (const auto& name : request.probes) probe_idx.push_back(waves.probe_index(name));

    PlotResult result;
    const Real data_t0 = waves.t0();
    const Real data_t1 = waves.time_at(waves.sample_count() - 1);

    Real t0 = data_t0, t1 = data_t1;
    if (request.t_range) {
        t0 = request.t_range->first;
        t1 = request.t_range->second;
        if (t0 >= t1) throw std::invalid_argument("empty t_range");
        if (t0 < data_t0 || t1 > data_t1) {
            result.warnings.push_back("t_range clipped to data window");
            t0 = std::max(t0, data_t0);
            t1 = std::min(t1, data_t1);
        }
    }

    constexpr Real width = 960, height = 540;
    Panel main{70, 20, width - 95, height - 70, t0, t1, 0, 0};
    std::tie(main.v0, main.v1) = value_range(waves, probe_idx, t0, t1);

    std::string& svg = result.svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
           num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
    svg += "<style>text{font-family:monospace;font-size:12px;fill:#333333;}</style>\n";
    render_axes(svg, main, true);
    render_traces(svg, waves, probe_idx, main);
    svg += "<text x=\"" + num(main.x + main.w / 2) + "\" y=\"" + num(height - 8) +
           "\" text-anchor=\"middle\">time (s)</text>\n";

    // Legend, top-left corner of the plot area.
    for (std::size_t k = 0; k < request.probes.size(); ++k) {
        const Real y = main.y + 16 + 16 * static_cast<Real>(k);
        svg += "<line x1=\"" + num(main.x + 8) + "\" y1=\"" + num(y - 4) + "\" x2=\"" +
               num(main.x + 28) + "\" y2=\"" + num(y - 4) + "\" stroke=\"";
        svg += kPalette[k % std::size(kPalette)];
        svg += "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + num(main.x + 34) + "\" y=\"" + num(y) + "\">" +
               request.probes[k] + "</text>\n";
    }

    if (request.zoom) {
        Real z0 = request.zoom->first;
        Real z1 = request.zoom->second;
        if (z0 >= z1) throw std::invalid_argument("empty zoom range");
        if (z0 < data_t0 || z1 > data_t1) {
            result.warnings.push_back("zoom range clipped to data window");
            z0 = std::max(z0, data_t0);
            z1 = std::min(z1, data_t1);
        }
        Panel inset{main.x + main.w * 0.52, main.y + main.h * 0.06, main.w * 0.44,
                    main.h * 0.38, z0, z1, 0, 0};
        std::tie(inset.v0, inset.v1) = value_range(waves, probe_idx, z0, z1);
        render_axes(svg, inset, false);
        render_traces(svg, waves, probe_idx, inset);
        svg += "<text x=\"" + num(inset.x) + "\" y=\"" + num(inset.y - 4) + "\">zoom " +
               num(z0) + " - " + num(z1) + " s</text>\n";
    }

    svg += "</svg>\n";
    return result;
}

} // namespace tbench
