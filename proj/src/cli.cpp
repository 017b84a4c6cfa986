#include "tbench/cli.hpp"

#include "tbench/analysis.hpp"
#include "tbench/csv.hpp"
#include "tbench/scenarios.hpp"
#include "tbench/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace tbench {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string fmt(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot read file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::pair<Real, Real> parse_range(const std::string& text, const std::string& what) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError(what, "expected a:b");
    try {
        return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ConfigError(what, "expected numeric a:b");
    }
}

std::vector<std::pair<std::string, std::string>> split_overrides(
    const std::vector<std::string>& raw) {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& item : raw) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("override", "expected key=value, got '" + item + "'");
        }
        kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return kv;
}

struct SimulateJob {
    std::string label;         // batch entry name, empty for single runs
    std::string scenario_path; // provenance for the manifest
    std::string text;          // scenario document after overrides
    fs::path out_dir;
};

void execute_job(const SimulateJob& job) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig config = parse_scenario(job.text);
    const BuiltScenario built = build_scenario(config);
    const WaveformSet waves = run_scenario(built);
    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();

    fs::create_directories(job.out_dir);
    const fs::path csv_path = job.out_dir / "waveforms.csv";
    write_waveforms_csv(csv_path.string(), waves);

    json manifest;
    manifest["scenario"] = job.scenario_path;
    manifest["digest"] = scenario_digest(built.resolved);
    manifest["dt_s"] = built.dt_s;
    manifest["t_end_s"] = built.t_end_s;
    manifest["t_close_s"] = built.pole_close_s;
    manifest["probes"] = built.resolved.probes;
    manifest["outputs"]["waveforms_csv"] = csv_path.string();
    manifest["wall_ms"] = wall_ms;
    std::ofstream mout(job.out_dir / "manifest.json", std::ios::binary);
    mout << manifest.dump(2) << "\n";

    std::cout << (job.label.empty() ? std::string("run") : job.label) << ": wrote "
              << csv_path.string() << " (" << waves.sample_count() << " samples, "
              << waves.probe_names().size() << " probes, " << wall_ms << " ms)\n";
}

int batch_parallelism(std::size_t jobs) {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("TRANSIENT_BENCH_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = static_cast<unsigned>(std::min<long>(cap, n));
    }
    return static_cast<int>(std::min<std::size_t>(n, jobs));
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 const std::vector<std::string>& raw_overrides,
                 const std::optional<Real>& dt, const std::optional<Real>& t_end) {
    auto overrides = split_overrides(raw_overrides);
    if (dt) overrides.emplace_back("sim.dt_s", fmt(*dt));
    if (t_end) overrides.emplace_back("sim.t_end_s", fmt(*t_end));

    const std::string text = read_text_file(scenario_path);
    json doc = json::parse(text, nullptr, false);

    std::vector<SimulateJob> jobs;
    if (doc.is_object() && doc.contains("batch")) {
        const json& batch = doc["batch"];
        if (!batch.is_array() || batch.empty()) {
            throw ConfigError("batch", "expected a non-empty array");
        }
        const fs::path base_dir = fs::path(scenario_path).parent_path();
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const json& entry = batch[i];
            const std::string where = "batch[" + std::to_string(i) + "]";
            if (!entry.is_object() || !entry.contains("name")) {
                throw ConfigError(where, "expected an object with a name");
            }
            SimulateJob job;
            job.label = entry["name"].get<std::string>();
            if (entry.contains("path")) {
                const fs::path p = base_dir / entry["path"].get<std::string>();
                job.scenario_path = p.string();
                job.text = read_text_file(p.string());
            } else if (entry.contains("scenario")) {
                job.scenario_path = scenario_path + "#" + job.label;
                job.text = entry["scenario"].dump();
            } else {
                throw ConfigError(where, "expected a path or an inline scenario");
            }
            auto entry_overrides = overrides;
            if (entry.contains("overrides")) {
                for (const auto& [k, v] : entry["overrides"].items()) {
                    entry_overrides.emplace_back(k, v.dump());
                }
            }
            job.text = apply_overrides(job.text, entry_overrides);
            job.out_dir = fs::path(out_dir) / job.label;
            jobs.push_back(std::move(job));
        }
    } else {
        SimulateJob job;
        job.scenario_path = scenario_path;
        job.text = overrides.empty() ? text : apply_overrides(text, overrides);
        job.out_dir = out_dir;
        jobs.push_back(std::move(job));
    }

    if (jobs.size() == 1) {
        execute_job(jobs.front());
        return kExitOk;
    }

    // Independent runs; a small worker pool capped by TRANSIENT_BENCH_THREADS.
    std::atomic<std::size_t> next{0};
    std::atomic<int> worst{kExitOk};
    std::vector<std::string> errors(jobs.size());
    const int workers = batch_parallelism(jobs.size());
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
                try {
                    execute_job(jobs[i]);
                } catch (const NumericFault& e) {
                    errors[i] = e.what();
                    worst.store(kExitNumeric);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                    int expected = kExitOk;
                    worst.compare_exchange_strong(expected, kExitConfig);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << jobs[i].label << ": error: " << errors[i] << "\n";
        }
    }
    return worst.load();
}

int cmd_analyze(const std::string& csv_path, const std::string& probe, Real base_kv,
                const std::optional<std::string>& window) {
    const WaveformSet waves = read_waveforms_csv(csv_path);
    if (!waves.has_probe(probe)) {
        std::cerr << "unknown probe: " << probe << " (available:";
        for (const auto& n : waves.probe_names()) std::cerr << " " << n;
        std::cerr << ")\n";
        return kExitConfig;
    }
    if (base_kv <= 0.0) throw ConfigError("base-kv", "must be > 0");

    Real t0 = waves.t0();
    Real t1 = waves.time_at(waves.sample_count() - 1);
    if (window) {
        const auto [a, b] = parse_range(*window, "window");
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
        if (t0 >= t1) throw ConfigError("window", "empty window after clipping");
    }

    const auto all = waves.samples(probe);
    const auto i0 = static_cast<std::size_t>(std::ceil((t0 - waves.t0()) / waves.dt() - 1e-9));
    const auto i1 = static_cast<std::size_t>(std::floor((t1 - waves.t0()) / waves.dt() + 1e-9));
    const auto slice = all.subspan(i0, i1 - i0 + 1);
    const Real slice_t0 = waves.time_at(i0);

    const OvervoltageReport peak =
        peak_overvoltage(slice, waves.dt(), slice_t0, base_kv * 1e3);
    const auto spectrum = dominant_frequency(all, waves.dt(), waves.t0(), t0, t1);

    std::cout << "probe " << probe << ", window [" << fmt(t0) << ", " << fmt(t1) << "] s\n";
    std::cout << "peak |v| = " << fmt(peak.peak_abs) << " V = " << fmt(peak.per_unit)
              << " p.u. of " << fmt(peak.base_peak) << " Vp (at t = "
              << fmt(peak.time_of_peak_s) << " s)\n";
    if (spectrum) {
        std::cout << "dominant frequency " << fmt(spectrum->frequency_hz) << " Hz (amplitude "
                  << fmt(spectrum->amplitude) << ", bin " << fmt(spectrum->bin_width_hz)
                  << " Hz)\n";
    } else {
        std::cout << "no peak above the frequency floor\n";
    }

    std::cout << "[report]\n";
    std::cout << "probe=" << probe << "\n";
    std::cout << "window_start_s=" << fmt(t0) << "\n";
    std::cout << "window_end_s=" << fmt(t1) << "\n";
    std::cout << "peak_abs_v=" << fmt(peak.peak_abs) << "\n";
    std::cout << "base_peak_v=" << fmt(peak.base_peak) << "\n";
    std::cout << "per_unit=" << fmt(peak.per_unit) << "\n";
    std::cout << "time_of_peak_s=" << fmt(peak.time_of_peak_s) << "\n";
    std::cout << "has_peak=" << (spectrum ? 1 : 0) << "\n";
    if (spectrum) {
        std::cout << "dominant_freq_hz=" << fmt(spectrum->frequency_hz) << "\n";
        std::cout << "dominant_amp=" << fmt(spectrum->amplitude) << "\n";
        std::cout << "bin_width_hz=" << fmt(spectrum->bin_width_hz) << "\n";
    }
    return kExitOk;
}

int cmd_plot(const std::string& csv_path, const std::string& probes_csv,
             const std::optional<std::string>& t_range, const std::optional<std::string>& zoom,
             const std::string& out_svg) {
    const WaveformSet waves = read_waveforms_csv(csv_path);

    PlotRequest request;
    std::stringstream ss(probes_csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (!name.empty()) request.probes.push_back(name);
    }
    if (request.probes.empty()) {
        std::cerr << "empty probe selection\n";
        return kExitConfig;
    }
    if (t_range) request.t_range = parse_range(*t_range, "t-range");
    if (zoom) request.zoom = parse_range(*zoom, "zoom");

    const PlotResult plot = render_svg(waves, request);
    for (const auto& w : plot.warnings) std::cerr << "warning: " << w << "\n";

    std::ofstream out(out_svg, std::ios::binary);
    if (!out) throw ConfigError("", "cannot write " + out_svg);
    out << plot.svg;
    std::cout << "wrote " << out_svg << "\n";
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"transient-bench: switching-transient studies of transformer-cable "
                 "and transformer-line energizations"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "run a scenario and export waveforms");
    std::string scenario_path, out_dir = ".";
    std::vector<std::string> overrides;
    std::optional<Real> dt_override, t_end_override;
    sim->add_option("scenario", scenario_path, "scenario file (JSON)")->required();
    sim->add_option("-o,--out", out_dir, "output directory");
    sim->add_option("--override", overrides, "dotted-path config override key=value");
    sim->add_option("--dt", dt_override, "timestep override, seconds");
    sim->add_option("--t-end", t_end_override, "simulated time override, seconds");

    // analyze
    auto* ana = app.add_subcommand("analyze", "peak / per-unit / dominant-frequency report");
    std::string csv_path, probe;
    Real base_kv = 0.0;
    std::optional<std::string> window;
    ana->add_option("csv", csv_path, "waveforms.csv from simulate")->required();
    ana->add_option("--probe", probe, "probe name")->required();
    ana->add_option("--base-kv", base_kv, "rated line-line rms voltage, kV")->required();
    ana->add_option("--window", window, "analysis window a:b, seconds");

    // plot
    auto* plt = app.add_subcommand("plot", "render probes as a standalone SVG");
    std::string plot_csv, probes_csv, out_svg = "plot.svg";
    std::optional<std::string> zoom, t_range;
    plt->add_option("csv", plot_csv, "waveforms.csv from simulate")->required();
    plt->add_option("--probes", probes_csv, "comma-separated probe names")->required();
    plt->add_option("--zoom", zoom, "zoom inset window a:b, seconds");
    plt->add_option("--t-range", t_range, "full-panel window a:b, seconds");
    plt->add_option("-o,--out", out_svg, "output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sim->parsed()) {
            return cmd_simulate(scenario_path, out_dir, overrides, dt_override, t_end_override);
        }
        if (ana->parsed()) return cmd_analyze(csv_path, probe, base_kv, window);
        if (plt->parsed()) return cmd_plot(plot_csv, probes_csv, t_range, zoom, out_svg);
    } catch (const NumericFault& e) {
        std::cerr << "numeric fault: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("transient-bench");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(storage.size());
    for (const auto& s : storage) argv.push_back(s.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

} // namespace tbench
