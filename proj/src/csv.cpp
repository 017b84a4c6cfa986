#include "tbench/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace tbench {

namespace {

void append_number(std::string& row, Real value) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.14e", value);
    row.append(buf, static_cast<std::size_t>(n));
}

Real parse_number(std::string_view field, std::size_t line_no) {
    Real value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw std::runtime_error("csv: bad number on line " + std::to_string(line_no));
    }
    return value;
}

} // namespace

void write_waveforms_csv(std::ostream& out, const WaveformSet& waves) {
    std::string row = "time_s";
    for (const auto& name : waves.probe_names()) {
        row += ',';
        row += name;
    }
    row += '\n';
    out << row;

    const std::size_t n_probes = waves.probe_names().size();
    for (std::size_t i = 0; i < waves.sample_count(); ++i) {
        row.clear();
        append_number(row, waves.time_at(i));
        for (std::size_t p = 0; p < n_probes; ++p) {
            row += ',';
            append_number(row, waves.samples(p)[i]);
        }
        row += '\n';
        out << row;
    }
}

void write_waveforms_csv(const std::string& path, const WaveformSet& waves) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_waveforms_csv(out, waves);
    if (!out) throw std::runtime_error("write failed: " + path);
}

WaveformSet read_waveforms_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> names;
    {
        std::stringstream header(line);
        std::string field;
        while (std::getline(header, field, ',')) names.push_back(field);
    }
    if (names.empty() || names.front() != "time_s") {
        throw std::runtime_error("csv: expected header starting with time_s in " + path);
    }
    names.erase(names.begin());

    std::vector<Real> times;
    std::vector<std::vector<Real>> samples(names.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t begin = 0;
        std::size_t column = 0;
        while (begin <= line.size()) {
            std::size_t comma = line.find(',', begin);
            if (comma == std::string::npos) comma = line.size();
            const std::string_view field(line.data() + begin, comma - begin);
            if (column == 0) {
                times.push_back(parse_number(field, line_no));
            } else {
                if (column - 1 >= samples.size()) {
                    throw std::runtime_error("csv: too many columns on line " +
                                             std::to_string(line_no));
                }
                samples[column - 1].push_back(parse_number(field, line_no));
            }
            ++column;
            begin = comma + 1;
            if (comma == line.size()) break;
        }
        if (column != samples.size() + 1) {
            throw std::runtime_error("csv: wrong column count on line " + std::to_string(line_no));
        }
    }
    if (times.size() < 2) throw std::runtime_error("csv: need at least two samples in " + path);

    const Real dt = times[1] - times[0];
    if (dt <= 0.0) throw std::runtime_error("csv: non-increasing time column in " + path);
    return WaveformSet(dt, times.front(), std::move(names), std::move(samples));
}

} // namespace tbench
