#pragma once

#include "tbench/solver.hpp"

#include <iosfwd>
#include <string>

namespace tbench {

/// Wide CSV: header `time_s,<probe names...>`, one row per sample, fixed
/// 15-significant-digit scientific notation, LF line endings. Byte-identical
/// for identical waveform sets.
void write_waveforms_csv(std::ostream& out, const WaveformSet& waves);
void write_waveforms_csv(const std::string& path, const WaveformSet& waves);

/// Read a waveform CSV produced by write_waveforms_csv.
WaveformSet read_waveforms_csv(const std::string& path);

} // namespace tbench
