#pragma once

#include "insole/config.hpp"
#include "insole/signal.hpp"
#include "insole/types.hpp"

#include <filesystem>
#include <vector>

namespace insole {

// Raw trace CSV: header "t,hallux,pinky,heel", one row per acquisition-rate
// sample, t in seconds. The sample rate is inferred from the first two rows
// unless passed explicitly.
void write_trace_csv(const std::filesystem::path& path, const RawTrace& trace);
RawTrace read_trace_csv(const std::filesystem::path& path, double sample_rate_hz = 0.0);

// Segment CSV: header "start,end,label", end exclusive.
void write_segments_csv(const std::filesystem::path& path,
                        const std::vector<LabeledSegment>& segments);
std::vector<LabeledSegment> read_segments_csv(const std::filesystem::path& path);

LabelerParams labeler_params_from_config(const KeyValueConfig& cfg);
ContactGeometry geometry_from_config(const KeyValueConfig& cfg);

}  // namespace insole
