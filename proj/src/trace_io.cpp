#include "insole/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace insole {

void write_trace_csv(const std::filesystem::path& path, const RawTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "t,hallux,pinky,heel\n";
  char buf[128];
  const double dt = 1.0 / trace.sample_rate_hz;
  for (Eigen::Index i = 0; i < trace.samples(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9f,%.17g,%.17g,%.17g", double(i) * dt,
                  trace.channels[0][i], trace.channels[1][i], trace.channels[2][i]);
    out << buf << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RawTrace read_trace_csv(const std::filesystem::path& path, double sample_rate_hz) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,", 0) != 0)
    throw std::runtime_error("trace csv " + path.string() + ": missing 't,...' header");

  std::vector<double> t;
  std::array<std::vector<double>, kNumChannels> cols;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    double values[4];
    for (int i = 0; i < 4; ++i) {
      if (!std::getline(row, cell, ','))
        throw std::runtime_error("trace csv: short row '" + line + "'");
      values[i] = std::stod(cell);
    }
    t.push_back(values[0]);
    for (int c = 0; c < kNumChannels; ++c) cols[c].push_back(values[c + 1]);
  }
  if (t.size() < 2) throw std::runtime_error("trace csv " + path.string() + ": too short");

  RawTrace trace;
  if (sample_rate_hz > 0) {
    trace.sample_rate_hz = sample_rate_hz;
  } else {
    const double dt = t[1] - t[0];
    if (dt <= 0) throw std::runtime_error("trace csv: non-increasing timestamps");
    trace.sample_rate_hz = std::round(1.0 / dt);
  }
  for (int c = 0; c < kNumChannels; ++c)
    trace.channels[c] = Eigen::Map<Eigen::ArrayXd>(cols[c].data(),
                                                   static_cast<Eigen::Index>(cols[c].size()));
  validate_trace(trace);
  return trace;
}

void write_segments_csv(const std::filesystem::path& path,
                        const std::vector<LabeledSegment>& segments) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "start,end,label\n";
  for (const auto& s : segments)
    out << s.start << ',' << s.end << ',' << label_name(s.label) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<LabeledSegment> read_segments_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("segments csv " + path.string() + ": empty");
  std::vector<LabeledSegment> segments;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string start, end, label;
    if (!std::getline(row, start, ',') || !std::getline(row, end, ',') ||
        !std::getline(row, label, ','))
      throw std::runtime_error("segments csv: short row '" + line + "'");
    const auto lab = label_from_name(label);
    if (!lab) throw std::runtime_error("segments csv: bad label '" + label + "'");
    segments.push_back({std::stoi(start), std::stoi(end), *lab});
  }
  return segments;
}

LabelerParams labeler_params_from_config(const KeyValueConfig& cfg) {
  LabelerParams p;
  p.transition_threshold = cfg.get_double("transition_threshold", p.transition_threshold);
  p.min_segment_frames = cfg.get_int("min_segment_frames", p.min_segment_frames);
  p.dead_zone_m = cfg.get_double("dead_zone_m", p.dead_zone_m);
  return p;
}

ContactGeometry geometry_from_config(const KeyValueConfig& cfg) {
  ContactGeometry g;
  g.hallux.x() = cfg.get_double("hallux_x", g.hallux.x());
  g.hallux.y() = cfg.get_double("hallux_y", g.hallux.y());
  g.pinky.x() = cfg.get_double("pinky_x", g.pinky.x());
  g.pinky.y() = cfg.get_double("pinky_y", g.pinky.y());
  g.heel.x() = cfg.get_double("heel_x", g.heel.x());
  g.heel.y() = cfg.get_double("heel_y", g.heel.y());
  return g;
}

}  // namespace insole
