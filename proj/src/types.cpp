#include "insole/types.hpp"

#include <stdexcept>
#include <string>

namespace insole {

std::string_view label_name(ClassLabel label) {
  switch (label) {
    case ClassLabel::Dorsal: return "dorsal";
    case ClassLabel::Neutral: return "neutral";
    case ClassLabel::Ventral: return "ventral";
  }
  return "?";
}

std::optional<ClassLabel> label_from_name(std::string_view name) {
  if (name == "dorsal" || name == "Dorsal" || name == "D") return ClassLabel::Dorsal;
  if (name == "neutral" || name == "Neutral" || name == "N") return ClassLabel::Neutral;
  if (name == "ventral" || name == "Ventral" || name == "V") return ClassLabel::Ventral;
  return std::nullopt;
}

void validate_trace(const RawTrace& trace) {
  if (trace.sample_rate_hz <= 0.0)
    throw std::invalid_argument("trace: sample rate must be positive");
  const Eigen::Index n = trace.channels[0].size();
  for (int c = 1; c < kNumChannels; ++c) {
    if (trace.channels[c].size() != n)
      throw std::invalid_argument("trace: channel lengths differ");
  }
  for (int c = 0; c < kNumChannels; ++c) {
    const auto& ch = trace.channels[c];
    if (ch.size() > 0 && (!(ch >= 0.0).all() || !(ch <= double(kAdcMax)).all()))
      throw std::invalid_argument("trace: channel " + std::to_string(c) +
                                  " has values outside [0, 4095]");
  }
}

}  // namespace insole
