#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace insole {

// Body-position classes, in fixed index order. Index order matters: tie
// breaks, confusion-matrix rows and the model file all use these indices.
enum class ClassLabel : std::uint8_t { Dorsal = 0, Neutral = 1, Ventral = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr int kNumChannels = 3;  // hallux, pinky, heel
inline constexpr int kAdcMax = 4095;    // 12-bit ADC
inline constexpr int kBlockLen = 50;    // samples per channel per classification block
inline constexpr int kFeatureDim = kNumChannels * kBlockLen;

std::string_view label_name(ClassLabel label);
std::optional<ClassLabel> label_from_name(std::string_view name);

// One 100 Hz sample of the three pressure channels.
struct PressureFrame {
  std::uint32_t timestamp_ms = 0;
  std::uint16_t hallux = 0;
  std::uint16_t pinky = 0;
  std::uint16_t heel = 0;

  std::uint16_t channel(int i) const {
    return i == 0 ? hallux : (i == 1 ? pinky : heel);
  }
};

// Acquisition-rate signal, one array per channel (hallux, pinky, heel).
struct RawTrace {
  double sample_rate_hz = 0.0;
  std::array<Eigen::ArrayXd, kNumChannels> channels;

  Eigen::Index samples() const { return channels[0].size(); }
  double duration_s() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples()) / sample_rate_hz : 0.0;
  }
};

// Throws std::invalid_argument on unequal channel lengths, a non-positive
// sample rate, or values outside the 12-bit ADC range.
void validate_trace(const RawTrace& trace);

// Planar positions of the three contact points, in meters. The second
// coordinate is the longitudinal (anterior-posterior) axis: positive toward
// the toes (ventral), negative toward the heel (dorsal).
struct ContactGeometry {
  Eigen::Vector2d hallux{0.00, 0.22};
  Eigen::Vector2d pinky{-0.05, 0.18};
  Eigen::Vector2d heel{0.00, 0.00};

  const Eigen::Vector2d& position(int channel) const {
    return channel == 0 ? hallux : (channel == 1 ? pinky : heel);
  }
  // The neutral stance point is defined as the centroid of the contacts.
  Eigen::Vector2d neutral_point() const { return (hallux + pinky + heel) / 3.0; }
};

// Contiguous run of frames carrying one body-position class. `end` exclusive.
struct LabeledSegment {
  int start = 0;
  int end = 0;
  ClassLabel label = ClassLabel::Neutral;

  int length() const { return end - start; }
  bool operator==(const LabeledSegment&) const = default;
};

// 150-feature training vector: 50 hallux samples, then 50 pinky, then 50 heel.
struct SuperSample {
  Eigen::VectorXf features;
  ClassLabel label = ClassLabel::Neutral;
};

}  // namespace insole
