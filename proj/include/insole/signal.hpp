#pragma once

#include "insole/types.hpp"

#include <optional>
#include <vector>

namespace insole {

// Normalized second-order section (a0 == 1):
//   y[n] = b0*x[n] + b1*x[n-1] + b2*x[n-2] - a1*y[n-1] - a2*y[n-2]
struct BiquadCoefficients {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

// Second-order Butterworth low-pass, discretized with the bilinear transform
// and frequency pre-warping, then scaled to unit DC gain.
// Throws std::invalid_argument unless 0 < cutoff_hz < sample_rate_hz / 2.
BiquadCoefficients design_lowpass(double sample_rate_hz, double cutoff_hz);

// Streaming direct-form II transposed biquad. prime() sets the state to the
// steady state of a constant input, so a flat signal passes through from the
// first sample.
class BiquadFilter {
 public:
  explicit BiquadFilter(const BiquadCoefficients& c) : c_(c) {}

  void prime(double x0) {
    s1_ = (1.0 - c_.b0) * x0;
    s2_ = (c_.b2 - c_.a2) * x0;
  }

  double step(double x) {
    const double y = c_.b0 * x + s1_;
    s1_ = c_.b1 * x - c_.a1 * y + s2_;
    s2_ = c_.b2 * x - c_.a2 * y;
    return y;
  }

 private:
  BiquadCoefficients c_;
  double s1_ = 0.0;
  double s2_ = 0.0;
};

// Whole-array form of BiquadFilter, state initialized to the steady state of
// x[0] so a constant input is reproduced from the first sample.
Eigen::ArrayXd filter_channel(const Eigen::ArrayXd& x, const BiquadCoefficients& c);

// Filters each channel independently. Output length equals input length.
RawTrace filter_trace(const RawTrace& trace, const BiquadCoefficients& c);

// Keeps every k-th sample, k = sample_rate_hz / target_rate_hz (must be an
// integer), rounding to the nearest ADC count and clamping to [0, 4095].
// Timestamps are assigned at exact 1000/target_rate_hz ms spacing.
std::vector<PressureFrame> decimate(const RawTrace& trace, double target_rate_hz);

// Pressure-weighted average of the three contact positions. Empty when the
// frame carries no load at all (caller decides how to bridge).
std::optional<Eigen::Vector2d> center_of_pressure(const PressureFrame& frame,
                                                  const ContactGeometry& geometry);

struct LabelerParams {
  // Fraction of the series maximum above which the rectified CoP derivative
  // marks a transition zone.
  double transition_threshold = 0.2;
  // Quiet runs shorter than this never become segments (100 frames = 1 s).
  int min_segment_frames = 100;
  // Longitudinal slack around the neutral point inside which a segment is
  // still called Neutral.
  double dead_zone_m = 0.01;
};

// Segments a 100 Hz frame sequence into body-position classes:
// longitudinal CoP -> first difference -> rectify -> normalize by the series
// maximum -> threshold into transition zones -> quiet runs become segments,
// labeled by their mean longitudinal CoP against the neutral point.
std::vector<LabeledSegment> auto_label(const std::vector<PressureFrame>& frames,
                                       const ContactGeometry& geometry,
                                       const LabelerParams& params);

// Longitudinal (anterior-posterior) CoP per frame; no-load frames hold the
// last valid value (the neutral point before any valid frame). Exposed for
// diagnostics and tests.
Eigen::ArrayXd longitudinal_cop(const std::vector<PressureFrame>& frames,
                                const ContactGeometry& geometry);

}  // namespace insole
