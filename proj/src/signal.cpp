#include "insole/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace insole {

BiquadCoefficients design_lowpass(double sample_rate_hz, double cutoff_hz) {
  if (sample_rate_hz <= 0.0)
    throw std::invalid_argument("design_lowpass: sample rate must be positive");
  if (cutoff_hz <= 0.0 || cutoff_hz >= sample_rate_hz / 2.0)
    throw std::invalid_argument("design_lowpass: cutoff must lie in (0, fs/2)");

  // Analog prototype s^2 + sqrt(2) s + 1 mapped through s = (1/K)(z-1)/(z+1)
  // with K = tan(pi fc / fs) absorbing the pre-warp.
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
  const double k2 = k * k;
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);

  BiquadCoefficients c;
  c.b0 = k2 * norm;
  c.b1 = 2.0 * c.b0;
  c.b2 = c.b0;
  c.a1 = 2.0 * (k2 - 1.0) * norm;
  c.a2 = (1.0 - std::numbers::sqrt2 * k + k2) * norm;

  // The algebra above already gives unit DC gain; this removes the last few
  // ulps of rounding so (b0+b1+b2)/(1+a1+a2) evaluates to 1.
  const double g = c.dc_gain();
  c.b0 /= g;
  c.b1 /= g;
  c.b2 /= g;
  return c;
}

Eigen::ArrayXd filter_channel(const Eigen::ArrayXd& x, const BiquadCoefficients& c) {
  const Eigen::Index n = x.size();
  Eigen::ArrayXd y(n);
  if (n == 0) return y;

  BiquadFilter filt(c);
  filt.prime(x[0]);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = filt.step(x[i]);
  return y;
}

RawTrace filter_trace(const RawTrace& trace, const BiquadCoefficients& c) {
  if (trace.samples() == 0)
    throw std::invalid_argument("filter_trace: empty trace");
  RawTrace out;
  out.sample_rate_hz = trace.sample_rate_hz;
  for (int ch = 0; ch < kNumChannels; ++ch)
    out.channels[ch] = filter_channel(trace.channels[ch], c);
  return out;
}

std::vector<PressureFrame> decimate(const RawTrace& trace, double target_rate_hz) {
  if (target_rate_hz <= 0.0)
    throw std::invalid_argument("decimate: target rate must be positive");
  const double factor = trace.sample_rate_hz / target_rate_hz;
  const double rounded = std::round(factor);
  if (rounded < 1.0 || std::abs(factor - rounded) > 1e-9 * factor)
    throw std::invalid_argument("decimate: sample rate not an integer multiple of target rate");
  const auto k = static_cast<Eigen::Index>(rounded);

  const double period_ms = 1000.0 / target_rate_hz;
  const Eigen::Index n = trace.samples();
  std::vector<PressureFrame> frames;
  frames.reserve(static_cast<std::size_t>(n / k) + 1);

  auto quantize = [](double v) {
    const double r = std::round(v);
    return static_cast<std::uint16_t>(std::clamp(r, 0.0, double(kAdcMax)));
  };

  for (Eigen::Index i = 0, j = 0; j < n; ++i, j += k) {
    PressureFrame f;
    f.timestamp_ms = static_cast<std::uint32_t>(std::llround(double(i) * period_ms));
    f.hallux = quantize(trace.channels[0][j]);
    f.pinky = quantize(trace.channels[1][j]);
    f.heel = quantize(trace.channels[2][j]);
    frames.push_back(f);
  }
  return frames;
}

std::optional<Eigen::Vector2d> center_of_pressure(const PressureFrame& frame,
                                                  const ContactGeometry& geometry) {
  const double total = double(frame.hallux) + double(frame.pinky) + double(frame.heel);
  if (total <= 0.0) return std::nullopt;
  Eigen::Vector2d cop = (double(frame.hallux) * geometry.hallux +
                         double(frame.pinky) * geometry.pinky +
                         double(frame.heel) * geometry.heel) /
                        total;
  return cop;
}

Eigen::ArrayXd longitudinal_cop(const std::vector<PressureFrame>& frames,
                                const ContactGeometry& geometry) {
  const auto n = static_cast<Eigen::Index>(frames.size());
  Eigen::ArrayXd y(n);
  double last = geometry.neutral_point().y();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (auto cop = center_of_pressure(frames[static_cast<std::size_t>(i)], geometry))
      last = cop->y();
    y[i] = last;
  }
  return y;
}

std::vector<LabeledSegment> auto_label(const std::vector<PressureFrame>& frames,
                                       const ContactGeometry& geometry,
                                       const LabelerParams& params) {
  const int n = static_cast<int>(frames.size());
  std::vector<LabeledSegment> segments;
  if (n < 2 || n < params.min_segment_frames) return segments;

  const Eigen::ArrayXd cop_y = longitudinal_cop(frames, geometry);

  // Rectified first difference, normalized by its maximum. A flat trace has
  // no transitions at all.
  Eigen::ArrayXd deriv = (cop_y.tail(n - 1) - cop_y.head(n - 1)).abs();
  const double peak = deriv.maxCoeff();
  if (peak > 0.0) deriv /= peak;

  // A frame is in a transition zone if any adjacent difference exceeds the
  // threshold; deriv[i] couples frames i and i+1.
  auto in_transition = [&](int f) {
    if (f > 0 && deriv[f - 1] > params.transition_threshold) return true;
    if (f < n - 1 && deriv[f] > params.transition_threshold) return true;
    return false;
  };

  const double neutral_y = geometry.neutral_point().y();
  int run_start = -1;
  for (int f = 0; f <= n; ++f) {
    const bool quiet = f < n && !in_transition(f);
    if (quiet && run_start < 0) run_start = f;
    if (!quiet && run_start >= 0) {
      const int run_end = f;
      if (run_end - run_start >= params.min_segment_frames) {
        const double mean_y =
            cop_y.segment(run_start, run_end - run_start).mean();
        const double offset = mean_y - neutral_y;
        ClassLabel label = ClassLabel::Neutral;
        if (offset > params.dead_zone_m) label = ClassLabel::Ventral;
        else if (offset < -params.dead_zone_m) label = ClassLabel::Dorsal;
        segments.push_back({run_start, run_end, label});
      }
      run_start = -1;
    }
  }
  return segments;
}

}  // namespace insole
