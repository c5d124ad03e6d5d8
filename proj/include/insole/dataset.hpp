#pragma once

#include "insole/config.hpp"
#include "insole/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace insole {

// Mean ADC counts (hallux, pinky, heel) per body-position class.
struct ClassPressures {
  Eigen::Vector3d dorsal{600, 550, 2400};     // weight on the heel
  Eigen::Vector3d neutral{1200, 1100, 1400};  // balanced stance
  Eigen::Vector3d ventral{1800, 1600, 700};   // weight on the forefoot

  const Eigen::Vector3d& mean_for(ClassLabel label) const {
    switch (label) {
      case ClassLabel::Dorsal: return dorsal;
      case ClassLabel::Ventral: return ventral;
      default: return neutral;
    }
  }
};

struct SynthParams {
  double session_s = 80.0;
  double hold_s = 10.0;
  double transition_s = 0.5;
  double noise_sd = 40.0;             // ADC counts, per acquisition sample
  double sample_rate_hz = 400000.0;   // simulated DAQ acquisition rate
  ClassPressures class_pressures;
  std::uint64_t seed = 0;
};

SynthParams synth_params_from_config(const KeyValueConfig& cfg);

struct SynthSession {
  RawTrace trace;                       // acquisition-rate, noisy
  std::vector<LabeledSegment> truth;    // ground truth in 100 Hz frame indices
};

// Generates one session: each hold draws the three channels from the class
// means plus Gaussian noise, with sigmoid cross-fades of width transition_s
// across hold boundaries. Adjacent holds of equal class merge into one
// ground-truth segment. schedule.size() * hold_s must equal session_s.
SynthSession synth_session(const SynthParams& params,
                           const std::vector<ClassLabel>& schedule);

// Random hold schedule with no two consecutive classes equal, mimicking the
// stay-or-shift-every-10-s lab protocol.
std::vector<ClassLabel> protocol_schedule(int holds, std::uint64_t seed);

// Streaming fusion of synth_session -> low-pass filter -> decimate for long
// sessions at high acquisition rates: the acquisition-rate signal is
// generated sample by sample and never materialized, so memory stays flat
// while results are bit-identical to the three-step pipeline.
std::vector<PressureFrame> synth_frames(const SynthParams& params,
                                        const std::vector<ClassLabel>& schedule,
                                        double cutoff_hz, double target_rate_hz = 100.0,
                                        std::vector<LabeledSegment>* truth = nullptr);

// Chops each segment independently into consecutive blocks of block_len
// frames (trailing partial blocks discarded) and concatenates the three
// channel buffers channel-major into one labeled super-sample.
std::vector<SuperSample> make_supersamples(const std::vector<PressureFrame>& frames,
                                           const std::vector<LabeledSegment>& segments,
                                           int block_len = kBlockLen);

struct SplitDataset {
  std::vector<SuperSample> train;
  std::vector<SuperSample> test;
  std::uint64_t seed = 0;
};

// Stratified random split: each class is shuffled and split independently,
// test size rounded to nearest (half up). Deterministic for a fixed seed.
SplitDataset split(const std::vector<SuperSample>& samples, double test_fraction,
                   std::uint64_t seed);

// CSV form: header "label,f0,...,f149", one sample per row; values printed
// with enough digits to round-trip float exactly.
void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<SuperSample>& samples);
std::vector<SuperSample> read_samples_csv(const std::filesystem::path& path);

// Length-prefixed little-endian binary form (exact round-trip).
void write_samples_bin(const std::filesystem::path& path,
                       const std::vector<SuperSample>& samples);
std::vector<SuperSample> read_samples_bin(const std::filesystem::path& path);

std::array<int, kNumClasses> class_counts(const std::vector<SuperSample>& samples);

}  // namespace insole
