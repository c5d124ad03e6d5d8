#include "insole/dataset.hpp"

#include "insole/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace insole {

namespace {

Eigen::Vector3d pressures_from_list(const KeyValueConfig& cfg, const std::string& key,
                                    const Eigen::Vector3d& fallback) {
  if (!cfg.has(key)) return fallback;
  const auto v = cfg.get_list(key);
  if (v.size() != 3)
    throw std::invalid_argument("config: '" + key + "' needs 3 comma-separated values");
  return {v[0], v[1], v[2]};
}

}  // namespace

SynthParams synth_params_from_config(const KeyValueConfig& cfg) {
  SynthParams p;
  p.session_s = cfg.get_double("session_s", p.session_s);
  p.hold_s = cfg.get_double("hold_s", p.hold_s);
  p.transition_s = cfg.get_double("transition_s", p.transition_s);
  p.noise_sd = cfg.get_double("noise_sd", p.noise_sd);
  p.sample_rate_hz = cfg.get_double("sample_rate_hz", p.sample_rate_hz);
  p.seed = cfg.get_uint64("seed", p.seed);
  p.class_pressures.dorsal =
      pressures_from_list(cfg, "dorsal_pressures", p.class_pressures.dorsal);
  p.class_pressures.neutral =
      pressures_from_list(cfg, "neutral_pressures", p.class_pressures.neutral);
  p.class_pressures.ventral =
      pressures_from_list(cfg, "ventral_pressures", p.class_pressures.ventral);
  return p;
}

namespace {

void check_synth_params(const SynthParams& params, const std::vector<ClassLabel>& schedule) {
  if (schedule.empty())
    throw std::invalid_argument("synth_session: empty schedule");
  if (params.hold_s <= 0 || params.session_s <= 0 || params.sample_rate_hz <= 0)
    throw std::invalid_argument("synth_session: durations and rate must be positive");
  if (params.transition_s >= params.hold_s)
    throw std::invalid_argument("synth_session: transition_s must be shorter than hold_s");
  const double expected = double(schedule.size()) * params.hold_s;
  if (std::abs(expected - params.session_s) > 1e-9 * params.session_s)
    throw std::invalid_argument("synth_session: schedule length * hold_s != session_s");
}

// Mean level at time t: the first hold's class means plus, per boundary, a
// logistic step toward the next hold's means. The blend weight for boundary k
// is sigma(8 (t - k*hold_s) / transition_s), numerically 0 or 1 more than
// half a transition width away.
Eigen::Vector3d synth_mean_at(const SynthParams& params,
                              const std::vector<ClassLabel>& schedule, double t) {
  Eigen::Vector3d mean = params.class_pressures.mean_for(schedule[0]);
  for (std::size_t k = 1; k < schedule.size(); ++k) {
    if (schedule[k] == schedule[k - 1]) continue;
    const double u = 8.0 * (t - double(k) * params.hold_s) / params.transition_s;
    double w;
    if (u > 40.0) w = 1.0;
    else if (u < -40.0) w = 0.0;
    else w = 1.0 / (1.0 + std::exp(-u));
    if (w == 0.0) continue;
    mean += w * (params.class_pressures.mean_for(schedule[k]) -
                 params.class_pressures.mean_for(schedule[k - 1]));
  }
  return mean;
}

// Ground truth at 100 Hz frame resolution; holds of equal class merge.
std::vector<LabeledSegment> synth_truth(const SynthParams& params,
                                        const std::vector<ClassLabel>& schedule) {
  const auto n_holds = static_cast<int>(schedule.size());
  const double frames_per_hold = params.hold_s * 100.0;
  std::vector<LabeledSegment> truth;
  int run_start_hold = 0;
  for (int k = 1; k <= n_holds; ++k) {
    if (k < n_holds && schedule[k] == schedule[static_cast<std::size_t>(run_start_hold)])
      continue;
    const int start = static_cast<int>(std::llround(frames_per_hold * run_start_hold));
    const int end = static_cast<int>(std::llround(frames_per_hold * k));
    truth.push_back({start, end, schedule[static_cast<std::size_t>(run_start_hold)]});
    run_start_hold = k;
  }
  return truth;
}

}  // namespace

SynthSession synth_session(const SynthParams& params,
                           const std::vector<ClassLabel>& schedule) {
  check_synth_params(params, schedule);
  const auto n = static_cast<Eigen::Index>(std::llround(params.session_s * params.sample_rate_hz));

  SynthSession out;
  out.trace.sample_rate_hz = params.sample_rate_hz;
  for (auto& ch : out.trace.channels) ch.resize(n);

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = double(i) / params.sample_rate_hz;
    const Eigen::Vector3d mean = synth_mean_at(params, schedule, t);
    for (int ch = 0; ch < kNumChannels; ++ch) {
      const double v = mean[ch] + params.noise_sd * noise(rng);
      out.trace.channels[ch][i] = std::clamp(v, 0.0, double(kAdcMax));
    }
  }
  out.truth = synth_truth(params, schedule);
  return out;
}

std::vector<PressureFrame> synth_frames(const SynthParams& params,
                                        const std::vector<ClassLabel>& schedule,
                                        double cutoff_hz, double target_rate_hz,
                                        std::vector<LabeledSegment>* truth) {
  check_synth_params(params, schedule);
  const double factor = params.sample_rate_hz / target_rate_hz;
  const double rounded = std::round(factor);
  if (rounded < 1.0 || std::abs(factor - rounded) > 1e-9 * factor)
    throw std::invalid_argument("synth_frames: sample rate not an integer multiple of target");
  const auto k = static_cast<Eigen::Index>(rounded);
  const auto n = static_cast<Eigen::Index>(std::llround(params.session_s * params.sample_rate_hz));
  const double period_ms = 1000.0 / target_rate_hz;

  const auto coeffs = design_lowpass(params.sample_rate_hz, cutoff_hz);
  std::array<BiquadFilter, kNumChannels> filters{BiquadFilter(coeffs), BiquadFilter(coeffs),
                                                 BiquadFilter(coeffs)};

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto quantize = [](double v) {
    const double r = std::round(v);
    return static_cast<std::uint16_t>(std::clamp(r, 0.0, double(kAdcMax)));
  };

  std::vector<PressureFrame> frames;
  frames.reserve(static_cast<std::size_t>(n / k) + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = double(i) / params.sample_rate_hz;
    const Eigen::Vector3d mean = synth_mean_at(params, schedule, t);
    double filtered[kNumChannels];
    for (int ch = 0; ch < kNumChannels; ++ch) {
      const double x =
          std::clamp(mean[ch] + params.noise_sd * noise(rng), 0.0, double(kAdcMax));
      if (i == 0) filters[static_cast<std::size_t>(ch)].prime(x);
      filtered[ch] = filters[static_cast<std::size_t>(ch)].step(x);
    }
    if (i % k == 0) {
      PressureFrame f;
      f.timestamp_ms = static_cast<std::uint32_t>(
          std::llround(double(i / k) * period_ms));
      f.hallux = quantize(filtered[0]);
      f.pinky = quantize(filtered[1]);
      f.heel = quantize(filtered[2]);
      frames.push_back(f);
    }
  }
  if (truth) *truth = synth_truth(params, schedule);
  return frames;
}

std::vector<ClassLabel> protocol_schedule(int holds, std::uint64_t seed) {
  if (holds <= 0) throw std::invalid_argument("protocol_schedule: holds must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<ClassLabel> schedule;
  schedule.reserve(static_cast<std::size_t>(holds));
  schedule.push_back(static_cast<ClassLabel>(pick(rng)));
  std::uniform_int_distribution<int> step(1, 2);
  for (int i = 1; i < holds; ++i) {
    const int prev = static_cast<int>(schedule.back());
    schedule.push_back(static_cast<ClassLabel>((prev + step(rng)) % kNumClasses));
  }
  return schedule;
}

std::vector<SuperSample> make_supersamples(const std::vector<PressureFrame>& frames,
                                           const std::vector<LabeledSegment>& segments,
                                           int block_len) {
  if (block_len <= 0) throw std::invalid_argument("make_supersamples: block_len must be positive");
  const int n = static_cast<int>(frames.size());
  std::vector<SuperSample> samples;
  for (const auto& seg : segments) {
    if (seg.start < 0 || seg.end > n || seg.start >= seg.end)
      throw std::invalid_argument("make_supersamples: segment out of range");
    for (int block = seg.start; block + block_len <= seg.end; block += block_len) {
      SuperSample s;
      s.label = seg.label;
      s.features.resize(kNumChannels * block_len);
      for (int ch = 0; ch < kNumChannels; ++ch)
        for (int i = 0; i < block_len; ++i)
          s.features[ch * block_len + i] =
              float(frames[static_cast<std::size_t>(block + i)].channel(ch));
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

SplitDataset split(const std::vector<SuperSample>& samples, double test_fraction,
                   std::uint64_t seed) {
  if (samples.size() < 5)
    throw std::invalid_argument("split: need at least 5 samples");
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw std::invalid_argument("split: test_fraction must lie in (0, 1)");

  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_class[static_cast<int>(samples[i].label)].push_back(i);

  SplitDataset out;
  out.seed = seed;
  std::mt19937_64 rng(seed);
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) {
      std::fprintf(stderr, "split: warning: class '%s' is empty, skipped\n",
                   std::string(label_name(static_cast<ClassLabel>(c))).c_str());
      continue;
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    // Round half up: 539 samples at 0.2 give 108 test, matching the protocol
    // arithmetic rather than a blind ceil.
    const auto n_test = static_cast<std::size_t>(
        std::floor(double(idx.size()) * test_fraction + 0.5));
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_test ? out.test : out.train).push_back(samples[idx[i]]);
  }
  return out;
}

void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<SuperSample>& samples) {
  std::ofstream outf(path);
  if (!outf) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const Eigen::Index dim = samples.empty() ? kFeatureDim : samples[0].features.size();
  outf << "label";
  for (Eigen::Index f = 0; f < dim; ++f) outf << ",f" << f;
  outf << "\n";
  char buf[64];
  for (const auto& s : samples) {
    outf << label_name(s.label);
    for (Eigen::Index f = 0; f < s.features.size(); ++f) {
      std::snprintf(buf, sizeof buf, "%.9g", double(s.features[f]));
      outf << ',' << buf;
    }
    outf << "\n";
  }
  if (!outf) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SuperSample> read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset: " + path.string());
  std::vector<SuperSample> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    const auto label = label_from_name(cell);
    if (!label) throw std::runtime_error("bad label '" + cell + "' in " + path.string());
    SuperSample s;
    s.label = *label;
    std::vector<float> feats;
    while (std::getline(row, cell, ','))
      feats.push_back(std::stof(cell));
    s.features = Eigen::Map<Eigen::VectorXf>(feats.data(),
                                             static_cast<Eigen::Index>(feats.size()));
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {
template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T take(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace

void write_samples_bin(const std::filesystem::path& path,
                       const std::vector<SuperSample>& samples) {
  std::ofstream outf(path, std::ios::binary);
  if (!outf) throw std::runtime_error("cannot open " + path.string() + " for writing");
  put<std::uint32_t>(outf, static_cast<std::uint32_t>(samples.size()));
  const auto dim = static_cast<std::uint32_t>(
      samples.empty() ? kFeatureDim : samples[0].features.size());
  put<std::uint32_t>(outf, dim);
  for (const auto& s : samples) {
    if (static_cast<std::uint32_t>(s.features.size()) != dim)
      throw std::invalid_argument("write_samples_bin: inconsistent feature dimension");
    put<std::uint8_t>(outf, static_cast<std::uint8_t>(s.label));
    outf.write(reinterpret_cast<const char*>(s.features.data()),
               std::streamsize(sizeof(float)) * dim);
  }
  if (!outf) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SuperSample> read_samples_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto count = take<std::uint32_t>(in);
  const auto dim = take<std::uint32_t>(in);
  if (!in || dim == 0 || dim > 1u << 20)
    throw std::runtime_error("corrupt dataset header: " + path.string());
  std::vector<SuperSample> samples(count);
  for (auto& s : samples) {
    const auto raw = take<std::uint8_t>(in);
    if (raw >= kNumClasses) throw std::runtime_error("corrupt label in " + path.string());
    s.label = static_cast<ClassLabel>(raw);
    s.features.resize(dim);
    in.read(reinterpret_cast<char*>(s.features.data()), std::streamsize(sizeof(float)) * dim);
  }
  if (!in) throw std::runtime_error("truncated dataset: " + path.string());
  return samples;
}

std::array<int, kNumClasses> class_counts(const std::vector<SuperSample>& samples) {
  std::array<int, kNumClasses> counts{};
  for (const auto& s : samples) counts[static_cast<int>(s.label)]++;
  return counts;
}

}  // namespace insole
