#pragma once

#include "insole/dataset.hpp"
#include "insole/flat.hpp"
#include "insole/gbt.hpp"
#include "insole/infer.hpp"
#include "insole/signal.hpp"
#include "insole/stream.hpp"
#include "insole/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace insole {

// Everything needed to reproduce a full run: synth -> filter -> decimate ->
// auto-label -> super-samples -> split -> train -> compile -> offline eval ->
// streaming replay eval.
struct E2eConfig {
  std::uint64_t seed = 42;
  int sessions = 3;
  SynthParams synth;  // per-session seeds derive from `seed`
  double cutoff_hz = 50.0;
  ContactGeometry geometry;
  LabelerParams labeler;
  double test_fraction = 0.2;
  TrainParams train_params;
  int stream_workers = 9;
  std::vector<int> bench_workers = {1, 2, 4};
  std::int64_t bench_inferences = 2000;
  int bench_batch = 64;
  bool run_bench = true;
  std::filesystem::path out_dir;  // empty: keep everything in memory
};

struct ConfusionMatrix {
  // rows: true class, columns: predicted class
  Eigen::Matrix3i counts = Eigen::Matrix3i::Zero();

  int total() const { return counts.sum(); }
  double accuracy() const {
    return total() > 0 ? double(counts.trace()) / double(total()) : 0.0;
  }
};

std::string confusion_text(const ConfusionMatrix& cm);

struct E2eReport {
  int n_samples = 0;
  int n_train = 0;
  int n_test = 0;
  std::array<int, kNumClasses> train_counts{};
  std::array<int, kNumClasses> test_counts{};
  ConfusionMatrix confusion;
  double accuracy = 0.0;

  std::vector<double> round_logloss;
  bool logloss_monotone = false;

  double fidelity_max_margin_delta = 0.0;
  bool fidelity_labels_identical = false;

  FootprintReport footprint;

  std::vector<BenchReport> bench_reports;

  std::uint64_t stream_frames = 0;
  std::uint64_t stream_events = 0;
  std::uint64_t stream_expected_events = 0;
  bool stream_labels_match = false;

  double train_seconds = 0.0;
  double total_seconds = 0.0;
};

// Pinned pass/fail thresholds for an e2e run.
struct E2eThresholds {
  double min_accuracy = 0.90;
  std::size_t max_model_bytes = 64 * 1024;
  double max_single_worker_ms = 0.1;  // mean per-inference latency at W=1
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckResult> evaluate_thresholds(const E2eReport& report,
                                             const E2eThresholds& thresholds);

E2eReport run_e2e(const E2eConfig& config);

// Append-only text manifest; every field needed to re-run the pipeline is
// echoed back. Fields under [timing] vary run to run, everything else is
// reproducible bit for bit from config + seeds.
void write_manifest(std::ostream& out, const E2eConfig& config, const E2eReport& report,
                    const std::vector<CheckResult>& checks);

// Helpers shared by the CLI and tests.
std::vector<PressureFrame> frames_from_session(const RawTrace& trace, double cutoff_hz,
                                               double target_rate_hz = 100.0);

}  // namespace insole
