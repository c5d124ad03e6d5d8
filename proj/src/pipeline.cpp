#include "insole/pipeline.hpp"

#include "insole/trace_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace insole {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

}  // namespace

std::vector<PressureFrame> frames_from_session(const RawTrace& trace, double cutoff_hz,
                                               double target_rate_hz) {
  const auto coeffs = design_lowpass(trace.sample_rate_hz, cutoff_hz);
  return decimate(filter_trace(trace, coeffs), target_rate_hz);
}

std::string confusion_text(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\pred    dorsal   neutral   ventral\n";
  for (int r = 0; r < kNumClasses; ++r) {
    out << std::left;
    char row[96];
    std::snprintf(row, sizeof row, "%-10s %8d %9d %9d",
                  std::string(label_name(static_cast<ClassLabel>(r))).c_str(),
                  cm.counts(r, 0), cm.counts(r, 1), cm.counts(r, 2));
    out << row << "\n";
  }
  return out.str();
}

std::vector<CheckResult> evaluate_thresholds(const E2eReport& report,
                                             const E2eThresholds& thresholds) {
  std::vector<CheckResult> checks;
  char detail[160];

  std::snprintf(detail, sizeof detail, "accuracy %.4f >= %.2f", report.accuracy,
                thresholds.min_accuracy);
  checks.push_back({"test_accuracy", report.accuracy >= thresholds.min_accuracy, detail});

  std::snprintf(detail, sizeof detail, "model %zu B <= %zu B",
                report.footprint.total_bytes(), thresholds.max_model_bytes);
  checks.push_back({"model_footprint",
                    report.footprint.total_bytes() <= thresholds.max_model_bytes, detail});

  std::snprintf(detail, sizeof detail, "max |margin delta| %.3g, labels %s",
                report.fidelity_max_margin_delta,
                report.fidelity_labels_identical ? "identical" : "DIFFER");
  checks.push_back({"compiled_fidelity",
                    report.fidelity_labels_identical &&
                        report.fidelity_max_margin_delta <= 1e-9,
                    detail});

  checks.push_back({"training_loss_monotone", report.logloss_monotone,
                    report.logloss_monotone ? "non-increasing" : "increased"});

  std::snprintf(detail, sizeof detail, "%llu events (expected %llu), labels %s",
                static_cast<unsigned long long>(report.stream_events),
                static_cast<unsigned long long>(report.stream_expected_events),
                report.stream_labels_match ? "match" : "DIFFER");
  checks.push_back({"stream_equivalence",
                    report.stream_labels_match &&
                        report.stream_events == report.stream_expected_events,
                    detail});

  if (!report.bench_reports.empty()) {
    const auto& single = report.bench_reports.front();
    std::snprintf(detail, sizeof detail, "W=1 mean %.4f ms <= %.2f ms",
                  double(single.mean_latency_ns) / 1e6, thresholds.max_single_worker_ms);
    checks.push_back({"single_worker_latency",
                      single.n_workers == 1 &&
                          double(single.mean_latency_ns) / 1e6 <=
                              thresholds.max_single_worker_ms,
                      detail});
  }
  return checks;
}

E2eReport run_e2e(const E2eConfig& config) {
  const auto t_start = clock_type::now();
  E2eReport report;

  // 1. Synthesize sessions, recover labels with the auto labeler, and build
  //    super-samples. Session seeds derive deterministically from the base.
  const int holds = static_cast<int>(std::llround(config.synth.session_s / config.synth.hold_s));
  std::vector<SuperSample> samples;
  std::vector<PressureFrame> stream_frames;  // last session doubles as replay input
  for (int s = 0; s < config.sessions; ++s) {
    SynthParams sp = config.synth;
    sp.seed = config.seed * 1000 + static_cast<std::uint64_t>(s);
    const auto schedule =
        protocol_schedule(holds, config.seed * 1000 + 500 + static_cast<std::uint64_t>(s));
    const auto frames = synth_frames(sp, schedule, config.cutoff_hz);
    const auto segments = auto_label(frames, config.geometry, config.labeler);
    auto sess_samples = make_supersamples(frames, segments);
    samples.insert(samples.end(), sess_samples.begin(), sess_samples.end());
    if (s == config.sessions - 1) stream_frames = frames;
  }
  report.n_samples = static_cast<int>(samples.size());

  // 2. Stratified split.
  const SplitDataset ds = split(samples, config.test_fraction, config.seed * 1000 + 999);
  report.n_train = static_cast<int>(ds.train.size());
  report.n_test = static_cast<int>(ds.test.size());
  report.train_counts = class_counts(ds.train);
  report.test_counts = class_counts(ds.test);

  // 3. Train.
  const auto t_train = clock_type::now();
  TrainLog log;
  const TreeEnsemble ensemble = train(ds.train, config.train_params, &log);
  report.train_seconds = seconds_since(t_train);
  report.round_logloss = log.round_logloss;
  report.logloss_monotone = true;
  for (std::size_t i = 1; i < log.round_logloss.size(); ++i)
    if (log.round_logloss[i] > log.round_logloss[i - 1] + 1e-9)
      report.logloss_monotone = false;

  // 4. Compile and check compiled-model fidelity on the test set.
  const FlatEnsemble flat = flatten(ensemble);
  report.footprint = footprint(flat);
  report.fidelity_labels_identical = true;
  for (const auto& s : ds.test) {
    const Prediction node_pred = predict_class(ensemble, s.features);
    const Prediction flat_pred = flat_predict(flat, s.features);
    report.fidelity_max_margin_delta =
        std::max(report.fidelity_max_margin_delta,
                 (node_pred.margins - flat_pred.margins).cwiseAbs().maxCoeff());
    if (node_pred.label != flat_pred.label) report.fidelity_labels_identical = false;
  }

  // 5. Offline evaluation: confusion matrix over the held-out set.
  for (const auto& s : ds.test) {
    const Prediction pred = flat_predict(flat, s.features);
    report.confusion.counts(static_cast<int>(s.label), static_cast<int>(pred.label))++;
  }
  report.accuracy = report.confusion.accuracy();

  // 6. Streaming replay equivalence on the last session's frames.
  {
    InferenceEngine engine(flat, partition(flat, config.stream_workers));
    std::vector<WireFrame> wire;
    wire.reserve(stream_frames.size());
    std::uint16_t seq = 0;
    for (const auto& f : stream_frames) {
      WireFrame w;
      w.seq = seq++;
      w.timestamp_ms = f.timestamp_ms;
      w.hallux = f.hallux;
      w.pinky = f.pinky;
      w.heel = f.heel;
      wire.push_back(w);
    }
    const StreamRun run = classify_frames(engine, wire);
    report.stream_frames = run.stats.frames_seen;
    report.stream_events = run.stats.events;
    report.stream_expected_events = stream_frames.size() / kBlockLen;

    // Offline route over the same log: whole-range blocks, same block math.
    const LabeledSegment whole{0, static_cast<int>(stream_frames.size()),
                               ClassLabel::Neutral};
    const auto offline = make_supersamples(stream_frames, {whole});
    report.stream_labels_match = offline.size() == run.events.size();
    for (std::size_t i = 0; report.stream_labels_match && i < offline.size(); ++i) {
      if (flat_predict(flat, offline[i].features).label != run.events[i].label)
        report.stream_labels_match = false;
    }
  }

  // 7. Benchmark.
  if (config.run_bench)
    report.bench_reports = bench(flat, config.bench_workers, config.bench_inferences,
                                 config.seed, config.bench_batch);

  // 8. Artifacts.
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    save_ensemble(config.out_dir / "ensemble.json", ensemble);
    save_flat(config.out_dir / "model.skgb", flat);
    write_samples_csv(config.out_dir / "train.csv", ds.train);
    write_samples_csv(config.out_dir / "test.csv", ds.test);
    write_frame_log(config.out_dir / "replay.skl", stream_frames);
    if (!report.bench_reports.empty()) {
      std::ofstream bench_out(config.out_dir / "bench.csv");
      bench_out << bench_csv(report.bench_reports);
    }
  }

  report.total_seconds = seconds_since(t_start);
  return report;
}

void write_manifest(std::ostream& out, const E2eConfig& config, const E2eReport& report,
                    const std::vector<CheckResult>& checks) {
  char line[256];
  out << "[config]\n";
  out << "seed = " << config.seed << "\n";
  out << "sessions = " << config.sessions << "\n";
  std::snprintf(line, sizeof line,
                "session_s = %g\nhold_s = %g\ntransition_s = %g\nnoise_sd = %g\n"
                "sample_rate_hz = %g\ncutoff_hz = %g",
                config.synth.session_s, config.synth.hold_s, config.synth.transition_s,
                config.synth.noise_sd, config.synth.sample_rate_hz, config.cutoff_hz);
  out << line << "\n";
  std::snprintf(line, sizeof line,
                "transition_threshold = %g\nmin_segment_frames = %d\ndead_zone_m = %g",
                config.labeler.transition_threshold, config.labeler.min_segment_frames,
                config.labeler.dead_zone_m);
  out << line << "\n";
  std::snprintf(line, sizeof line,
                "n_rounds = %d\nmax_depth = %d\nlearning_rate = %g\nlambda = %g\n"
                "gamma = %g\nmin_child_weight = %g",
                config.train_params.n_rounds, config.train_params.max_depth,
                config.train_params.learning_rate, config.train_params.lambda,
                config.train_params.gamma, config.train_params.min_child_weight);
  out << line << "\n";
  out << "test_fraction = " << config.test_fraction << "\n";
  out << "stream_workers = " << config.stream_workers << "\n";

  out << "\n[dataset]\n";
  out << "samples = " << report.n_samples << "\n";
  out << "train = " << report.n_train << " (dorsal " << report.train_counts[0]
      << ", neutral " << report.train_counts[1] << ", ventral " << report.train_counts[2]
      << ")\n";
  out << "test = " << report.n_test << " (dorsal " << report.test_counts[0] << ", neutral "
      << report.test_counts[1] << ", ventral " << report.test_counts[2] << ")\n";

  out << "\n[result]\n";
  std::snprintf(line, sizeof line, "accuracy = %.6f", report.accuracy);
  out << line << "\n";
  out << "confusion =\n" << confusion_text(report.confusion);
  std::snprintf(line, sizeof line, "final_train_logloss = %.9f",
                report.round_logloss.empty() ? 0.0 : report.round_logloss.back());
  out << line << "\n";
  out << "logloss_monotone = " << (report.logloss_monotone ? "yes" : "no") << "\n";
  std::snprintf(line, sizeof line, "fidelity_max_margin_delta = %.3g",
                report.fidelity_max_margin_delta);
  out << line << "\n";
  out << "model_bytes = " << report.footprint.total_bytes() << "\n";
  out << "stream_events = " << report.stream_events << " / "
      << report.stream_expected_events << "\n";
  out << "stream_labels_match = " << (report.stream_labels_match ? "yes" : "no") << "\n";

  if (!report.bench_reports.empty()) {
    out << "\n[timing]\n";  // run-to-run variable fields below this marker
    out << "bench_csv =\n" << bench_csv(report.bench_reports);
    std::snprintf(line, sizeof line, "train_seconds = %.2f\ntotal_seconds = %.2f",
                  report.train_seconds, report.total_seconds);
    out << line << "\n";
  }

  out << "\n[checks]\n";
  for (const auto& c : checks)
    out << c.name << " = " << (c.passed ? "PASS" : "FAIL") << " (" << c.detail << ")\n";
}

}  // namespace insole
