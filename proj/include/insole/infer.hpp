#pragma once

#include "insole/flat.hpp"
#include "insole/types.hpp"

#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <thread>
#include <vector>

namespace insole {

struct InferenceResult {
  ClassLabel label = ClassLabel::Dorsal;
  Eigen::Vector3d probabilities;
  Eigen::Vector3d margins;
  std::int64_t latency_ns = -1;  // set by the benchmark path only
};

// Deterministic parallel engine: each worker evaluates its assigned trees and
// accumulates per-class partial margins; partials are reduced in ascending
// worker-index order, so a given worker count always produces identical
// margins. The pool is created once and reused across batches.
//
// infer()/margins_batch() are externally synchronized: one caller at a time.
class InferenceEngine {
 public:
  // Throws std::invalid_argument when the plan was built for a different
  // tree count.
  InferenceEngine(const FlatEnsemble& model, PartitionPlan plan);
  ~InferenceEngine();

  InferenceEngine(const InferenceEngine&) = delete;
  InferenceEngine& operator=(const InferenceEngine&) = delete;

  int n_workers() const { return plan_.n_workers; }
  const FlatEnsemble& model() const { return model_; }

  InferenceResult infer(Eigen::Ref<const Eigen::VectorXf> features);

  // features: one sample per column (n_features x n). Returns 3 x n margins.
  Eigen::Matrix3Xd margins_batch(const Eigen::MatrixXf& features);

  std::vector<InferenceResult> classify_batch(const Eigen::MatrixXf& features);

 private:
  void worker_loop(int worker_index);
  void run_workers(const Eigen::MatrixXf& features);

  const FlatEnsemble& model_;
  PartitionPlan plan_;

  std::vector<std::thread> pool_;
  std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  const Eigen::MatrixXf* job_features_ = nullptr;
  std::vector<Eigen::Matrix3Xd> partials_;  // one 3 x n block per worker
  std::uint64_t generation_ = 0;
  int pending_ = 0;
  bool shutdown_ = false;
};

struct BenchReport {
  int n_workers = 0;
  int batch_size = 0;
  std::int64_t mean_latency_ns = 0;
  std::int64_t p50_ns = 0;
  std::int64_t p99_ns = 0;
  double speedup_vs_single = 1.0;
  std::int64_t inferences_run = 0;
};

// Fixed-seed benchmark over random feature batches. One warm-up pass per
// worker count is excluded from timing; latency percentiles come from
// per-dispatch timings divided by the batch size. Requires n_inferences
// >= 1000.
std::vector<BenchReport> bench(const FlatEnsemble& model,
                               const std::vector<int>& worker_counts,
                               std::int64_t n_inferences, std::uint64_t seed,
                               int batch_size = 64);

std::string bench_csv(const std::vector<BenchReport>& reports);

}  // namespace insole
