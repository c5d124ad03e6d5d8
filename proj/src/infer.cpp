#include "insole/infer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace insole {

namespace {

// Partial margins for one worker's share of the plan over a whole batch.
// Dummy padding trees (index >= source count) are skipped; they are single
// zero leaves and contribute nothing.
void eval_assignment(const FlatEnsemble& model, const std::vector<std::uint32_t>& trees,
                     std::uint32_t source_tree_count, const Eigen::MatrixXf& features,
                     Eigen::Matrix3Xd& out) {
  out.setZero(3, features.cols());
  Eigen::Vector3d margins;
  for (Eigen::Index col = 0; col < features.cols(); ++col) {
    margins.setZero();
    for (const std::uint32_t t : trees) {
      if (t >= source_tree_count) continue;
      accumulate_tree_range(model, t, t + 1, features.col(col), margins);
    }
    out.col(col) = margins;
  }
}

std::int64_t percentile_ns(std::vector<std::int64_t>& sorted_ns, double q) {
  if (sorted_ns.empty()) return 0;
  const auto rank = static_cast<std::size_t>(
      std::ceil(q * double(sorted_ns.size()))) ;
  return sorted_ns[std::min(sorted_ns.size() - 1, rank == 0 ? 0 : rank - 1)];
}

}  // namespace

InferenceEngine::InferenceEngine(const FlatEnsemble& model, PartitionPlan plan)
    : model_(model), plan_(std::move(plan)) {
  if (plan_.source_tree_count != model_.tree_count())
    throw std::invalid_argument("inference engine: plan built for a different model");
  if (plan_.n_workers < 1 ||
      plan_.assignments.size() != static_cast<std::size_t>(plan_.n_workers))
    throw std::invalid_argument("inference engine: malformed partition plan");

  partials_.resize(static_cast<std::size_t>(plan_.n_workers));
  if (plan_.n_workers > 1) {
    pool_.reserve(static_cast<std::size_t>(plan_.n_workers));
    for (int w = 0; w < plan_.n_workers; ++w)
      pool_.emplace_back([this, w] { worker_loop(w); });
  }
}

InferenceEngine::~InferenceEngine() {
  {
    std::lock_guard lock(mutex_);
    shutdown_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : pool_) t.join();
}

void InferenceEngine::worker_loop(int worker_index) {
  std::uint64_t seen = 0;
  for (;;) {
    const Eigen::MatrixXf* features = nullptr;
    {
      std::unique_lock lock(mutex_);
      work_cv_.wait(lock, [&] { return shutdown_ || generation_ != seen; });
      if (shutdown_) return;
      seen = generation_;
      features = job_features_;
    }
    eval_assignment(model_, plan_.assignments[static_cast<std::size_t>(worker_index)],
                    plan_.source_tree_count, *features,
                    partials_[static_cast<std::size_t>(worker_index)]);
    {
      std::lock_guard lock(mutex_);
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }
}

void InferenceEngine::run_workers(const Eigen::MatrixXf& features) {
  {
    std::lock_guard lock(mutex_);
    job_features_ = &features;
    pending_ = plan_.n_workers;
    ++generation_;
  }
  work_cv_.notify_all();
  std::unique_lock lock(mutex_);
  done_cv_.wait(lock, [&] { return pending_ == 0; });
}

Eigen::Matrix3Xd InferenceEngine::margins_batch(const Eigen::MatrixXf& features) {
  if (features.rows() != model_.n_features)
    throw std::invalid_argument("inference engine: feature dimension mismatch");
  if (!features.allFinite())
    throw std::invalid_argument("inference engine: non-finite feature value");

  if (plan_.n_workers == 1) {
    eval_assignment(model_, plan_.assignments[0], plan_.source_tree_count, features,
                    partials_[0]);
  } else {
    run_workers(features);
  }

  // Reduce in ascending worker order: fixed associativity makes repeat runs
  // bit-identical for a given worker count.
  Eigen::Matrix3Xd margins =
      Eigen::Matrix3Xd::Constant(3, features.cols(), double(model_.base_score));
  for (const auto& part : partials_) margins += part;
  return margins;
}

InferenceResult InferenceEngine::infer(Eigen::Ref<const Eigen::VectorXf> features) {
  Eigen::MatrixXf one(features.size(), 1);
  one.col(0) = features;
  const Eigen::Matrix3Xd margins = margins_batch(one);
  InferenceResult result;
  result.margins = margins.col(0);
  result.probabilities = softmax(result.margins);
  result.label = argmax_label(result.probabilities);
  return result;
}

std::vector<InferenceResult> InferenceEngine::classify_batch(const Eigen::MatrixXf& features) {
  const Eigen::Matrix3Xd margins = margins_batch(features);
  std::vector<InferenceResult> results(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    auto& r = results[static_cast<std::size_t>(i)];
    r.margins = margins.col(i);
    r.probabilities = softmax(r.margins);
    r.label = argmax_label(r.probabilities);
  }
  return results;
}

std::vector<BenchReport> bench(const FlatEnsemble& model,
                               const std::vector<int>& worker_counts,
                               std::int64_t n_inferences, std::uint64_t seed,
                               int batch_size) {
  if (n_inferences < 1000)
    throw std::invalid_argument("bench: need at least 1000 inferences");
  if (batch_size < 1) throw std::invalid_argument("bench: batch size must be >= 1");

  // One fixed random batch pool shared by every worker count.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> value(0.0f, float(kAdcMax));
  Eigen::MatrixXf features(model.n_features, n_inferences);
  for (Eigen::Index c = 0; c < features.cols(); ++c)
    for (Eigen::Index r = 0; r < features.rows(); ++r) features(r, c) = value(rng);

  using clock = std::chrono::steady_clock;

  auto run_one = [&](int workers) {
    InferenceEngine engine(model, partition(model, workers));

    // Warm-up pass: populates caches and faults in buffers, not timed.
    const Eigen::Index warm = std::min<Eigen::Index>(features.cols(), 4 * batch_size);
    (void)engine.margins_batch(features.leftCols(warm));

    std::vector<std::int64_t> per_inference_ns;
    per_inference_ns.reserve(static_cast<std::size_t>(n_inferences / batch_size) + 1);
    double total_ns = 0.0;
    std::int64_t done = 0;
    while (done < n_inferences) {
      const auto n = std::min<Eigen::Index>(batch_size, n_inferences - done);
      const auto t0 = clock::now();
      (void)engine.margins_batch(features.middleCols(done, n));
      const auto t1 = clock::now();
      const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
      total_ns += double(ns);
      per_inference_ns.push_back(ns / n);
      done += n;
    }

    std::sort(per_inference_ns.begin(), per_inference_ns.end());
    BenchReport report;
    report.n_workers = workers;
    report.batch_size = batch_size;
    report.inferences_run = n_inferences;
    report.mean_latency_ns = static_cast<std::int64_t>(total_ns / double(n_inferences));
    report.p50_ns = percentile_ns(per_inference_ns, 0.50);
    report.p99_ns = percentile_ns(per_inference_ns, 0.99);
    return report;
  };

  // The W=1 reference is measured even when not requested so every report
  // can carry a speedup figure.
  std::int64_t single_mean = -1;
  std::vector<BenchReport> reports;
  for (const int w : worker_counts) {
    BenchReport r = run_one(w);
    if (w == 1 && single_mean < 0) single_mean = r.mean_latency_ns;
    reports.push_back(r);
  }
  if (single_mean < 0) single_mean = run_one(1).mean_latency_ns;
  for (auto& r : reports)
    r.speedup_vs_single =
        r.n_workers == 1 ? 1.0 : double(single_mean) / double(r.mean_latency_ns);
  return reports;
}

std::string bench_csv(const std::vector<BenchReport>& reports) {
  std::ostringstream out;
  out << "workers,mean_ns,p50_ns,p99_ns,speedup\n";
  for (const auto& r : reports) {
    char speed[32];
    std::snprintf(speed, sizeof speed, "%.4f", r.speedup_vs_single);
    out << r.n_workers << ',' << r.mean_latency_ns << ',' << r.p50_ns << ',' << r.p99_ns
        << ',' << speed << "\n";
  }
  return out.str();
}

}  // namespace insole
