#pragma once

#include "insole/config.hpp"
#include "insole/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace insole {

// One tree node. Internal nodes carry a split (feature, threshold, children);
// leaves carry the margin contribution in `value` with feature == -1.
// Thresholds and leaf values are single precision so the compiled flat form
// reproduces reference traversal bit for bit.
struct TreeNode {
  std::int16_t feature = -1;
  float value = 0.0f;          // threshold for internal nodes, leaf value for leaves
  std::int32_t left = -1;      // index into Tree::nodes
  std::int32_t right = -1;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::uint8_t class_index = 0;
  std::vector<TreeNode> nodes;  // nodes[0] is the root, preorder layout
};

struct TreeEnsemble {
  int n_classes = kNumClasses;
  float base_score = 0.0f;  // per-class starting margin
  float learning_rate = 0.3f;
  std::vector<Tree> trees;  // round-major, class index round-robin within a round
};

struct TrainParams {
  int n_rounds = 90;
  int max_depth = 4;
  double learning_rate = 0.3;
  double lambda = 1.0;            // L2 penalty on leaf weights
  double gamma = 0.0;             // minimum split gain
  double min_child_weight = 1.0;  // minimum hessian mass per child
  std::uint64_t seed = 0;         // reserved; training has no sampling
};

TrainParams train_params_from_config(const KeyValueConfig& cfg);

// Per-round training diagnostics.
struct TrainLog {
  std::vector<double> round_logloss;  // mean training logloss after each round
};

// Multiclass gradient boosting on the softmax logloss. Each round computes
// class probabilities from the current margins, then fits one tree per class
// on that class's gradient/hessian pairs (g = p - y, h = p(1-p)) with exact
// greedy split search over sorted feature values. Deterministic.
// Throws std::invalid_argument on an empty set, missing classes, or
// non-finite features.
TreeEnsemble train(const std::vector<SuperSample>& train_set, const TrainParams& params,
                   TrainLog* log = nullptr);

// Reference evaluator: base_score plus the sum of leaf values reached in each
// class's trees (go left iff feature < threshold), accumulated in tree order.
Eigen::Vector3d predict_margins(const TreeEnsemble& ensemble,
                                Eigen::Ref<const Eigen::VectorXf> features);

// Numerically stable softmax (max subtraction).
Eigen::Vector3d softmax(const Eigen::Vector3d& margins);

// Argmax with ties broken toward the lowest class index.
ClassLabel argmax_label(const Eigen::Vector3d& probabilities);

struct Prediction {
  ClassLabel label = ClassLabel::Dorsal;
  Eigen::Vector3d probabilities;
  Eigen::Vector3d margins;
};

Prediction predict_class(const TreeEnsemble& ensemble,
                         Eigen::Ref<const Eigen::VectorXf> features);

// Mean multiclass logloss of the ensemble over a sample set.
double mean_logloss(const TreeEnsemble& ensemble, const std::vector<SuperSample>& samples);

// JSON text form (the compiler input). Serialization is deterministic:
// identical ensembles produce identical bytes.
std::string ensemble_to_json(const TreeEnsemble& ensemble);
TreeEnsemble ensemble_from_json(const std::string& text);
void save_ensemble(const std::filesystem::path& path, const TreeEnsemble& ensemble);
TreeEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace insole
