#pragma once

#include "insole/gbt.hpp"
#include "insole/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace insole {

// Tree ensemble compiled into contiguous lookup arrays. Per-node storage is
// 2-byte feature index (-1 marks a leaf), 4-byte threshold (or leaf value in
// the same slot), and 2-byte child offsets relative to the tree's root. Each
// tree occupies one contiguous preorder block; children always sit after
// their parent, so traversal is forward-only.
struct FlatEnsemble {
  std::vector<std::int16_t> feature_idx;
  std::vector<float> threshold;
  std::vector<std::uint16_t> left_child;
  std::vector<std::uint16_t> right_child;
  std::vector<std::uint32_t> tree_roots;  // strictly increasing node offsets
  std::vector<std::uint8_t> tree_class;
  int n_classes = kNumClasses;
  int n_features = kFeatureDim;
  float base_score = 0.0f;

  std::size_t tree_count() const { return tree_roots.size(); }
  std::size_t node_count() const { return feature_idx.size(); }
};

// Depth-first preorder flattening. Margin evaluation over the result matches
// node-form traversal bit for bit (same comparisons, same accumulation
// order).
FlatEnsemble flatten(const TreeEnsemble& ensemble);

// Accumulates every tree of `flat` into `margins` (margins must be
// pre-initialized; base_score is not applied here).
void accumulate_margins(const FlatEnsemble& flat, Eigen::Ref<const Eigen::VectorXf> features,
                        Eigen::Vector3d& margins);

// Sum of the leaf values reached in trees [begin, end) of the flat ensemble.
void accumulate_tree_range(const FlatEnsemble& flat, std::size_t begin, std::size_t end,
                           Eigen::Ref<const Eigen::VectorXf> features,
                           Eigen::Vector3d& margins);

Eigen::Vector3d flat_margins(const FlatEnsemble& flat,
                             Eigen::Ref<const Eigen::VectorXf> features);

Prediction flat_predict(const FlatEnsemble& flat, Eigen::Ref<const Eigen::VectorXf> features);

// Assignment of trees to workers. When the tree count is not divisible by
// n_workers the count is padded; indices at or past source_tree_count denote
// zero-leaf dummy trees (class index round-robin) that contribute nothing.
struct PartitionPlan {
  int n_workers = 1;
  std::uint32_t source_tree_count = 0;
  std::uint32_t padded_tree_count = 0;
  std::vector<std::vector<std::uint32_t>> assignments;  // per worker, tree indices
};

// Round-robin partition: tree t goes to worker t % n_workers, so every worker
// holds exactly padded_tree_count / n_workers trees with a near-even class mix.
PartitionPlan partition(const FlatEnsemble& flat, int n_workers);

// Byte layout report matching the model file encoding exactly.
struct FootprintReport {
  std::size_t n_trees = 0;
  std::size_t n_nodes = 0;
  std::size_t feature_bytes = 0;    // 2 per node
  std::size_t threshold_bytes = 0;  // 4 per node
  std::size_t left_bytes = 0;       // 2 per node
  std::size_t right_bytes = 0;      // 2 per node
  std::size_t roots_bytes = 0;      // 4 per tree
  std::size_t class_bytes = 0;      // 1 per tree
  std::size_t header_bytes = 0;
  std::size_t payload_bytes() const {
    return feature_bytes + threshold_bytes + left_bytes + right_bytes + roots_bytes +
           class_bytes;
  }
  std::size_t total_bytes() const { return header_bytes + payload_bytes(); }
};

FootprintReport footprint(const FlatEnsemble& flat);
std::string footprint_text(const FootprintReport& report);

// Binary model file, little-endian:
//   magic "SKGB" | u8 version | u8 n_classes | u8 feature index width (2)
//   | u8 value width (4) | u8 child offset width (2) | u8 class width (1)
//   | u16 n_features | u32 n_trees | u32 n_nodes | f32 base_score
//   | feature_idx[] | threshold[] | left[] | right[] | tree_roots[] | tree_class[]
std::vector<std::uint8_t> serialize_flat(const FlatEnsemble& flat);
FlatEnsemble deserialize_flat(const std::vector<std::uint8_t>& bytes);
void save_flat(const std::filesystem::path& path, const FlatEnsemble& flat);
FlatEnsemble load_flat(const std::filesystem::path& path);

// Human-readable table dump.
std::string dump_flat(const FlatEnsemble& flat);

}  // namespace insole
