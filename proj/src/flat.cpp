#include "insole/flat.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace insole {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'G', 'B'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 1 + 1 + 1 + 1 + 1 + 1 + 2 + 4 + 4 + 4;

void flatten_node(const Tree& tree, int node_idx, std::uint32_t root,
                  FlatEnsemble& out) {
  const auto& nd = tree.nodes[static_cast<std::size_t>(node_idx)];
  const auto slot = out.feature_idx.size();
  out.feature_idx.push_back(nd.feature);
  out.threshold.push_back(nd.value);
  out.left_child.push_back(0);
  out.right_child.push_back(0);
  if (nd.is_leaf()) return;

  const auto left_rel = out.feature_idx.size() - root;
  if (left_rel > std::numeric_limits<std::uint16_t>::max())
    throw std::invalid_argument("flatten: tree exceeds 16-bit child offset range");
  out.left_child[slot] = static_cast<std::uint16_t>(left_rel);
  flatten_node(tree, nd.left, root, out);

  const auto right_rel = out.feature_idx.size() - root;
  if (right_rel > std::numeric_limits<std::uint16_t>::max())
    throw std::invalid_argument("flatten: tree exceeds 16-bit child offset range");
  out.right_child[slot] = static_cast<std::uint16_t>(right_rel);
  flatten_node(tree, nd.right, root, out);
}

template <typename T>
void append_raw(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof v);
}

template <typename T>
void append_array(std::vector<std::uint8_t>& out, const std::vector<T>& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  out.insert(out.end(), p, p + v.size() * sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T take() {
    T v{};
    if (pos_ + sizeof v > bytes_.size())
      throw std::runtime_error("model file truncated");
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }

  template <typename T>
  std::vector<T> take_array(std::size_t count) {
    std::vector<T> v(count);
    const std::size_t bytes = count * sizeof(T);
    if (pos_ + bytes > bytes_.size())
      throw std::runtime_error("model file truncated");
    std::memcpy(v.data(), bytes_.data() + pos_, bytes);
    pos_ += bytes;
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

void validate_flat(const FlatEnsemble& flat) {
  const std::size_t n_nodes = flat.node_count();
  if (flat.threshold.size() != n_nodes || flat.left_child.size() != n_nodes ||
      flat.right_child.size() != n_nodes)
    throw std::runtime_error("flat model: array length mismatch");
  if (flat.tree_class.size() != flat.tree_roots.size())
    throw std::runtime_error("flat model: tree table length mismatch");

  const std::size_t n_trees = flat.tree_count();
  for (std::size_t t = 0; t < n_trees; ++t) {
    const std::uint32_t root = flat.tree_roots[t];
    const std::uint32_t next =
        t + 1 < n_trees ? flat.tree_roots[t + 1] : static_cast<std::uint32_t>(n_nodes);
    if (root >= next) throw std::runtime_error("flat model: tree roots not increasing");
    if (int(flat.tree_class[t]) >= flat.n_classes)
      throw std::runtime_error("flat model: tree class out of range");
    const std::uint32_t block = next - root;
    for (std::uint32_t rel = 0; rel < block; ++rel) {
      const std::size_t n = root + rel;
      if (flat.feature_idx[n] < 0) continue;
      if (flat.feature_idx[n] >= flat.n_features)
        throw std::runtime_error("flat model: feature index out of range");
      const std::uint16_t l = flat.left_child[n];
      const std::uint16_t r = flat.right_child[n];
      // forward-only children keep every traversal finite
      if (l <= rel || l >= block || r <= rel || r >= block)
        throw std::runtime_error("flat model: child offset out of range");
    }
  }
}

}  // namespace

FlatEnsemble flatten(const TreeEnsemble& ensemble) {
  FlatEnsemble out;
  out.n_classes = ensemble.n_classes;
  out.base_score = ensemble.base_score;
  out.tree_roots.reserve(ensemble.trees.size());
  out.tree_class.reserve(ensemble.trees.size());
  for (const auto& tree : ensemble.trees) {
    if (tree.nodes.empty()) throw std::invalid_argument("flatten: tree without nodes");
    const auto root = static_cast<std::uint32_t>(out.feature_idx.size());
    out.tree_roots.push_back(root);
    out.tree_class.push_back(tree.class_index);
    flatten_node(tree, 0, root, out);
  }
  return out;
}

void accumulate_tree_range(const FlatEnsemble& flat, std::size_t begin, std::size_t end,
                           Eigen::Ref<const Eigen::VectorXf> features,
                           Eigen::Vector3d& margins) {
  const float* x = features.data();
  for (std::size_t t = begin; t < end; ++t) {
    const std::uint32_t root = flat.tree_roots[t];
    std::uint32_t n = root;
    std::int16_t f = flat.feature_idx[n];
    while (f >= 0) {
      n = root + (x[f] < flat.threshold[n] ? flat.left_child[n] : flat.right_child[n]);
      f = flat.feature_idx[n];
    }
    margins[flat.tree_class[t]] += double(flat.threshold[n]);
  }
}

void accumulate_margins(const FlatEnsemble& flat, Eigen::Ref<const Eigen::VectorXf> features,
                        Eigen::Vector3d& margins) {
  accumulate_tree_range(flat, 0, flat.tree_count(), features, margins);
}

Eigen::Vector3d flat_margins(const FlatEnsemble& flat,
                             Eigen::Ref<const Eigen::VectorXf> features) {
  Eigen::Vector3d margins = Eigen::Vector3d::Constant(flat.base_score);
  accumulate_margins(flat, features, margins);
  return margins;
}

Prediction flat_predict(const FlatEnsemble& flat, Eigen::Ref<const Eigen::VectorXf> features) {
  Prediction pred;
  pred.margins = flat_margins(flat, features);
  pred.probabilities = softmax(pred.margins);
  pred.label = argmax_label(pred.probabilities);
  return pred;
}

PartitionPlan partition(const FlatEnsemble& flat, int n_workers) {
  if (n_workers < 1) throw std::invalid_argument("partition: need at least 1 worker");
  PartitionPlan plan;
  plan.n_workers = n_workers;
  plan.source_tree_count = static_cast<std::uint32_t>(flat.tree_count());
  const auto w = static_cast<std::uint32_t>(n_workers);
  plan.padded_tree_count = (plan.source_tree_count + w - 1) / w * w;
  plan.assignments.resize(static_cast<std::size_t>(n_workers));
  for (std::uint32_t t = 0; t < plan.padded_tree_count; ++t)
    plan.assignments[t % w].push_back(t);
  return plan;
}

FootprintReport footprint(const FlatEnsemble& flat) {
  FootprintReport r;
  r.n_trees = flat.tree_count();
  r.n_nodes = flat.node_count();
  r.feature_bytes = 2 * r.n_nodes;
  r.threshold_bytes = 4 * r.n_nodes;
  r.left_bytes = 2 * r.n_nodes;
  r.right_bytes = 2 * r.n_nodes;
  r.roots_bytes = 4 * r.n_trees;
  r.class_bytes = 1 * r.n_trees;
  r.header_bytes = kHeaderBytes;
  return r;
}

std::string footprint_text(const FootprintReport& r) {
  std::ostringstream out;
  out << "trees:          " << r.n_trees << "\n"
      << "nodes:          " << r.n_nodes << "\n"
      << "feature array:  " << r.feature_bytes << " B\n"
      << "threshold/leaf: " << r.threshold_bytes << " B\n"
      << "left children:  " << r.left_bytes << " B\n"
      << "right children: " << r.right_bytes << " B\n"
      << "root table:     " << r.roots_bytes << " B\n"
      << "class table:    " << r.class_bytes << " B\n"
      << "header:         " << r.header_bytes << " B\n"
      << "total:          " << r.total_bytes() << " B ("
      << double(r.total_bytes()) / 1024.0 << " kB)\n";
  return out.str();
}

std::vector<std::uint8_t> serialize_flat(const FlatEnsemble& flat) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + footprint(flat).payload_bytes());
  out.insert(out.end(), kMagic, kMagic + 4);
  append_raw<std::uint8_t>(out, kVersion);
  append_raw<std::uint8_t>(out, static_cast<std::uint8_t>(flat.n_classes));
  append_raw<std::uint8_t>(out, 2);  // feature index width
  append_raw<std::uint8_t>(out, 4);  // threshold/leaf width
  append_raw<std::uint8_t>(out, 2);  // child offset width
  append_raw<std::uint8_t>(out, 1);  // class entry width
  append_raw<std::uint16_t>(out, static_cast<std::uint16_t>(flat.n_features));
  append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(flat.tree_count()));
  append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(flat.node_count()));
  append_raw<float>(out, flat.base_score);
  append_array(out, flat.feature_idx);
  append_array(out, flat.threshold);
  append_array(out, flat.left_child);
  append_array(out, flat.right_child);
  append_array(out, flat.tree_roots);
  append_array(out, flat.tree_class);
  return out;
}

FlatEnsemble deserialize_flat(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes);
  char magic[4];
  for (char& ch : magic) ch = static_cast<char>(in.take<std::uint8_t>());
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("model file: bad magic");
  if (in.take<std::uint8_t>() != kVersion)
    throw std::runtime_error("model file: unsupported version");

  FlatEnsemble flat;
  flat.n_classes = in.take<std::uint8_t>();
  const auto idx_w = in.take<std::uint8_t>();
  const auto val_w = in.take<std::uint8_t>();
  const auto off_w = in.take<std::uint8_t>();
  const auto cls_w = in.take<std::uint8_t>();
  if (idx_w != 2 || val_w != 4 || off_w != 2 || cls_w != 1)
    throw std::runtime_error("model file: unsupported field widths");
  flat.n_features = in.take<std::uint16_t>();
  const auto n_trees = in.take<std::uint32_t>();
  const auto n_nodes = in.take<std::uint32_t>();
  flat.base_score = in.take<float>();
  flat.feature_idx = in.take_array<std::int16_t>(n_nodes);
  flat.threshold = in.take_array<float>(n_nodes);
  flat.left_child = in.take_array<std::uint16_t>(n_nodes);
  flat.right_child = in.take_array<std::uint16_t>(n_nodes);
  flat.tree_roots = in.take_array<std::uint32_t>(n_trees);
  flat.tree_class = in.take_array<std::uint8_t>(n_trees);
  if (in.remaining() != 0)
    throw std::runtime_error("model file: trailing bytes");
  validate_flat(flat);
  return flat;
}

void save_flat(const std::filesystem::path& path, const FlatEnsemble& flat) {
  const auto bytes = serialize_flat(flat);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

FlatEnsemble load_flat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_flat(bytes);
}

std::string dump_flat(const FlatEnsemble& flat) {
  std::ostringstream out;
  out << "flat ensemble: " << flat.tree_count() << " trees, " << flat.node_count()
      << " nodes, " << flat.n_classes << " classes, base score " << flat.base_score
      << "\n";
  const std::size_t n_trees = flat.tree_count();
  for (std::size_t t = 0; t < n_trees; ++t) {
    const std::uint32_t root = flat.tree_roots[t];
    const std::uint32_t next = t + 1 < n_trees ? flat.tree_roots[t + 1]
                                               : static_cast<std::uint32_t>(flat.node_count());
    out << "tree " << t << " class " << int(flat.tree_class[t]) << " nodes "
        << (next - root) << "\n";
    for (std::uint32_t rel = 0; rel < next - root; ++rel) {
      const std::size_t n = root + rel;
      if (flat.feature_idx[n] < 0)
        out << "  [" << rel << "] leaf " << flat.threshold[n] << "\n";
      else
        out << "  [" << rel << "] f" << flat.feature_idx[n] << " < " << flat.threshold[n]
            << " ? " << flat.left_child[n] << " : " << flat.right_child[n] << "\n";
    }
  }
  return out.str();
}

}  // namespace insole
