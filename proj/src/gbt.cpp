#include "insole/gbt.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace insole {

namespace {

using json = nlohmann::ordered_json;

// Column-major feature matrix plus per-feature sort order, built once.
struct TrainMatrix {
  Eigen::MatrixXf x;                            // n_samples x n_features
  std::vector<int> y;                           // class index per sample
  std::vector<std::vector<int>> sorted_order;   // per feature, sample indices by value

  int n() const { return static_cast<int>(x.rows()); }
  int features() const { return static_cast<int>(x.cols()); }
};

TrainMatrix build_matrix(const std::vector<SuperSample>& samples) {
  TrainMatrix m;
  const auto n = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index dim = samples[0].features.size();
  m.x.resize(n, dim);
  m.y.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (s.features.size() != dim)
      throw std::invalid_argument("train: inconsistent feature dimensions");
    if (!s.features.allFinite())
      throw std::invalid_argument("train: non-finite feature value");
    m.x.row(i) = s.features.transpose();
    m.y[static_cast<std::size_t>(i)] = static_cast<int>(s.label);
  }

  m.sorted_order.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index f = 0; f < dim; ++f) {
    auto& order = m.sorted_order[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const auto col = m.x.col(f);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (col[a] != col[b]) return col[a] < col[b];
      return a < b;  // stable, deterministic
    });
  }
  return m;
}

struct SplitChoice {
  int feature = -1;
  float threshold = 0.0f;
  double gain = 0.0;
};

double leaf_objective(double g, double h, double lambda) {
  return g * g / (h + lambda);
}

// Recursive exact-greedy builder for one tree on fixed gradient/hessian
// vectors. Nodes are emitted in preorder.
class TreeBuilder {
 public:
  TreeBuilder(const TrainMatrix& m, const Eigen::VectorXd& grad,
              const Eigen::VectorXd& hess, const TrainParams& params)
      : m_(m), grad_(grad), hess_(hess), params_(params),
        in_node_(static_cast<std::size_t>(m.n()), 0) {}

  Tree build(std::uint8_t class_index) {
    Tree tree;
    tree.class_index = class_index;
    std::vector<int> members(static_cast<std::size_t>(m_.n()));
    std::iota(members.begin(), members.end(), 0);
    double g = 0.0, h = 0.0;
    for (int i : members) { g += grad_[i]; h += hess_[i]; }
    grow(tree, members, 0, g, h);
    return tree;
  }

 private:
  int grow(Tree& tree, const std::vector<int>& members, int depth, double g, double h) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    SplitChoice best{};
    if (depth < params_.max_depth && members.size() >= 2)
      best = find_split(members, g, h);

    if (best.feature < 0 || best.gain <= 0.0) {
      tree.nodes[static_cast<std::size_t>(idx)].feature = -1;
      tree.nodes[static_cast<std::size_t>(idx)].value =
          static_cast<float>(-g / (h + params_.lambda) * params_.learning_rate);
      return idx;
    }

    std::vector<int> left, right;
    double gl = 0.0, hl = 0.0;
    for (int i : members) {
      if (m_.x(i, best.feature) < best.threshold) {
        left.push_back(i);
        gl += grad_[i];
        hl += hess_[i];
      } else {
        right.push_back(i);
      }
    }

    tree.nodes[static_cast<std::size_t>(idx)].feature =
        static_cast<std::int16_t>(best.feature);
    tree.nodes[static_cast<std::size_t>(idx)].value = best.threshold;
    const int l = grow(tree, left, depth + 1, gl, hl);
    const int r = grow(tree, right, depth + 1, g - gl, h - hl);
    tree.nodes[static_cast<std::size_t>(idx)].left = l;
    tree.nodes[static_cast<std::size_t>(idx)].right = r;
    return idx;
  }

  SplitChoice find_split(const std::vector<int>& members, double g, double h) {
    for (int i : members) in_node_[static_cast<std::size_t>(i)] = 1;

    SplitChoice best{};
    const double parent_obj = leaf_objective(g, h, params_.lambda);
    std::vector<int>& run = scratch_;

    for (int f = 0; f < m_.features(); ++f) {
      // Walk the presorted column, keeping this node's members in order.
      run.clear();
      for (int i : m_.sorted_order[static_cast<std::size_t>(f)])
        if (in_node_[static_cast<std::size_t>(i)]) run.push_back(i);

      double gl = 0.0, hl = 0.0;
      for (std::size_t k = 0; k + 1 < run.size(); ++k) {
        gl += grad_[run[k]];
        hl += hess_[run[k]];
        const float a = m_.x(run[k], f);
        const float b = m_.x(run[k + 1], f);
        if (a == b) continue;  // split only between distinct values
        const double hr = h - hl;
        if (hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
        const double gain = 0.5 * (leaf_objective(gl, hl, params_.lambda) +
                                   leaf_objective(g - gl, hr, params_.lambda) -
                                   parent_obj) -
                            params_.gamma;
        if (gain > best.gain) {
          float mid = 0.5f * (a + b);
          if (!(mid > a)) mid = b;  // guard against midpoint rounding onto a
          best = {f, mid, gain};
        }
      }
    }

    for (int i : members) in_node_[static_cast<std::size_t>(i)] = 0;
    return best;
  }

  const TrainMatrix& m_;
  const Eigen::VectorXd& grad_;
  const Eigen::VectorXd& hess_;
  const TrainParams& params_;
  std::vector<std::uint8_t> in_node_;
  std::vector<int> scratch_;
};

float eval_tree(const Tree& tree, Eigen::Ref<const Eigen::VectorXf> features) {
  int node = 0;
  while (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    node = features[nd.feature] < nd.value ? nd.left : nd.right;
  }
  return tree.nodes[static_cast<std::size_t>(node)].value;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& margins) {
  Eigen::MatrixXd p = margins;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::RowVectorXd row = p.row(i);
    row.array() -= row.maxCoeff();
    Eigen::RowVectorXd e = row.array().exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

double mean_logloss_from_margins(const Eigen::MatrixXd& margins, const std::vector<int>& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < margins.rows(); ++i) {
    Eigen::RowVectorXd row = margins.row(i);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    total += lse - row[y[static_cast<std::size_t>(i)]];
  }
  return total / double(margins.rows());
}

}  // namespace

TrainParams train_params_from_config(const KeyValueConfig& cfg) {
  TrainParams p;
  p.n_rounds = cfg.get_int("n_rounds", p.n_rounds);
  p.max_depth = cfg.get_int("max_depth", p.max_depth);
  p.learning_rate = cfg.get_double("learning_rate", p.learning_rate);
  p.lambda = cfg.get_double("lambda", p.lambda);
  p.gamma = cfg.get_double("gamma", p.gamma);
  p.min_child_weight = cfg.get_double("min_child_weight", p.min_child_weight);
  p.seed = cfg.get_uint64("seed", p.seed);
  return p;
}

TreeEnsemble train(const std::vector<SuperSample>& train_set, const TrainParams& params,
                   TrainLog* log) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (params.n_rounds < 1 || params.max_depth < 1)
    throw std::invalid_argument("train: n_rounds and max_depth must be >= 1");

  std::array<int, kNumClasses> counts{};
  for (const auto& s : train_set) counts[static_cast<int>(s.label)]++;
  for (int c = 0; c < kNumClasses; ++c)
    if (counts[c] == 0)
      throw std::invalid_argument(std::string("train: class '") +
                                  std::string(label_name(static_cast<ClassLabel>(c))) +
                                  "' missing from training set");

  const TrainMatrix m = build_matrix(train_set);
  const int n = m.n();

  TreeEnsemble ensemble;
  ensemble.base_score = 0.0f;
  ensemble.learning_rate = static_cast<float>(params.learning_rate);
  ensemble.trees.reserve(static_cast<std::size_t>(params.n_rounds) * kNumClasses);

  Eigen::MatrixXd margins = Eigen::MatrixXd::Constant(n, kNumClasses, ensemble.base_score);
  Eigen::VectorXd grad(n), hess(n);

  for (int round = 0; round < params.n_rounds; ++round) {
    const Eigen::MatrixXd p = softmax_rows(margins);
    for (int c = 0; c < kNumClasses; ++c) {
      for (int i = 0; i < n; ++i) {
        const double pic = p(i, c);
        grad[i] = pic - (m.y[static_cast<std::size_t>(i)] == c ? 1.0 : 0.0);
        hess[i] = pic * (1.0 - pic);
      }
      TreeBuilder builder(m, grad, hess, params);
      Tree tree = builder.build(static_cast<std::uint8_t>(c));
      for (int i = 0; i < n; ++i)
        margins(i, c) += double(eval_tree(tree, m.x.row(i).transpose()));
      ensemble.trees.push_back(std::move(tree));
    }
    if (log) log->round_logloss.push_back(mean_logloss_from_margins(margins, m.y));
  }
  return ensemble;
}

Eigen::Vector3d predict_margins(const TreeEnsemble& ensemble,
                                Eigen::Ref<const Eigen::VectorXf> features) {
  Eigen::Vector3d margins = Eigen::Vector3d::Constant(ensemble.base_score);
  for (const auto& tree : ensemble.trees)
    margins[tree.class_index] += double(eval_tree(tree, features));
  return margins;
}

Eigen::Vector3d softmax(const Eigen::Vector3d& margins) {
  Eigen::Vector3d shifted = margins.array() - margins.maxCoeff();
  Eigen::Vector3d e = shifted.array().exp();
  return e / e.sum();
}

ClassLabel argmax_label(const Eigen::Vector3d& probabilities) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (probabilities[c] > probabilities[best]) best = c;
  return static_cast<ClassLabel>(best);
}

Prediction predict_class(const TreeEnsemble& ensemble,
                         Eigen::Ref<const Eigen::VectorXf> features) {
  Prediction pred;
  pred.margins = predict_margins(ensemble, features);
  pred.probabilities = softmax(pred.margins);
  pred.label = argmax_label(pred.probabilities);
  return pred;
}

double mean_logloss(const TreeEnsemble& ensemble, const std::vector<SuperSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("mean_logloss: empty sample set");
  double total = 0.0;
  for (const auto& s : samples) {
    const Eigen::Vector3d margins = predict_margins(ensemble, s.features);
    const double mx = margins.maxCoeff();
    const double lse = mx + std::log((margins.array() - mx).exp().sum());
    total += lse - margins[static_cast<int>(s.label)];
  }
  return total / double(samples.size());
}

std::string ensemble_to_json(const TreeEnsemble& ensemble) {
  json doc;
  doc["format"] = "insole-gbt";
  doc["version"] = 1;
  doc["n_classes"] = ensemble.n_classes;
  doc["base_score"] = ensemble.base_score;
  doc["learning_rate"] = ensemble.learning_rate;
  doc["feature_order"] = "channel-major: hallux block, pinky block, heel block";
  json trees = json::array();
  for (const auto& tree : ensemble.trees) {
    json t;
    t["class"] = tree.class_index;
    json nodes = json::array();
    for (const auto& nd : tree.nodes) {
      if (nd.is_leaf()) {
        nodes.push_back({{"leaf", nd.value}});
      } else {
        nodes.push_back({{"feature", nd.feature},
                         {"threshold", nd.value},
                         {"left", nd.left},
                         {"right", nd.right}});
      }
    }
    t["nodes"] = std::move(nodes);
    trees.push_back(std::move(t));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(1);
}

TreeEnsemble ensemble_from_json(const std::string& text) {
  const json doc = json::parse(text);
  if (doc.value("format", "") != "insole-gbt")
    throw std::runtime_error("ensemble: unrecognized format tag");
  TreeEnsemble ensemble;
  ensemble.n_classes = doc.at("n_classes").get<int>();
  if (ensemble.n_classes != kNumClasses)
    throw std::runtime_error("ensemble: unsupported class count");
  ensemble.base_score = doc.at("base_score").get<float>();
  ensemble.learning_rate = doc.at("learning_rate").get<float>();
  for (const auto& t : doc.at("trees")) {
    Tree tree;
    tree.class_index = t.at("class").get<std::uint8_t>();
    if (tree.class_index >= kNumClasses)
      throw std::runtime_error("ensemble: tree class out of range");
    for (const auto& nd : t.at("nodes")) {
      TreeNode node;
      if (nd.contains("leaf")) {
        node.value = nd.at("leaf").get<float>();
      } else {
        node.feature = nd.at("feature").get<std::int16_t>();
        node.value = nd.at("threshold").get<float>();
        node.left = nd.at("left").get<std::int32_t>();
        node.right = nd.at("right").get<std::int32_t>();
        if (node.feature < 0) throw std::runtime_error("ensemble: bad feature index");
      }
      tree.nodes.push_back(node);
    }
    const auto count = static_cast<std::int32_t>(tree.nodes.size());
    for (const auto& nd : tree.nodes) {
      if (nd.is_leaf()) continue;
      if (nd.left < 0 || nd.left >= count || nd.right < 0 || nd.right >= count)
        throw std::runtime_error("ensemble: child index out of range");
    }
    ensemble.trees.push_back(std::move(tree));
  }
  return ensemble;
}

void save_ensemble(const std::filesystem::path& path, const TreeEnsemble& ensemble) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << ensemble_to_json(ensemble) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

TreeEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ensemble_from_json(text);
}

}  // namespace insole
