#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "casf/common.hpp"
#include "casf/dataset.hpp"
#include "casf/text_metrics.hpp"

namespace casf {

/// Metric scores of one sample, system-major and metric-minor.
using FeatureVector = std::vector<double>;

struct GbdtParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 3;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 1;

  bool operator==(const GbdtParams&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Binary regression tree stored as a flat node array; node 0 is the root.
/// Rows with x[feature] <= threshold go left.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const TreeNode& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
  }

  std::size_t depth(std::size_t node = 0) const {
    const TreeNode& n = nodes[node];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth(static_cast<std::size_t>(n.left)), depth(static_cast<std::size_t>(n.right)));
  }

  bool operator==(const RegressionTree&) const = default;
};

struct GbdtModel {
  double initial_estimate = 0.0;
  double learning_rate = 0.1;
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;

  /// Prediction using only the first `tree_limit` trees.
  double predict(std::span<const double> x, std::size_t tree_limit) const {
    if (x.size() != n_features) {
      throw Error("feature width " + std::to_string(x.size()) + " does not match model width " +
                  std::to_string(n_features));
    }
    double y = initial_estimate;
    const std::size_t limit = std::min(tree_limit, trees.size());
    for (std::size_t t = 0; t < limit; ++t) y += learning_rate * trees[t].predict(x);
    return y;
  }
  double predict(std::span<const double> x) const { return predict(x, trees.size()); }

  bool operator==(const GbdtModel&) const = default;
};

namespace detail {

// Mean computed as v0 + sum(v - v0)/n: exact when all values are equal.
inline double stable_mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double base = v.front();
  double acc = 0.0;
  for (double x : v) acc += x - base;
  return base + acc / static_cast<double>(v.size());
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<FeatureVector>& x, const std::vector<double>& residual, const GbdtParams& hp)
      : x_(x), r_(residual), hp_(hp) {}

  RegressionTree build() {
    std::vector<std::size_t> rows(x_.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (auto r : rows) vals.push_back(r_[r]);
    tree_.nodes[static_cast<std::size_t>(id)].value = stable_mean(vals);

    if (depth >= hp_.max_depth || rows.size() < 2 * std::max<std::size_t>(hp_.min_samples_leaf, 1)) return id;
    const Split best = find_split(rows);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (x_[r][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(r);
    }
    const int l = grow(left, depth + 1);
    const int rgt = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }

  // Exact greedy search. Features and thresholds are scanned in ascending
  // order and only a strictly larger gain replaces the incumbent, so ties go
  // to the lowest feature index and then the lowest threshold.
  Split find_split(const std::vector<std::size_t>& rows) const {
    const std::size_t n = rows.size();
    const std::size_t min_leaf = std::max<std::size_t>(hp_.min_samples_leaf, 1);
    double total = 0.0;
    for (auto r : rows) total += r_[r];
    const double parent = total * total / static_cast<double>(n);

    Split best;
    std::vector<std::size_t> order(rows);
    const std::size_t width = x_.front().size();
    for (std::size_t f = 0; f < width; ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = x_[a][f], xb = x_[b][f];
        return xa < xb || (xa == xb && a < b);
      });
      double left_sum = 0.0;
      for (std::size_t k = 1; k < n; ++k) {
        left_sum += r_[order[k - 1]];
        const double lo = x_[order[k - 1]][f];
        const double hi = x_[order[k]][f];
        if (k < min_leaf || n - k < min_leaf || !(lo < hi)) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(k) +
                            right_sum * right_sum / static_cast<double>(n - k) - parent;
        if (gain > best.gain) {
          double thr = lo + (hi - lo) / 2.0;
          if (!(thr < hi)) thr = lo;
          best = {static_cast<int>(f), thr, gain};
        }
      }
    }
    return best;
  }

  const std::vector<FeatureVector>& x_;
  const std::vector<double>& r_;
  const GbdtParams& hp_;
  RegressionTree tree_;
};

}  // namespace detail

/// Least-squares gradient boosting. No row or feature subsampling, so the
/// model is a deterministic function of its inputs. Boosting stops early
/// once a round finds no split (the tree would be a constant residual mean).
inline GbdtModel fit_gbdt(const std::vector<FeatureVector>& features, const std::vector<double>& targets,
                          const GbdtParams& hp = {}) {
  if (features.empty()) throw Error("fit_gbdt: empty training set");
  if (features.size() != targets.size()) throw Error("fit_gbdt: features and targets differ in length");
  const std::size_t width = features.front().size();
  for (const auto& f : features) {
    if (f.size() != width) throw Error("fit_gbdt: inconsistent feature widths");
  }
  if (hp.learning_rate <= 0.0) throw Error("fit_gbdt: learning_rate must be positive");

  GbdtModel model;
  model.learning_rate = hp.learning_rate;
  model.n_features = width;
  model.initial_estimate = detail::stable_mean(targets);

  std::vector<double> pred(targets.size(), model.initial_estimate);
  std::vector<double> residual(targets.size());
  for (std::size_t t = 0; t < hp.n_trees; ++t) {
    for (std::size_t i = 0; i < targets.size(); ++i) residual[i] = targets[i] - pred[i];
    RegressionTree tree = detail::TreeBuilder(features, residual, hp).build();
    if (tree.nodes.size() == 1) break;
    for (std::size_t i = 0; i < targets.size(); ++i) pred[i] += hp.learning_rate * tree.predict(features[i]);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

/// Predicted quality s(i) and induced rank p(i); rank 0 is the best sample.
struct QualityRanking {
  std::vector<std::string> order;  // sample ids, best first
  std::map<std::string, double> scores;
  std::map<std::string, std::size_t> ranks;

  std::size_t size() const { return order.size(); }
  bool operator==(const QualityRanking&) const = default;
};

/// Ranks descending by score; equal scores fall back to ascending sample_id.
inline QualityRanking rank_by_score(std::vector<std::pair<std::string, double>> scored) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.second > b.second || (a.second == b.second && a.first < b.first);
  });
  QualityRanking q;
  for (std::size_t r = 0; r < scored.size(); ++r) {
    const auto& [id, s] = scored[r];
    if (!q.scores.emplace(id, s).second) throw Error("sample '" + id + "' ranked twice");
    q.ranks.emplace(id, r);
    q.order.push_back(id);
  }
  return q;
}

inline FeatureVector build_features(const MetricMatrix& mm, std::size_t sample_index) {
  return mm.row(sample_index);
}

/// Regression targets: every aspect is z-scored over all (sample, system)
/// cells of the annotated pool (population sd; zero-variance aspects give 0),
/// then summed over systems and aspects per sample.
inline std::map<std::string, double> build_targets(const std::vector<std::pair<std::string, ScoreTable>>& annotated,
                                                   const std::vector<std::string>& aspects,
                                                   const std::vector<std::string>& systems) {
  auto cell = [&](const std::pair<std::string, ScoreTable>& entry, const std::string& sys,
                  const std::string& aspect) -> double {
    auto it = entry.second.find(sys);
    if (it != entry.second.end()) {
      auto jt = it->second.find(aspect);
      if (jt != it->second.end()) return jt->second;
    }
    throw Error("sample '" + entry.first + "' lacks a score for system '" + sys + "' aspect '" + aspect + "'");
  };

  std::map<std::string, double> targets;
  for (const auto& entry : annotated) targets[entry.first] = 0.0;
  if (annotated.empty()) return targets;

  std::vector<double> values;
  for (const auto& aspect : aspects) {
    values.clear();
    for (const auto& entry : annotated) {
      for (const auto& sys : systems) values.push_back(cell(entry, sys, aspect));
    }
    const double mean = detail::stable_mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    if (sd == 0.0) continue;
    for (const auto& entry : annotated) {
      double& t = targets[entry.first];
      for (const auto& sys : systems) t += (cell(entry, sys, aspect) - mean) / sd;
    }
  }
  return targets;
}

inline QualityRanking predict_quality(const GbdtModel& model,
                                      const std::vector<std::pair<std::string, FeatureVector>>& features) {
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(features.size());
  for (const auto& [id, x] : features) scored.emplace_back(id, model.predict(x));
  return rank_by_score(std::move(scored));
}

/// Quality from a single automatic metric: its mean over systems.
inline QualityRanking preliminary_quality(const MetricMatrix& mm, const std::vector<std::string>& sample_ids,
                                          const std::string& metric) {
  const std::size_t m = mm.metric_index(metric);
  if (sample_ids.size() != mm.samples()) throw Error("preliminary_quality: sample id list does not match matrix");
  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t i = 0; i < mm.samples(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < mm.systems(); ++j) sum += mm.at(i, j, m);
    scored.emplace_back(sample_ids[i], sum / static_cast<double>(mm.systems()));
  }
  return rank_by_score(std::move(scored));
}

// ---- serialization --------------------------------------------------------

namespace detail {

inline nlohmann::json node_to_json(const RegressionTree& t, std::size_t i) {
  const TreeNode& n = t.nodes[i];
  if (n.is_leaf()) return {{"leaf", n.value}};
  return {{"split", {{"feature", n.feature}, {"threshold", n.threshold}}},
          {"value", n.value},
          {"left", node_to_json(t, static_cast<std::size_t>(n.left))},
          {"right", node_to_json(t, static_cast<std::size_t>(n.right))}};
}

inline int node_from_json(RegressionTree& t, const nlohmann::json& j) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  if (j.contains("leaf")) {
    t.nodes.back().value = j.at("leaf").get<double>();
    return id;
  }
  TreeNode n;
  n.feature = j.at("split").at("feature").get<int>();
  n.threshold = j.at("split").at("threshold").get<double>();
  n.value = j.value("value", 0.0);
  n.left = node_from_json(t, j.at("left"));
  n.right = node_from_json(t, j.at("right"));
  t.nodes[static_cast<std::size_t>(id)] = n;
  return id;
}

}  // namespace detail

inline nlohmann::json model_to_json(const GbdtModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(detail::node_to_json(t, 0));
  return {{"initial_estimate", m.initial_estimate},
          {"learning_rate", m.learning_rate},
          {"n_features", m.n_features},
          {"trees", std::move(trees)}};
}

inline GbdtModel model_from_json(const nlohmann::json& j) {
  GbdtModel m;
  m.initial_estimate = j.at("initial_estimate").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.n_features = j.at("n_features").get<std::size_t>();
  for (const auto& tj : j.at("trees")) {
    RegressionTree t;
    detail::node_from_json(t, tj);
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace casf
