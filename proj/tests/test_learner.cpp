#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "casf/common.hpp"
#include "casf/learner.hpp"
#include "oracles.hpp"

using namespace casf;
using Catch::Approx;

namespace {

double training_mse(const GbdtModel& m, const std::vector<FeatureVector>& x, const std::vector<double>& y,
                    std::size_t trees) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = m.predict(x[i], trees) - y[i];
    s += e * e;
  }
  return s / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("constant targets are reproduced exactly") {
  std::vector<FeatureVector> x{{0.1, 2}, {0.5, 1}, {0.9, 0}};
  std::vector<double> y{3.25, 3.25, 3.25};
  const auto m = fit_gbdt(x, y, {});
  for (const auto& row : x) CHECK(m.predict(row) == 3.25);
}

TEST_CASE("linear target fits") {
  std::vector<FeatureVector> x;
  std::vector<double> y, pred;
  for (int i = 0; i < 100; ++i) {
    x.push_back({i / 100.0});
    y.push_back(2.0 * i / 100.0);
  }
  const auto m = fit_gbdt(x, y, {});
  for (const auto& row : x) pred.push_back(m.predict(row));
  CHECK(oracle::r_squared(y, pred) >= 0.99);
}

TEST_CASE("training error never increases across boosting rounds") {
  Rng rng(11);
  std::vector<FeatureVector> x;
  std::vector<double> y;
  for (int i = 0; i < 120; ++i) {
    const double a = rng.unit(), b = rng.unit();
    x.push_back({a, b, std::floor(a * 4)});
    y.push_back(std::sin(6 * a) + b * b + 0.2 * rng.normal());
  }
  const auto m = fit_gbdt(x, y, {});
  double prev = training_mse(m, x, y, 0);
  for (std::size_t t = 1; t <= m.trees.size(); ++t) {
    const double cur = training_mse(m, x, y, t);
    CHECK(cur <= prev * (1 + 1e-12));
    prev = cur;
  }
}

TEST_CASE("trees respect depth and leaf-size limits") {
  Rng rng(5);
  std::vector<FeatureVector> x;
  std::vector<double> y;
  for (int i = 0; i < 60; ++i) {
    x.push_back({rng.unit()});
    y.push_back(rng.normal());
  }
  GbdtParams hp;
  hp.max_depth = 2;
  hp.min_samples_leaf = 7;
  hp.n_trees = 10;
  const auto m = fit_gbdt(x, y, hp);
  for (const auto& t : m.trees) CHECK(t.depth() <= 2);
  // every leaf must hold at least 7 training rows
  for (const auto& t : m.trees) {
    std::map<const TreeNode*, int> counts;
    for (const auto& row : x) {
      const TreeNode* n = &t.nodes[0];
      while (!n->is_leaf()) n = &t.nodes[static_cast<std::size_t>(row[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right)];
      ++counts[n];
    }
    for (const auto& [leaf, c] : counts) CHECK(c >= 7);
  }
}

TEST_CASE("split ties go to the lowest feature index") {
  // Both features separate the targets identically.
  std::vector<FeatureVector> x{{0, 0}, {0, 0}, {1, 1}, {1, 1}};
  std::vector<double> y{0, 0, 1, 1};
  GbdtParams hp;
  hp.n_trees = 1;
  const auto m = fit_gbdt(x, y, hp);
  REQUIRE_FALSE(m.trees[0].nodes[0].is_leaf());
  CHECK(m.trees[0].nodes[0].feature == 0);
  CHECK(m.trees[0].nodes[0].threshold == 0.5);
}

TEST_CASE("fitting is deterministic and serializes losslessly") {
  Rng rng(9);
  std::vector<FeatureVector> x;
  std::vector<double> y;
  for (int i = 0; i < 50; ++i) {
    x.push_back({rng.unit(), rng.unit()});
    y.push_back(rng.normal());
  }
  const auto a = fit_gbdt(x, y, {});
  const auto b = fit_gbdt(x, y, {});
  CHECK(a == b);
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(a).dump()));
  CHECK(back == a);
  for (const auto& row : x) CHECK(back.predict(row) == a.predict(row));
}

TEST_CASE("fit and predict reject malformed input") {
  CHECK_THROWS(fit_gbdt({}, {}, {}));
  CHECK_THROWS(fit_gbdt({{1.0}, {2.0}}, {1.0}, {}));
  CHECK_THROWS(fit_gbdt({{1.0}, {2.0, 3.0}}, {1.0, 2.0}, {}));
  const auto m = fit_gbdt({{1.0}, {2.0}}, {1.0, 2.0}, {});
  CHECK_THROWS(m.predict(FeatureVector{1.0, 2.0}));
}

TEST_CASE("ranking is descending by score with id tie-break") {
  const auto r = rank_by_score({{"b", 0.5}, {"a", 0.5}, {"c", 0.9}, {"d", 0.1}});
  CHECK(r.order == std::vector<std::string>{"c", "a", "b", "d"});
  CHECK(r.ranks.at("c") == 0);
  CHECK(r.ranks.at("d") == 3);
}

TEST_CASE("targets sum per-aspect z-scores over systems") {
  ScoreTable t1{{"s1", {{"q", 1}, {"f", 5}}}, {"s2", {{"q", 3}, {"f", 5}}}};
  ScoreTable t2{{"s1", {{"q", 2}, {"f", 5}}}, {"s2", {{"q", 6}, {"f", 5}}}};
  const auto targets = build_targets({{"x", t1}, {"y", t2}}, {"f", "q"}, {"s1", "s2"});
  // q values 1,3,2,6: mean 3, population sd sqrt(3.5); f is constant and contributes nothing.
  const double sd = std::sqrt(3.5);
  CHECK(targets.at("x") == Approx((1 - 3) / sd + (3 - 3) / sd));
  CHECK(targets.at("y") == Approx((2 - 3) / sd + (6 - 3) / sd));
  ScoreTable partial{{"s1", {{"q", 1}}}};
  CHECK_THROWS(build_targets({{"z", partial}}, {"f", "q"}, {"s1", "s2"}));
}
