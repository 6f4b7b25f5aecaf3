#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "casf/evaluation.hpp"
#include "casf/synthetic.hpp"
#include "oracles.hpp"

using namespace casf;
using Catch::Approx;

namespace {

std::vector<double> tied_vector(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(rng() % 4) * 0.25;
  return v;
}

Dataset tiny(std::size_t n = 60, std::uint64_t seed = 21) {
  SyntheticParams p;
  p.samples = n;
  return make_synthetic(p, seed);
}

}  // namespace

TEST_CASE("kendall tau-b on hand-checked vectors") {
  CHECK(*kendall_tau_b(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 1.0);
  CHECK(*kendall_tau_b(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == -1.0);
  // (1,2,2) vs (1,2,3): 2 concordant, 0 discordant, one x-tie
  CHECK(*kendall_tau_b(std::vector<double>{1, 2, 2}, std::vector<double>{1, 2, 3}) == Approx(2.0 / std::sqrt(2.0 * 3.0)));
  CHECK_FALSE(kendall_tau_b(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}).has_value());
  CHECK_FALSE(kendall_tau_b(std::vector<double>{1, 2, 3}, std::vector<double>{5, 5, 5}).has_value());
  CHECK_THROWS(kendall_tau_b(std::vector<double>{1}, std::vector<double>{1}));
  CHECK_THROWS(kendall_tau_b(std::vector<double>{1, 2}, std::vector<double>{1}));
}

TEST_CASE("kendall tau-b matches pairwise enumeration with ties") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + rng() % 10;
    const auto x = tied_vector(rng, n), y = tied_vector(rng, n);
    const auto fast = kendall_tau_b(x, y);
    const auto slow = oracle::kendall_tau_b(x, y);
    REQUIRE(fast.has_value() == slow.has_value());
    if (fast) CHECK(std::abs(*fast - *slow) <= 1e-12);
    if (fast) CHECK(*kendall_tau_b(y, x) == *fast);
  }
}

TEST_CASE("wilcoxon exact p-values") {
  for (std::size_t n = 1; n <= 12; ++n) {
    std::vector<double> x(n), y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
    const auto r = wilcoxon_signed_rank(x, y);
    CHECK(r.exact);
    CHECK(r.p_value == std::min(1.0, 2.0 * std::ldexp(1.0, -static_cast<int>(n))));
  }
  const std::vector<double> same{1, 2, 3};
  CHECK(wilcoxon_signed_rank(same, same).p_value == 1.0);
  CHECK(wilcoxon_signed_rank(same, same).n == 0);
}

TEST_CASE("wilcoxon agrees with sign enumeration including tied magnitudes") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 14;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % 5);
      y[i] = static_cast<double>(rng() % 5);
    }
    CHECK(wilcoxon_signed_rank(x, y).p_value == Approx(oracle::wilcoxon_p(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon normal approximation above the exact limit") {
  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) {
    x.push_back(i % 3 == 0 ? -(i + 1.0) : i + 1.0);
    y.push_back(0.0);
  }
  const auto r = wilcoxon_signed_rank(x, y);
  CHECK_FALSE(r.exact);
  CHECK(r.w_plus + r.w_minus == 30.0 * 31.0 / 2.0);
  // closed-form normal approximation with continuity correction; magnitudes are distinct so no tie term
  const double mean = 30.0 * 31.0 / 4.0, sd = std::sqrt(30.0 * 31.0 * 61.0 / 24.0);
  CHECK(r.p_value == Approx(std::erfc((std::abs(r.w_plus - mean) - 0.5) / sd / std::sqrt(2.0))));
}

TEST_CASE("system means and top hit") {
  const Dataset d = tiny();
  const auto all = d.samples();
  std::vector<std::string> ids;
  for (const auto& s : all) ids.push_back(s.sample_id);
  const auto m = system_means(d, ids, "aspect1");
  double manual = 0;
  for (const auto& s : all) manual += s.human_scores->at("sys1").at("aspect1");
  CHECK(m.means.at("sys1") == Approx(manual / static_cast<double>(all.size())));
  CHECK(top_ranked_hit(m, m));
  SystemMeans other{"aspect1", m.means};
  for (auto& [sys, v] : other.means) v = -v;
  CHECK_FALSE(top_ranked_hit(other, m));
  SystemMeans tied{"aspect1", {}};
  for (const auto& [sys, v] : m.means) tied.means[sys] = 0.0;
  CHECK(top_ranked_hit(tied, m));
  CHECK(*subset_tau(d, ids, "aspect1") == 1.0);
}

TEST_CASE("random baseline is seeded and sized") {
  const Dataset d = tiny();
  const auto a = random_subset(d, 0.5, 3), b = random_subset(d, 0.5, 3), c = random_subset(d, 0.5, 4);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == 30);
  CHECK(std::set<std::string>(a.begin(), a.end()).size() == 30);
  const auto rb = random_baseline(d, 0.5, {1, 2, 3});
  REQUIRE(rb.runs.size() == 3);
  for (std::size_t k = 0; k < d.aspects().size(); ++k) {
    std::vector<std::optional<double>> col;
    for (const auto& r : rb.runs) col.push_back(r.taus[k]);
    CHECK(rb.mean_taus[k] == mean_defined(col));
  }
}

TEST_CASE("heuristic baseline draws tails and middle by length") {
  const Dataset d = tiny(100, 4);
  const auto h = heuristic_baseline(d, 0.5, 7);
  CHECK(h.subset.size() == 50);
  CHECK_FALSE(h.fell_back);
  CHECK(std::set<std::string>(h.subset.begin(), h.subset.end()).size() == 50);
  // 5 from each length decile
  std::vector<std::pair<double, std::string>> by_len;
  for (const auto& s : d.samples()) {
    double t = 0;
    for (const auto& [sys, text] : s.outputs) t += static_cast<double>(tokenize(text).size());
    by_len.emplace_back(t / static_cast<double>(s.outputs.size()), s.sample_id);
  }
  std::stable_sort(by_len.begin(), by_len.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::set<std::string> chosen(h.subset.begin(), h.subset.end());
  std::size_t low = 0, high = 0;
  for (std::size_t i = 0; i < 10; ++i) low += chosen.count(by_len[i].second);
  for (std::size_t i = 90; i < 100; ++i) high += chosen.count(by_len[i].second);
  CHECK(low == 5);
  CHECK(high == 5);
  CHECK(heuristic_baseline(tiny(8, 4), 0.5, 1).fell_back);  // decile 0 < tail 1
}

TEST_CASE("ablations produce budget-sized subsets") {
  const Dataset d = tiny(80, 9);
  const Session session(d, EngineConfig{});
  for (auto mode : {AblationMode::eight_metric, AblationMode::single_metric, AblationMode::online}) {
    const auto sub = ablation_subset(session, mode);
    CHECK(sub.size() == 40);
    CHECK(std::set<std::string>(sub.begin(), sub.end()).size() == 40);
  }
  EngineConfig tau_one;
  tau_one.controller.tau = 1.0;
  CHECK(ablation_subset(session, AblationMode::online) == run_simulation(Session(d, tau_one)).subset);
}

TEST_CASE("report layout, aggregates and rendering") {
  const Dataset d = tiny();
  const auto r1 = random_subset(d, 0.5, 1), r2 = random_subset(d, 0.5, 2);
  const Session session(d, EngineConfig{});
  const auto casf = run_simulation(session).subset;
  ReportOptions opt;
  opt.dataset = "tiny";
  opt.config_digest = "abc";
  const auto rep = build_report(d, {{"R", {r1, r2}, {1, 2}}, {"CASF", {casf}, {}}}, opt);
  CHECK(rep.columns == std::vector<std::string>{"R1", "R2", "R Mean", "CASF"});
  REQUIRE(rep.rows.size() == 2 * 4);
  const auto t1 = subset_tau(d, r1, "aspect1"), t2 = subset_tau(d, r2, "aspect1");
  CHECK(rep.rows[0].tau == t1);
  CHECK(rep.rows[0].seed == 1u);
  CHECK(rep.rows[2].tau == mean_defined({t1, t2}));
  CHECK(rep.rows[2].is_mean);
  REQUIRE(rep.aggregates.size() == 4);
  CHECK(rep.aggregates[3].significance_retention == Approx(significance_retention(d, casf, 0.05)));
  const auto j = report_to_json(rep);
  CHECK(j["columns"].size() == 4);
  CHECK(j["rows"][2].contains("top_hit_rate"));
  const auto md = report_to_markdown(rep);
  CHECK(md.find("| Aspect | R1 | R2 | R Mean | CASF |") != std::string::npos);
  CHECK(md.find("**Overall**") != std::string::npos);
}

TEST_CASE("undefined tau is marked and excluded from means") {
  // Every system gets the same score on the first half of the samples.
  std::vector<Sample> samples = tiny(20, 2).samples();
  std::vector<std::string> flat;
  for (std::size_t i = 0; i < 10; ++i) {
    for (auto& [sys, per_aspect] : *samples[i].human_scores) {
      for (auto& [aspect, v] : per_aspect) v = 3.0;
    }
    flat.push_back(samples[i].sample_id);
  }
  const Dataset d = Dataset::make(samples, {});
  CHECK_FALSE(subset_tau(d, flat, "aspect1").has_value());
  std::vector<std::string> all;
  for (const auto& s : samples) all.push_back(s.sample_id);
  ReportOptions opt;
  opt.significance = false;
  const auto rep = build_report(d, {{"X", {flat}, {}}, {"Y", {all}, {}}}, opt);
  CHECK(rep.aggregates[0].undefined == 2);
  CHECK_FALSE(rep.aggregates[0].mean_tau.has_value());
  CHECK(rep.aggregates[1].mean_tau == 1.0);
  CHECK(report_to_json(rep)["rows"][0]["tau"] == "undefined");
  CHECK(report_to_markdown(rep).find("undefined") != std::string::npos);
}

TEST_CASE("significance retention of the full set is one") {
  const Dataset d = tiny();
  std::vector<std::string> all;
  for (const auto& s : d.samples()) all.push_back(s.sample_id);
  CHECK(significance_retention(d, all, 0.05) == 1.0);
  const double part = significance_retention(d, random_subset(d, 0.3, 5), 0.05);
  CHECK(part >= 0.0);
  CHECK(part <= 1.0);
}
