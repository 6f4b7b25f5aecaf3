#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "casf/controller.hpp"
#include "casf/sampler.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace casf;

namespace {

QualityRanking ranking_of(std::size_t n) {
  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t i = 0; i < n; ++i) scored.emplace_back("r" + std::to_string(1000 + i), static_cast<double>(n - i));
  return rank_by_score(std::move(scored));
}

std::vector<std::size_t> initial_ranks(const std::vector<Bucket>& b) {
  std::vector<std::size_t> r;
  for (const auto& x : b) r.push_back(x.rank_begin);
  return r;
}

}  // namespace

TEST_CASE("bucket layouts for small pools") {
  CHECK(initial_ranks(make_buckets(ranking_of(9), 3)) == std::vector<std::size_t>{0, 3, 6});
  const auto b = make_buckets(ranking_of(10), 3);
  CHECK(initial_ranks(b) == std::vector<std::size_t>{0, 3, 6});
  CHECK(b.back().rank_end == 10);
  CHECK(b.back().size() == 4);
  const auto singles = make_buckets(ranking_of(5), 5);
  for (const auto& s : singles) CHECK(s.size() == 1);
  CHECK_THROWS(make_buckets(ranking_of(4), 5));
  CHECK_THROWS(make_buckets(ranking_of(4), 0));
}

TEST_CASE("buckets partition the ranking for every pool and quota up to 30") {
  for (std::size_t n = 1; n <= 30; ++n) {
    const auto r = ranking_of(n);
    for (std::size_t q = 1; q <= n; ++q) {
      const auto b = make_buckets(r, q);
      REQUIRE(b.size() == q);
      const std::size_t w = n / q;
      std::size_t next = 0;
      for (std::size_t e = 0; e < q; ++e) {
        CHECK(b[e].rank_begin == next);
        CHECK(b[e].rank_begin == e * w);
        CHECK(b[e].size() == (e + 1 == q ? w + n % q : w));
        CHECK(b[e].initial == r.order[e * w]);
        for (std::size_t k = 0; k < b[e].size(); ++k) CHECK(b[e].members[k] == r.order[b[e].rank_begin + k]);
        next = b[e].rank_end;
      }
      CHECK(next == n);
    }
  }
}

TEST_CASE("vio and obj basics") {
  ControllerConfig cfg;
  const auto a = fixture::text_sample("a", "x y z", "p q");
  const auto dup = fixture::text_sample("b", "x y z", "r s");
  CHECK(vio(a, {}, cfg) == 0.0);
  CHECK(vio(a, {dup}, cfg) == 0.5);
  CHECK(vio(a, {fixture::text_sample("c", "m n", "t u")}, cfg) == 0.0);
  CHECK(obj(7, 7) == 0);
  CHECK(obj(9, 6) == 3);
  CHECK(obj(6, 9) == 3);
  ControllerConfig bad;
  bad.tau = 1.5;
  CHECK_THROWS(bad.check());
}

TEST_CASE("comparator ordering") {
  const CandidateAssessment feasible_far{"f", 9, 0.0, 3}, feasible_near{"g", 7, 0.0, 1};
  const CandidateAssessment low_vio{"h", 6, 0.1, 0}, high_vio{"i", 5, 0.4, 0};
  CHECK(better_candidate(feasible_far, low_vio));
  CHECK(better_candidate(feasible_near, feasible_far));
  CHECK(better_candidate(low_vio, high_vio));
  CHECK_FALSE(better_candidate(high_vio, low_vio));
  const CandidateAssessment tie_a{"a", 4, 0.2, 2}, tie_b{"b", 5, 0.2, 1};
  CHECK(better_candidate(tie_a, tie_b));  // equal Vio among infeasible: lower rank
}

TEST_CASE("three-rule fixture selects one sample per rule") {
  fixture::ThreeRules f;
  ControllerConfig cfg;
  const auto b0 = assess_bucket(f.buckets[0], f.prior, f.profiles, cfg);
  std::size_t feasible = 0;
  for (const auto& c : b0) feasible += c.feasible();
  CHECK(feasible == 1);
  CHECK(select_phase(f.buckets, f.prior, f.profiles, cfg) == f.expected);
}

TEST_CASE("tau of one reduces the controller to the initial samples") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 20;
    ProfileMap profiles;
    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "c" + std::to_string(i);
      profiles.emplace(id, make_profile(fixture::text_sample(id, oracle::join(oracle::random_tokens(rng, 4, 2)),
                                                             oracle::join(oracle::random_tokens(rng, 4, 2)))));
      scored.emplace_back(id, static_cast<double>(rng() % 5));
    }
    const auto buckets = make_buckets(rank_by_score(scored), 1 + rng() % n);
    std::vector<std::string> initials;
    for (const auto& b : buckets) initials.push_back(b.initial);
    CHECK(select_phase(buckets, {}, profiles, ControllerConfig{1.0}) == initials);
  }
}

TEST_CASE("unknown sample in a bucket is reported") {
  fixture::ThreeRules f;
  f.profiles.erase("5");
  CHECK_THROWS_WITH(select_phase(f.buckets, f.prior, f.profiles, {}), Catch::Matchers::ContainsSubstring("'5'"));
}
