#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "casf/text_metrics.hpp"
#include "oracles.hpp"

using namespace casf;
using Catch::Approx;

TEST_CASE("tokenize lowercases and splits on any whitespace") {
  CHECK(tokenize("The  Cat\tSAT\non the mat") == std::vector<std::string>{"the", "cat", "sat", "on", "the", "mat"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \n\t ").empty());
  CHECK(tokenize("Ünïcode ÀB") == std::vector<std::string>{"ünïcode", "àb"});
  CHECK(tokenize("ΑΒΓ Привет") == std::vector<std::string>{"αβγ", "привет"});
  CHECK(tokenize("a b　c") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("tokenize keeps malformed UTF-8 bytes") {
  const std::string bad = std::string("ab\xff") + "c d";
  const auto t = tokenize(bad);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == std::string("ab\xff") + "c");
}

TEST_CASE("rouge and dice on small hand-checked pairs") {
  CHECK(rouge_n("the cat sat", {"the cat sat"}, 1) == 1.0);
  CHECK(rouge_n("the cat", {"a dog"}, 1) == 0.0);
  // 2 shared unigrams of 3 + 4
  CHECK(rouge_n("the cat sat", {"the cat ran off"}, 1) == Approx(4.0 / 7.0));
  CHECK(rouge_l("a b c d", {"a x c d"}) == Approx(6.0 / 8.0));
  CHECK(rouge_n("x y", {"a b", "x y"}, 2) == 1.0);
  CHECK(rouge_l("anything", {}) == 0.0);
  CHECK(bigram_dice("a", "a") == 1.0);
  CHECK(bigram_dice("a", "b") == 0.0);
  CHECK(bigram_dice("a", "a b") == 0.0);
  CHECK(bigram_dice("a b c", "a b c") == 1.0);
}

TEST_CASE("lexical metrics agree with brute-force oracles on random pairs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto cand = oracle::random_tokens(rng, 10, 5);
    std::vector<oracle::Tokens> refs{oracle::random_tokens(rng, 10, 5), oracle::random_tokens(rng, 10, 5)};
    const std::vector<std::string> ref_text{oracle::join(refs[0]), oracle::join(refs[1])};
    const auto c = oracle::join(cand);
    for (std::size_t n : {1, 2}) CHECK(rouge_n(c, ref_text, n) == oracle::rouge_n(cand, refs, n));
    CHECK(rouge_l(c, ref_text) == oracle::rouge_l(cand, refs));
    CHECK(bigram_dice(c, ref_text[0]) == oracle::bigram_dice(cand, refs[0]));
    CHECK(bigram_dice(c, ref_text[0]) == bigram_dice(ref_text[0], c));
  }
}

TEST_CASE("bleu worked pair") {
  // Clipped precisions 5/6, 3/5, 2/4, 1/3; equal lengths so no brevity penalty.
  const double expected = std::pow(5.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0, 0.25);
  CHECK(std::abs(bleu("the cat sat on the mat", {"the cat sat on a mat"}) - expected) < 1e-12);
}

TEST_CASE("bleu edge cases") {
  CHECK(bleu("the cat", {"a dog"}) == 0.0);
  CHECK(bleu("", {"a dog"}) == 0.0);
  CHECK(bleu("a b c d", {"a b c d"}) == Approx(1.0));
  // brevity: candidate of 2 tokens vs reference of 4
  const double bp = std::exp(1.0 - 4.0 / 2.0);
  const double p = std::pow(1.0 * 1.0 * (1.0 / 1.0) * (1.0 / 1.0), 0.25);  // n>=3 smoothed to 1/(0+1)
  CHECK(bleu("a b", {"a b c d"}) == Approx(bp * p));
}

TEST_CASE("metric matrix copies external values and rejects gaps") {
  Sample a{"a", "src", {"the cat"}, {{"s1", "the cat"}, {"s2", "a dog"}}, std::nullopt, {{"mover_score", {{"s1", 0.25}, {"s2", 0.5}}}}};
  Sample b{"b", "src", {"x y"}, {{"s1", "x y"}, {"s2", "x z"}}, std::nullopt, {{"mover_score", {{"s1", 0.75}, {"s2", 1.0}}}}};
  const Dataset d = Dataset::make({a, b}, {"q"});
  const MetricMatrix mm = build_metric_matrix(d, {{"rouge_1", MetricKind::internal}, {"mover_score", MetricKind::external}});
  CHECK(mm.at(1, 0, mm.metric_index("mover_score")) == 0.75);
  CHECK(mm.at(0, 0, mm.metric_index("rouge_1")) == 1.0);
  CHECK(mm.row(0).size() == 4);
  CHECK_THROWS_WITH(build_metric_matrix(d, {{"bert_score", MetricKind::external}}), Catch::Matchers::ContainsSubstring("bert_score"));
  CHECK_THROWS(build_metric_matrix(d, {{"rouge_1", MetricKind::internal}, {"rouge_1", MetricKind::internal}}));
  CHECK_THROWS(build_metric_matrix(d, {{"rouge_9", MetricKind::internal}}));
}
