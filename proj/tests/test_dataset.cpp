#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "casf/dataset.hpp"
#include "casf/synthetic.hpp"

using namespace casf;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* const kTwoSamples =
    R"({"sample_id":"a","source":"s","references":["the cat"],"outputs":{"x":"the cat","y":"a dog"},"human_scores":{"x":{"coh":4},"y":{"coh":2}}})"
    "\n\n"
    R"({"sample_id":"b","source":"s","references":[],"outputs":{"x":"hi","y":"ho"},"human_scores":{"x":{"coh":3},"y":{"coh":5}}})"
    "\n";

Dataset parse(const std::string& text, const std::vector<std::string>& fallback = {}) {
  std::istringstream in(text);
  return parse_dataset(in, fallback);
}

}  // namespace

TEST_CASE("parse infers systems and aspects") {
  const Dataset d = parse(kTwoSamples);
  CHECK(d.size() == 2);
  CHECK(d.systems() == std::vector<std::string>{"x", "y"});
  CHECK(d.aspects() == std::vector<std::string>{"coh"});
  CHECK(d.fully_annotated());
  CHECK(d.by_id("b").human_scores->at("y").at("coh") == 5);
  CHECK(d.index_of("b") == 1);
  CHECK_THROWS_WITH(d.by_id("zz"), ContainsSubstring("zz"));
}

TEST_CASE("serialization round-trips") {
  const Dataset d = parse(kTwoSamples);
  CHECK(parse(serialize_dataset(d)) == d);
  const Dataset syn = make_synthetic({}, 4);
  CHECK(parse(serialize_dataset(syn)) == syn);
}

TEST_CASE("invalid records name the line or the sample") {
  CHECK_THROWS_WITH(parse(std::string(kTwoSamples) + "{not json}\n"), ContainsSubstring("line 4"));
  CHECK_THROWS_WITH(parse(R"({"sample_id":"a","outputs":{"x":"1","y":"2"}})"
                          "\n"
                          R"({"sample_id":"a","outputs":{"x":"1","y":"2"}})"),
                    ContainsSubstring("duplicate sample_id 'a'"));
  CHECK_THROWS_WITH(parse(R"({"sample_id":"a","outputs":{"x":"1","y":"2"}})"
                          "\n"
                          R"({"sample_id":"b","outputs":{"x":"1"}})",
                          {"q"}),
                    ContainsSubstring("sample 'b' has no output for system 'y'"));
  CHECK_THROWS_WITH(parse(R"({"sample_id":"a","outputs":{"x":"1","y":"2"},"human_scores":{"x":{"q":1}}})"),
                    ContainsSubstring("sample 'a' lacks human scores for system 'y'"));
  CHECK_THROWS_WITH(parse(R"({"sample_id":"a","outputs":{"x":"1"}})", {"q"}), ContainsSubstring("at least 2 systems"));
  CHECK_THROWS_WITH(parse(R"({"sample_id":"a","outputs":{"x":"1","y":"2"}})"), ContainsSubstring("aspects"));
  CHECK_THROWS(parse(""));
}

TEST_CASE("unannotated datasets take aspects from config") {
  const Dataset d = parse(R"({"sample_id":"a","outputs":{"x":"1","y":"2"}})", {"fluency", "coherence"});
  CHECK(d.aspects() == std::vector<std::string>{"coherence", "fluency"});
  CHECK_FALSE(d.fully_annotated());
}

TEST_CASE("sidecar merge and coverage validation") {
  const Dataset d = parse(kTwoSamples);
  const Dataset merged = merge_sidecar(d, nlohmann::json::parse(R"({"mover_score":{"a":{"x":0.5,"y":0.25}}})"));
  CHECK(merged.by_id("a").external_metrics.at("mover_score").at("y") == 0.25);
  CHECK_THROWS_WITH(merge_sidecar(d, nlohmann::json::parse(R"({"m":{"zz":{"x":1}}})")), ContainsSubstring("'zz'"));

  const auto report = validate(merged, {"mover_score"});
  CHECK(report.metric_coverage.at("mover_score") == 0.5);
  CHECK(report.errors.size() == 2);
  CHECK(report.errors[0].sample_id == "b");
  CHECK_FALSE(report.ok());
  CHECK(report.warnings.size() == 1);  // sample b has no references

  const auto lenient = validate(merged, {});
  CHECK(lenient.ok());
  CHECK(lenient.metric_coverage.at("mover_score") == 0.5);
}
