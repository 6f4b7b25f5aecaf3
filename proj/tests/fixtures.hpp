#pragma once

// Shared hand-built fixtures for controller tests and the acceptance gate.

#include <string>
#include <vector>

#include "casf/controller.hpp"
#include "casf/learner.hpp"
#include "casf/sampler.hpp"

namespace fixture {

inline casf::Sample text_sample(const std::string& id, const std::string& a, const std::string& b) {
  return casf::Sample{id, "src", {}, {{"A", a}, {"B", b}}, std::nullopt, {}};
}

/// Nine re-indexed candidates in three buckets of three plus one earlier
/// final sample "p". With tau = 0.5:
///  - bucket 0 (ranks 7, 3, 1): 7 duplicates p (Vio 0.5), 1 shares 3 of 4
///    bigrams with p (Vio 0.25), only 3 is feasible;
///  - bucket 1 (ranks 4, 0, 8): 4 duplicates p, 8 duplicates 3, 0 shares
///    3 of 4 bigrams with p; nothing is feasible and 0 has the least Vio;
///  - bucket 2 (ranks 5, 2, 6): all unrelated, so the initial 5 stays.
struct ThreeRules {
  casf::ProfileMap profiles;
  std::vector<casf::Bucket> buckets;
  std::vector<std::string> prior{"p"};
  std::vector<std::string> expected{"3", "0", "5"};

  ThreeRules() {
    const std::string base = "alpha beta gamma delta epsilon";
    const std::vector<casf::Sample> samples{
        text_sample("p", base, "one two three four"),
        text_sample("7", base, "kilo lima mike"),
        text_sample("3", "red green blue cyan magenta", "oak elm ash"),
        text_sample("1", "alpha beta gamma delta zeta", "pine fir yew"),
        text_sample("4", base, "north south"),
        text_sample("0", "alpha beta gamma delta eta", "east west"),
        text_sample("8", "red green blue cyan magenta", "up down"),
        text_sample("5", "iron copper tin zinc", "mon tue"),
        text_sample("2", "lead gold silver", "wed thu"),
        text_sample("6", "salt sugar flour", "fri sat"),
    };
    for (const auto& s : samples) profiles.emplace(s.sample_id, casf::make_profile(s));
    const auto ranking = casf::rank_by_score(
        {{"7", 9}, {"3", 8}, {"1", 7}, {"4", 6}, {"0", 5}, {"8", 4}, {"5", 3}, {"2", 2}, {"6", 1}});
    buckets = casf::make_buckets(ranking, 3);
  }
};

}  // namespace fixture
