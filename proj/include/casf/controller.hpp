#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "casf/common.hpp"
#include "casf/dataset.hpp"
#include "casf/sampler.hpp"
#include "casf/text_metrics.hpp"

namespace casf {

struct ControllerConfig {
  double tau = 0.5;  // bigram Dice above this counts as redundant

  void check() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error("controller.tau must lie in [0, 1]");
  }
};

/// Pre-tokenized outputs of one sample, one bag per system (dataset order).
struct OutputProfile {
  std::vector<std::string> systems;
  std::vector<BigramBag> bags;
};

inline OutputProfile make_profile(const Sample& s) {
  OutputProfile p;
  for (const auto& [sys, text] : s.outputs) {
    p.systems.push_back(sys);
    p.bags.push_back(make_bigram_bag(text));
  }
  return p;
}

using ProfileMap = std::map<std::string, OutputProfile>;

inline ProfileMap build_profiles(const Dataset& d) {
  ProfileMap m;
  for (const Sample& s : d.samples()) m.emplace(s.sample_id, make_profile(s));
  return m;
}

/// Redundancy between two samples: the largest same-system bigram Dice.
inline double similarity(const OutputProfile& a, const OutputProfile& b) {
  double best = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.systems.size() && j < b.systems.size()) {
    if (a.systems[i] < b.systems[j]) {
      ++i;
    } else if (b.systems[j] < a.systems[i]) {
      ++j;
    } else {
      best = std::max(best, dice(a.bags[i], b.bags[j]));
      ++i;
      ++j;
    }
  }
  return best;
}

/// Violation of the redundancy constraint: how far the closest already
/// selected sample exceeds the threshold. Zero means feasible.
inline double vio(const OutputProfile& candidate, const std::vector<const OutputProfile*>& selected,
                  const ControllerConfig& cfg) {
  double worst = 0.0;
  for (const OutputProfile* s : selected) worst = std::max(worst, similarity(candidate, *s) - cfg.tau);
  return worst;
}

inline double vio(const Sample& candidate, const std::vector<Sample>& selected, const ControllerConfig& cfg) {
  const OutputProfile cand = make_profile(candidate);
  std::vector<OutputProfile> profiles;
  profiles.reserve(selected.size());
  for (const auto& s : selected) profiles.push_back(make_profile(s));
  std::vector<const OutputProfile*> ptrs;
  for (const auto& p : profiles) ptrs.push_back(&p);
  return vio(cand, ptrs, cfg);
}

/// Rank distance to the bucket's initial selection sample.
inline std::size_t obj(std::size_t candidate_rank, std::size_t initial_rank) {
  return candidate_rank > initial_rank ? candidate_rank - initial_rank : initial_rank - candidate_rank;
}

struct CandidateAssessment {
  std::string sample_id;
  std::size_t rank = 0;
  double vio = 0.0;
  std::size_t obj = 0;

  bool feasible() const { return vio == 0.0; }
};

/// Strict "a is a better pick than b": feasible beats infeasible; among
/// infeasible, lower Vio; among feasible, lower Obj; then lower rank, then id.
inline bool better_candidate(const CandidateAssessment& a, const CandidateAssessment& b) {
  if (a.feasible() != b.feasible()) return a.feasible();
  if (!a.feasible() && a.vio != b.vio) return a.vio < b.vio;
  if (a.feasible() && a.obj != b.obj) return a.obj < b.obj;
  return std::tie(a.rank, a.sample_id) < std::tie(b.rank, b.sample_id);
}

inline std::vector<CandidateAssessment> assess_bucket(const Bucket& bucket, const std::vector<std::string>& selected,
                                                      const ProfileMap& profiles, const ControllerConfig& cfg) {
  auto profile = [&](const std::string& id) -> const OutputProfile& {
    auto it = profiles.find(id);
    if (it == profiles.end()) throw Error("no output profile for sample '" + id + "'");
    return it->second;
  };
  std::vector<const OutputProfile*> chosen;
  chosen.reserve(selected.size());
  for (const auto& id : selected) chosen.push_back(&profile(id));

  std::vector<CandidateAssessment> out;
  out.reserve(bucket.members.size());
  for (std::size_t k = 0; k < bucket.members.size(); ++k) {
    const std::size_t rank = bucket.rank_begin + k;
    out.push_back({bucket.members[k], rank, vio(profile(bucket.members[k]), chosen, cfg), obj(rank, bucket.rank_begin)});
  }
  return out;
}

inline std::string select_from_bucket(const Bucket& bucket, const std::vector<std::string>& selected_so_far,
                                      const ProfileMap& profiles, const ControllerConfig& cfg) {
  if (bucket.members.empty()) throw Error("cannot select from an empty bucket");
  const auto assessed = assess_bucket(bucket, selected_so_far, profiles, cfg);
  return std::min_element(assessed.begin(), assessed.end(), better_candidate)->sample_id;
}

/// One pick per bucket, buckets in ascending order. Each pick joins the
/// selected set before the next bucket is assessed.
inline std::vector<std::string> select_phase(const std::vector<Bucket>& buckets,
                                             const std::vector<std::string>& prior_selected,
                                             const ProfileMap& profiles, const ControllerConfig& cfg) {
  cfg.check();
  std::vector<std::string> selected = prior_selected;
  std::vector<std::string> picks;
  picks.reserve(buckets.size());
  for (const Bucket& b : buckets) {
    picks.push_back(select_from_bucket(b, selected, profiles, cfg));
    selected.push_back(picks.back());
  }
  return picks;
}

}  // namespace casf
