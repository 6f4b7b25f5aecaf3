#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "casf/common.hpp"
#include "casf/learner.hpp"

namespace casf {

/// A run of consecutive quality ranks. The member at the lowest rank is the
/// bucket's initial selection sample.
struct Bucket {
  std::size_t index = 0;
  std::size_t rank_begin = 0;  // inclusive
  std::size_t rank_end = 0;    // exclusive
  std::vector<std::string> members;  // ascending rank
  std::string initial;

  std::size_t size() const { return members.size(); }
  bool operator==(const Bucket&) const = default;
};

/// Systematic partition of a ranking into `quota` buckets of width
/// w = floor(N/quota). Bucket e covers ranks [e*w, (e+1)*w); the last bucket
/// also takes the N mod quota leftover ranks.
inline std::vector<Bucket> make_buckets(const QualityRanking& ranking, std::size_t quota) {
  const std::size_t n = ranking.size();
  if (quota == 0) throw Error("bucket quota must be positive");
  if (quota > n) {
    throw Error("quota " + std::to_string(quota) + " exceeds the " + std::to_string(n) + " samples available");
  }
  const std::size_t width = n / quota;
  std::vector<Bucket> buckets(quota);
  for (std::size_t e = 0; e < quota; ++e) {
    Bucket& b = buckets[e];
    b.index = e;
    b.rank_begin = e * width;
    b.rank_end = e + 1 == quota ? n : (e + 1) * width;
    b.members.assign(ranking.order.begin() + static_cast<std::ptrdiff_t>(b.rank_begin),
                     ranking.order.begin() + static_cast<std::ptrdiff_t>(b.rank_end));
    b.initial = b.members.front();
  }
  return buckets;
}

}  // namespace casf
