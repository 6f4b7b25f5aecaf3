#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "casf/common.hpp"
#include "casf/dataset.hpp"
#include "casf/engine.hpp"
#include "casf/learner.hpp"
#include "casf/sampler.hpp"
#include "casf/text_metrics.hpp"

namespace casf {

/// psi for one aspect: mean human score per system over a sample set.
struct SystemMeans {
  std::string aspect;
  std::map<std::string, double> means;

  /// Means in the given system order.
  std::vector<double> ordered(const std::vector<std::string>& systems) const {
    std::vector<double> v;
    for (const auto& s : systems) v.push_back(means.at(s));
    return v;
  }
};

inline SystemMeans system_means(const Dataset& d, const std::vector<std::string>& subset, const std::string& aspect) {
  if (subset.empty()) throw Error("system_means: empty subset");
  SystemMeans out{aspect, {}};
  for (const auto& sys : d.systems()) {
    double sum = 0.0;
    for (const auto& id : subset) {
      const Sample& s = d.by_id(id);
      if (!s.human_scores) throw Error("system_means: sample '" + id + "' has no human scores");
      sum += s.human_scores->at(sys).at(aspect);
    }
    out.means[sys] = sum / static_cast<double>(subset.size());
  }
  return out;
}

namespace detail {

// Inversions of `v` via merge sort; `v` ends sorted.
inline std::uint64_t count_inversions(std::vector<double>& v) {
  std::vector<double> buf(v.size());
  std::uint64_t swaps = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, v.size());
      const std::size_t hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          swaps += mid - i;
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    std::swap(v, buf);
  }
  return swaps;
}

inline std::uint64_t tied_pairs(const std::vector<double>& sorted) {
  std::uint64_t ties = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      ties += static_cast<std::uint64_t>(run) * (run - 1) / 2;
      run = 1;
    }
  }
  return ties;
}

}  // namespace detail

/// Kendall's tau-b (Knight's merge-sort formulation). Returns nullopt when
/// either vector is entirely tied, where the coefficient is undefined.
inline std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("kendall_tau_b: vectors differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw Error("kendall_tau_b: need at least two observations");

  std::vector<std::pair<double, double>> pairs(n);
  for (std::size_t i = 0; i < n; ++i) pairs[i] = {x[i], y[i]};
  std::sort(pairs.begin(), pairs.end());

  const auto n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::uint64_t x_ties = 0, joint_ties = 0;
  std::size_t run_x = 1, run_xy = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    const bool same_x = i < n && pairs[i].first == pairs[i - 1].first;
    const bool same_xy = same_x && pairs[i].second == pairs[i - 1].second;
    if (same_x) {
      ++run_x;
    } else {
      x_ties += static_cast<std::uint64_t>(run_x) * (run_x - 1) / 2;
      run_x = 1;
    }
    if (same_xy) {
      ++run_xy;
    } else {
      joint_ties += static_cast<std::uint64_t>(run_xy) * (run_xy - 1) / 2;
      run_xy = 1;
    }
  }

  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = pairs[i].second;
  const std::uint64_t swaps = detail::count_inversions(ys);
  const std::uint64_t y_ties = detail::tied_pairs(ys);

  if (x_ties == n0 || y_ties == n0) return std::nullopt;
  const double numer = static_cast<double>(n0) - static_cast<double>(x_ties) - static_cast<double>(y_ties) +
                       static_cast<double>(joint_ties) - 2.0 * static_cast<double>(swaps);
  // one sqrt of the product keeps a perfect ranking at exactly 1
  const double denom = std::sqrt(static_cast<double>(n0 - x_ties) * static_cast<double>(n0 - y_ties));
  return std::clamp(numer / denom, -1.0, 1.0);
}

/// True iff the best systems on the subset and on the full set overlap
/// (argmax sets, exact ties included).
inline bool top_ranked_hit(const SystemMeans& subset, const SystemMeans& full) {
  if (subset.means.size() != full.means.size()) throw Error("top_ranked_hit: system sets differ");
  for (const auto& [sys, v] : subset.means) {
    if (!full.means.count(sys)) throw Error("top_ranked_hit: system sets differ");
  }
  auto argmax = [](const SystemMeans& m) {
    double best = -INFINITY;
    for (const auto& [sys, v] : m.means) best = std::max(best, v);
    std::vector<std::string> top;
    for (const auto& [sys, v] : m.means) {
      if (v == best) top.push_back(sys);
    }
    return top;
  };
  const auto a = argmax(subset), b = argmax(full);
  return std::find_first_of(a.begin(), a.end(), b.begin(), b.end()) != a.end();
}

/// Inter-system ranking agreement between a subset and the full population.
inline std::optional<double> subset_tau(const Dataset& d, const std::vector<std::string>& subset,
                                        const std::string& aspect) {
  std::vector<std::string> all;
  for (const auto& s : d.samples()) all.push_back(s.sample_id);
  const auto sub = system_means(d, subset, aspect).ordered(d.systems());
  const auto full = system_means(d, all, aspect).ordered(d.systems());
  return kendall_tau_b(sub, full);
}

// ---- Wilcoxon signed-rank -------------------------------------------------

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;  // nonzero differences
  bool exact = true;
};

inline constexpr std::size_t kWilcoxonExactLimit = 20;

/// Two-sided paired test on x - y. Zero differences are dropped and tied
/// magnitudes get average ranks. Up to 20 nonzero pairs the null
/// distribution is enumerated exactly; beyond that a normal approximation
/// with tie and continuity corrections is used.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("wilcoxon_signed_rank: vectors differ in length");
  if (x.empty()) throw Error("wilcoxon_signed_rank: no observations");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) diffs.push_back(x[i] - y[i]);
  }
  WilcoxonResult res;
  res.n = diffs.size();
  if (diffs.empty()) return res;

  const std::size_t n = diffs.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });

  // Doubled ranks keep average ranks integral.
  std::vector<std::uint64_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[idx[j + 1]]) == std::abs(diffs[idx[i]])) ++j;
    const std::uint64_t r2 = static_cast<std::uint64_t>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[idx[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  std::uint64_t w_plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diffs[i] > 0) w_plus2 += rank2[i];
  }
  res.w_plus = static_cast<double>(w_plus2) / 2.0;
  res.w_minus = static_cast<double>(total2 - w_plus2) / 2.0;

  if (n <= kWilcoxonExactLimit) {
    std::vector<double> ways(total2 + 1, 0.0);
    ways[0] = 1.0;
    std::uint64_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      reach += rank2[i];
      for (std::uint64_t s = reach; s >= rank2[i]; --s) {
        ways[s] += ways[s - rank2[i]];
        if (s == rank2[i]) break;
      }
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double lower = 0.0, upper = 0.0;
    for (std::uint64_t s = 0; s <= total2; ++s) {
      if (s <= w_plus2) lower += ways[s];
      if (s >= w_plus2) upper += ways[s];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    return res;
  }

  res.exact = false;
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return res;
  const double z = std::max(0.0, std::abs(res.w_plus - mean) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

namespace detail {

// -1/0/+1: significantly lower / not significant / significantly higher.
inline int significance_class(const Dataset& d, const std::vector<std::string>& ids, const std::string& a,
                              const std::string& b, const std::string& aspect, double alpha) {
  std::vector<double> x, y;
  for (const auto& id : ids) {
    const auto& hs = *d.by_id(id).human_scores;
    x.push_back(hs.at(a).at(aspect));
    y.push_back(hs.at(b).at(aspect));
  }
  const auto w = wilcoxon_signed_rank(x, y);
  if (!(w.p_value < alpha)) return 0;
  return w.w_plus > w.w_minus ? 1 : (w.w_plus < w.w_minus ? -1 : 0);
}

}  // namespace detail

/// Fraction of (aspect, system pair) cells whose significance verdict on the
/// subset matches the verdict on the full set.
inline double significance_retention(const Dataset& d, const std::vector<std::string>& subset, double alpha) {
  if (!d.fully_annotated()) throw Error("significance_retention requires complete human scores");
  if (subset.empty()) throw Error("significance_retention: empty subset");
  std::vector<std::string> all;
  for (const auto& s : d.samples()) all.push_back(s.sample_id);
  std::size_t cells = 0, agree = 0;
  const auto& sys = d.systems();
  for (const auto& aspect : d.aspects()) {
    for (std::size_t a = 0; a < sys.size(); ++a) {
      for (std::size_t b = a + 1; b < sys.size(); ++b) {
        ++cells;
        agree += detail::significance_class(d, all, sys[a], sys[b], aspect, alpha) ==
                 detail::significance_class(d, subset, sys[a], sys[b], aspect, alpha);
      }
    }
  }
  return static_cast<double>(agree) / static_cast<double>(cells);
}

// ---- baselines ------------------------------------------------------------

inline std::size_t subset_budget(const Dataset& d, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw Error("sampling rate must lie in (0, 1]");
  return std::max<std::size_t>(1, round_half_up(rate * static_cast<double>(d.size())));
}

namespace detail {

inline std::vector<std::string> ids_in_dataset_order(const Dataset& d, std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(d.at(i).sample_id);
  return out;
}

inline void require_annotated(const Dataset& d) {
  if (!d.fully_annotated()) throw Error("baselines require human scores on every sample");
}

}  // namespace detail

struct BaselineRun {
  std::uint64_t seed = 0;
  std::vector<std::string> subset;  // dataset order
  std::vector<std::optional<double>> taus;  // per aspect
};

struct RandomBaseline {
  std::vector<BaselineRun> runs;
  std::vector<std::optional<double>> mean_taus;  // per aspect, over defined run taus
};

/// Uniform random subset of round(r*N) samples drawn with Rng(seed).
inline std::vector<std::string> random_subset(const Dataset& d, double rate, std::uint64_t seed) {
  Rng rng(seed);
  return detail::ids_in_dataset_order(d, sample_indices(d.size(), subset_budget(d, rate), rng));
}

inline std::vector<std::optional<double>> subset_taus(const Dataset& d, const std::vector<std::string>& subset) {
  std::vector<std::optional<double>> taus;
  for (const auto& aspect : d.aspects()) taus.push_back(subset_tau(d, subset, aspect));
  return taus;
}

inline std::optional<double> mean_defined(const std::vector<std::optional<double>>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& x : v) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

inline RandomBaseline random_baseline(const Dataset& d, double rate, const std::vector<std::uint64_t>& seeds) {
  detail::require_annotated(d);
  RandomBaseline out;
  for (auto seed : seeds) {
    BaselineRun run{seed, random_subset(d, rate, seed), {}};
    run.taus = subset_taus(d, run.subset);
    out.runs.push_back(std::move(run));
  }
  for (std::size_t k = 0; k < d.aspects().size(); ++k) {
    std::vector<std::optional<double>> col;
    for (const auto& r : out.runs) col.push_back(r.taus[k]);
    out.mean_taus.push_back(mean_defined(col));
  }
  return out;
}

struct HeuristicSubset {
  std::vector<std::string> subset;  // dataset order
  bool fell_back = false;  // a tail quota exceeded its decile and borrowed adjacent ranks
};

inline constexpr double kHeuristicTailFraction = 0.1;

/// Length-stratified sampling: samples sorted by mean output length (in
/// tokens); ceil(0.1k) drawn from each extreme decile, the rest from the
/// middle.
inline HeuristicSubset heuristic_baseline(const Dataset& d, double rate, std::uint64_t seed) {
  detail::require_annotated(d);
  const std::size_t n = d.size();
  const std::size_t k = subset_budget(d, rate);

  std::vector<std::pair<double, std::size_t>> by_len;
  for (std::size_t i = 0; i < n; ++i) {
    double tokens = 0.0;
    for (const auto& sys : d.systems()) tokens += static_cast<double>(tokenize(d.at(i).outputs.at(sys)).size());
    by_len.emplace_back(tokens / static_cast<double>(d.systems().size()), i);
  }
  std::sort(by_len.begin(), by_len.end());

  std::size_t tail = static_cast<std::size_t>(std::ceil(kHeuristicTailFraction * static_cast<double>(k)));
  if (2 * tail > k) tail = k / 2;
  const std::size_t decile = n / 10;
  const std::size_t pool = std::max(decile, tail);

  HeuristicSubset out;
  out.fell_back = tail > decile;
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  auto draw = [&](std::size_t begin, std::size_t end, std::size_t count) {
    for (auto off : sample_indices(end - begin, count, rng)) chosen.push_back(by_len[begin + off].second);
  };
  draw(0, pool, tail);
  draw(n - pool, n, tail);
  draw(pool, n - pool, k - 2 * tail);
  out.subset = detail::ids_in_dataset_order(d, std::move(chosen));
  return out;
}

enum class AblationMode { eight_metric, single_metric, online };

inline std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::eight_metric: return "8M";
    case AblationMode::single_metric: return "SM";
    case AblationMode::online: return "OL";
  }
  return "?";
}

namespace detail {

inline std::vector<std::string> systematic_initials(const QualityRanking& ranking, std::size_t k) {
  std::vector<std::string> out;
  for (const auto& b : make_buckets(ranking, k)) out.push_back(b.initial);
  return out;
}

}  // namespace detail

/// Ablated variants of the sampler:
///  - eight_metric: one systematic pass over the mean of min-max normalized
///    metric scores (all metrics in the session's set);
///  - single_metric: one systematic pass over the preliminary metric;
///  - online: the full multi-phase run with every bucket taking its initial.
inline std::vector<std::string> ablation_subset(const Session& session, AblationMode mode) {
  const Dataset& d = session.dataset();
  const MetricMatrix& mm = session.metrics();
  const std::size_t k = subset_budget(d, session.config().rate);
  switch (mode) {
    case AblationMode::single_metric:
      return detail::systematic_initials(preliminary_quality(mm, session.sample_ids(), session.config().preliminary_metric), k);
    case AblationMode::eight_metric: {
      std::vector<double> lo(mm.metrics(), INFINITY), hi(mm.metrics(), -INFINITY);
      for (std::size_t i = 0; i < mm.samples(); ++i) {
        for (std::size_t j = 0; j < mm.systems(); ++j) {
          for (std::size_t m = 0; m < mm.metrics(); ++m) {
            lo[m] = std::min(lo[m], mm.at(i, j, m));
            hi[m] = std::max(hi[m], mm.at(i, j, m));
          }
        }
      }
      std::vector<std::pair<std::string, double>> scored;
      for (std::size_t i = 0; i < mm.samples(); ++i) {
        double sum = 0.0;
        for (std::size_t m = 0; m < mm.metrics(); ++m) {
          double per_metric = 0.0;
          for (std::size_t j = 0; j < mm.systems(); ++j) {
            per_metric += hi[m] > lo[m] ? (mm.at(i, j, m) - lo[m]) / (hi[m] - lo[m]) : 0.0;
          }
          sum += per_metric / static_cast<double>(mm.systems());
        }
        scored.emplace_back(d.at(i).sample_id, sum / static_cast<double>(mm.metrics()));
      }
      return detail::systematic_initials(rank_by_score(std::move(scored)), k);
    }
    case AblationMode::online: {
      EngineConfig cfg = session.config();
      cfg.use_controller = false;
      return run_simulation(Session(d, cfg)).subset;
    }
  }
  throw Error("unknown ablation mode");
}

// ---- report ---------------------------------------------------------------

/// One method's subsets. Several subsets (seeded baselines) expand to
/// columns name1..nameK plus "name Mean".
struct MethodRuns {
  std::string name;
  std::vector<std::vector<std::string>> subsets;
  std::vector<std::uint64_t> seeds;
};

struct ReportCell {
  std::string aspect;
  std::string column;
  std::optional<double> tau;
  double top_hit = 0.0;  // 0/1 for a single subset, hit rate for a Mean column
  bool is_mean = false;
  std::size_t subset_size = 0;
  std::optional<std::uint64_t> seed;
};

struct ColumnAggregate {
  std::string column;
  std::optional<double> mean_tau;
  std::size_t undefined = 0;
  double top1_accuracy = 0.0;
  std::optional<double> significance_retention;
};

struct RankingReport {
  std::string dataset;
  std::string config_digest;
  double alpha = 0.05;
  std::vector<std::string> aspects;
  std::vector<std::string> columns;
  std::vector<ReportCell> rows;  // aspect-major, column-minor
  std::vector<ColumnAggregate> aggregates;
};

struct ReportOptions {
  std::string dataset;
  std::string config_digest;
  double alpha = 0.05;
  bool significance = true;
};

inline RankingReport build_report(const Dataset& d, const std::vector<MethodRuns>& methods, const ReportOptions& opt = {}) {
  detail::require_annotated(d);
  RankingReport rep{opt.dataset, opt.config_digest, opt.alpha, d.aspects(), {}, {}, {}};

  std::vector<std::string> all;
  for (const auto& s : d.samples()) all.push_back(s.sample_id);
  std::vector<SystemMeans> full;
  for (const auto& aspect : d.aspects()) full.push_back(system_means(d, all, aspect));

  struct Column {
    std::string name;
    std::vector<std::size_t> runs;  // indices into the method's subsets
    bool is_mean = false;
    const MethodRuns* method = nullptr;
  };
  std::vector<Column> columns;
  for (const auto& m : methods) {
    if (m.subsets.empty()) throw Error("method '" + m.name + "' has no subsets");
    if (m.subsets.size() == 1) {
      columns.push_back({m.name, {0}, false, &m});
      continue;
    }
    std::vector<std::size_t> every;
    for (std::size_t r = 0; r < m.subsets.size(); ++r) {
      columns.push_back({m.name + std::to_string(r + 1), {r}, false, &m});
      every.push_back(r);
    }
    columns.push_back({m.name + " Mean", every, true, &m});
  }
  for (const auto& c : columns) rep.columns.push_back(c.name);

  // (column, aspect) cells
  std::vector<std::vector<ReportCell>> grid(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const Column& col = columns[c];
    for (std::size_t k = 0; k < d.aspects().size(); ++k) {
      ReportCell cell;
      cell.aspect = d.aspects()[k];
      cell.column = col.name;
      cell.is_mean = col.is_mean;
      std::vector<std::optional<double>> taus;
      double hits = 0.0;
      for (auto r : col.runs) {
        const auto& subset = col.method->subsets[r];
        const auto sub = system_means(d, subset, cell.aspect);
        taus.push_back(kendall_tau_b(sub.ordered(d.systems()), full[k].ordered(d.systems())));
        hits += top_ranked_hit(sub, full[k]) ? 1.0 : 0.0;
        cell.subset_size = subset.size();
      }
      cell.tau = col.is_mean ? mean_defined(taus) : taus.front();
      cell.top_hit = hits / static_cast<double>(col.runs.size());
      if (!col.is_mean && col.runs.front() < col.method->seeds.size()) cell.seed = col.method->seeds[col.runs.front()];
      grid[c].push_back(cell);
    }
  }
  for (std::size_t k = 0; k < d.aspects().size(); ++k) {
    for (std::size_t c = 0; c < columns.size(); ++c) rep.rows.push_back(grid[c][k]);
  }

  std::map<std::pair<const MethodRuns*, std::size_t>, double> retention;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    ColumnAggregate agg;
    agg.column = columns[c].name;
    std::vector<std::optional<double>> taus;
    double hits = 0.0;
    for (const auto& cell : grid[c]) {
      taus.push_back(cell.tau);
      agg.undefined += !cell.tau.has_value();
      hits += cell.top_hit;
    }
    agg.mean_tau = mean_defined(taus);
    agg.top1_accuracy = hits / static_cast<double>(grid[c].size());
    if (opt.significance) {
      double sum = 0.0;
      for (auto r : columns[c].runs) {
        const auto key = std::make_pair(columns[c].method, r);
        if (!retention.count(key)) retention[key] = significance_retention(d, columns[c].method->subsets[r], opt.alpha);
        sum += retention[key];
      }
      agg.significance_retention = sum / static_cast<double>(columns[c].runs.size());
    }
    rep.aggregates.push_back(agg);
  }
  return rep;
}

inline nlohmann::json report_to_json(const RankingReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : r.rows) {
    nlohmann::json row{{"aspect", c.aspect}, {"method", c.column}, {"subset_size", c.subset_size}};
    row["tau"] = c.tau ? nlohmann::json(*c.tau) : nlohmann::json("undefined");
    if (c.is_mean) {
      row["top_hit_rate"] = c.top_hit;
    } else {
      row["top_hit"] = c.top_hit == 1.0;
    }
    if (c.seed) row["seed"] = *c.seed;
    rows.push_back(std::move(row));
  }
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : r.aggregates) {
    nlohmann::json j{{"method", a.column},
                     {"mean_tau", a.mean_tau ? nlohmann::json(*a.mean_tau) : nlohmann::json("undefined")},
                     {"undefined_cells", a.undefined},
                     {"top1_accuracy", a.top1_accuracy}};
    if (a.significance_retention) j["significance_retention"] = *a.significance_retention;
    aggs.push_back(std::move(j));
  }
  return {{"dataset", r.dataset},
          {"config_digest", r.config_digest},
          {"correlation", "kendall_tau_b"},
          {"alpha", r.alpha},
          {"aspects", r.aspects},
          {"columns", r.columns},
          {"rows", std::move(rows)},
          {"aggregates", std::move(aggs)}};
}

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

}  // namespace detail

/// Markdown table: one row per aspect, one column per method, then the
/// Overall (mean tau), top-1 accuracy and significance retention rows.
inline std::string report_to_markdown(const RankingReport& r) {
  std::ostringstream md;
  md << "# Inter-system ranking agreement (Kendall tau-b)";
  if (!r.dataset.empty()) md << ": " << r.dataset;
  md << "\n\n| Aspect |";
  for (const auto& c : r.columns) md << ' ' << c << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < r.columns.size(); ++i) md << "---|";
  md << '\n';
  bool any_undefined = false;
  for (std::size_t k = 0; k < r.aspects.size(); ++k) {
    md << "| " << r.aspects[k] << " |";
    for (std::size_t c = 0; c < r.columns.size(); ++c) {
      const auto& cell = r.rows[k * r.columns.size() + c];
      if (cell.tau) {
        md << ' ' << detail::fixed(*cell.tau) << " |";
      } else {
        md << " undefined¹ |";
        any_undefined = true;
      }
    }
    md << '\n';
  }
  md << "| **Overall** |";
  for (const auto& a : r.aggregates) md << ' ' << (a.mean_tau ? detail::fixed(*a.mean_tau) : "undefined") << " |";
  md << "\n| **Top-1 accuracy** |";
  for (const auto& a : r.aggregates) md << ' ' << detail::fixed(a.top1_accuracy) << " |";
  md << '\n';
  if (!r.aggregates.empty() && r.aggregates.front().significance_retention) {
    md << "| **Significance retention (alpha=" << detail::fixed(r.alpha, 3) << ")** |";
    for (const auto& a : r.aggregates) md << ' ' << detail::fixed(a.significance_retention.value_or(0.0)) << " |";
    md << '\n';
  }
  if (any_undefined) {
    md << "\n¹ All system means tied on the subset or the full set; tau-b is undefined and the cell is "
          "excluded from the Overall row.\n";
  }
  return md.str();
}

}  // namespace casf
