#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "casf/common.hpp"
#include "casf/dataset.hpp"

namespace casf {

namespace detail {

inline bool is_unicode_space(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F ||
         cp == 0x3000;
}

// Simple one-to-one case mapping for ASCII, Latin-1, Greek and Cyrillic capitals.
inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Decodes one code point at `pos`. Malformed sequences yield the raw byte
// (marked by `raw`) so arbitrary bytes survive tokenization unchanged.
inline char32_t decode_utf8(std::string_view s, std::size_t& pos, bool& raw) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  raw = false;
  int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
  if (len == 1) {
    ++pos;
    return b0;
  }
  if (len == 0 || pos + len > s.size()) {
    raw = true;
    ++pos;
    return b0;
  }
  char32_t cp = b0 & (0x7F >> len);
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) {
      raw = true;
      ++pos;
      return b0;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

using NgramCounts = std::map<std::string, std::uint32_t>;

inline NgramCounts ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  if (n == 0 || tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += ' ';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

inline std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
  std::size_t overlap = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  return overlap;
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

/// Lowercases and splits on Unicode whitespace; punctuation stays attached.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  std::size_t pos = 0;
  while (pos < text.size()) {
    bool raw = false;
    const std::size_t start = pos;
    const char32_t cp = detail::decode_utf8(text, pos, raw);
    if (!raw && detail::is_unicode_space(cp)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else if (raw) {
      cur.append(text.substr(start, pos - start));
    } else {
      detail::append_utf8(cur, detail::to_lower(cp));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Word-bigram multiset of one text, precomputed for repeated redundancy checks.
struct BigramBag {
  std::vector<std::pair<std::string, std::uint32_t>> counts;  // sorted by bigram
  std::size_t total = 0;
  std::vector<std::string> short_tokens;  // the tokens, kept only when fewer than two
};

inline BigramBag make_bigram_bag(std::string_view text) {
  BigramBag bag;
  auto tokens = tokenize(text);
  if (tokens.size() < 2) {
    bag.short_tokens = std::move(tokens);
    return bag;
  }
  auto counts = detail::ngram_counts(tokens, 2);
  bag.counts.assign(counts.begin(), counts.end());
  bag.total = tokens.size() - 1;
  return bag;
}

/// Dice coefficient over bigram multisets.
inline double dice(const BigramBag& a, const BigramBag& b) {
  if (a.total == 0 && b.total == 0) return a.short_tokens == b.short_tokens ? 1.0 : 0.0;
  if (a.total == 0 || b.total == 0) return 0.0;
  std::size_t common = 0;
  auto ia = a.counts.begin();
  auto ib = b.counts.begin();
  while (ia != a.counts.end() && ib != b.counts.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      common += std::min(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return 2.0 * static_cast<double>(common) / static_cast<double>(a.total + b.total);
}

inline double bigram_dice(std::string_view a, std::string_view b) {
  return dice(make_bigram_bag(a), make_bigram_bag(b));
}

/// ROUGE-N F1 against the best-matching reference.
inline double rouge_n(std::string_view candidate, const std::vector<std::string>& references, std::size_t n) {
  if (n == 0) throw Error("rouge_n requires n >= 1");
  const auto cand_tokens = tokenize(candidate);
  if (references.empty() || cand_tokens.size() < n) return 0.0;
  const auto cand = detail::ngram_counts(cand_tokens, n);
  const std::size_t cand_total = cand_tokens.size() - n + 1;
  double best = 0.0;
  for (const auto& ref_text : references) {
    const auto ref_tokens = tokenize(ref_text);
    if (ref_tokens.size() < n) continue;
    const std::size_t ref_total = ref_tokens.size() - n + 1;
    const std::size_t overlap = detail::clipped_overlap(cand, detail::ngram_counts(ref_tokens, n));
    const double f1 = 2.0 * static_cast<double>(overlap) / static_cast<double>(cand_total + ref_total);
    best = std::max(best, f1);
  }
  return best;
}

/// ROUGE-L (LCS) F1 with beta = 1 against the best-matching reference.
inline double rouge_l(std::string_view candidate, const std::vector<std::string>& references) {
  const auto cand_tokens = tokenize(candidate);
  if (references.empty() || cand_tokens.empty()) return 0.0;
  double best = 0.0;
  for (const auto& ref_text : references) {
    const auto ref_tokens = tokenize(ref_text);
    if (ref_tokens.empty()) continue;
    const std::size_t lcs = detail::lcs_length(cand_tokens, ref_tokens);
    const double f1 = 2.0 * static_cast<double>(lcs) / static_cast<double>(cand_tokens.size() + ref_tokens.size());
    best = std::max(best, f1);
  }
  return best;
}

/// Sentence BLEU: uniform weights over 1..max_n, clipped counts, brevity
/// penalty against the closest reference length (shorter on ties). A zero
/// match count for n >= 2 is smoothed to 1/(total_n + 1).
inline double bleu(std::string_view candidate, const std::vector<std::string>& references, std::size_t max_n = 4) {
  if (max_n == 0) throw Error("bleu requires max_n >= 1");
  const auto cand_tokens = tokenize(candidate);
  if (references.empty() || cand_tokens.empty()) return 0.0;

  std::vector<std::vector<std::string>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(tokenize(r));

  const std::size_t c = cand_tokens.size();
  std::size_t closest = refs.front().size();
  for (const auto& r : refs) {
    const auto dr = r.size() > c ? r.size() - c : c - r.size();
    const auto db = closest > c ? closest - c : c - closest;
    if (dr < db || (dr == db && r.size() < closest)) closest = r.size();
  }

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand = detail::ngram_counts(cand_tokens, n);
    detail::NgramCounts max_ref;
    for (const auto& r : refs) {
      for (const auto& [gram, cnt] : detail::ngram_counts(r, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, cnt);
      }
    }
    const std::size_t total = c >= n ? c - n + 1 : 0;
    const std::size_t matched = detail::clipped_overlap(cand, max_ref);
    double p = 0.0;
    if (matched > 0) {
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else if (n == 1) {
      return 0.0;
    } else {
      p = 1.0 / static_cast<double>(total + 1);
    }
    log_sum += std::log(p);
  }
  const double bp = c > closest ? 1.0 : std::exp(1.0 - static_cast<double>(closest) / static_cast<double>(c));
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

enum class MetricKind { internal, external };

struct MetricSpec {
  std::string name;
  MetricKind kind = MetricKind::internal;

  bool operator==(const MetricSpec&) const = default;
};

inline const std::vector<std::string>& internal_metric_names() {
  static const std::vector<std::string> names{"rouge_1", "rouge_2", "rouge_l", "bleu"};
  return names;
}

inline const std::vector<std::string>& default_external_metric_names() {
  static const std::vector<std::string> names{"bert_score", "mover_score", "bart_score", "meteor"};
  return names;
}

inline std::vector<MetricSpec> default_metric_set() {
  std::vector<MetricSpec> set;
  for (const auto& n : internal_metric_names()) set.push_back({n, MetricKind::internal});
  for (const auto& n : default_external_metric_names()) set.push_back({n, MetricKind::external});
  return set;
}

inline double internal_metric(const std::string& name, std::string_view candidate,
                              const std::vector<std::string>& references) {
  if (name == "rouge_1") return rouge_n(candidate, references, 1);
  if (name == "rouge_2") return rouge_n(candidate, references, 2);
  if (name == "rouge_l") return rouge_l(candidate, references);
  if (name == "bleu") return bleu(candidate, references);
  throw Error("unknown internal metric '" + name + "'");
}

/// Dense (sample, system, metric) score table.
class MetricMatrix {
 public:
  MetricMatrix() = default;
  MetricMatrix(std::vector<std::string> metric_names, std::size_t samples, std::size_t systems)
      : names_(std::move(metric_names)),
        samples_(samples),
        systems_(systems),
        cells_(samples * systems * names_.size(), 0.0) {}

  const std::vector<std::string>& metric_names() const { return names_; }
  std::size_t samples() const { return samples_; }
  std::size_t systems() const { return systems_; }
  std::size_t metrics() const { return names_.size(); }

  double at(std::size_t sample, std::size_t system, std::size_t metric) const {
    return cells_[offset(sample, system, metric)];
  }
  double& at(std::size_t sample, std::size_t system, std::size_t metric) {
    return cells_[offset(sample, system, metric)];
  }

  /// Contiguous (system-major, metric-minor) row of one sample.
  std::vector<double> row(std::size_t sample) const {
    if (sample >= samples_) throw Error("sample index " + std::to_string(sample) + " out of range");
    const auto width = systems_ * names_.size();
    return {cells_.begin() + static_cast<std::ptrdiff_t>(sample * width),
            cells_.begin() + static_cast<std::ptrdiff_t>((sample + 1) * width)};
  }

  std::size_t metric_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw Error("metric '" + name + "' is not in the metric matrix");
    return static_cast<std::size_t>(it - names_.begin());
  }
  bool has_metric(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  const std::vector<double>& cells() const { return cells_; }

 private:
  std::size_t offset(std::size_t sample, std::size_t system, std::size_t metric) const {
    return (sample * systems_ + system) * names_.size() + metric;
  }

  std::vector<std::string> names_;
  std::size_t samples_ = 0;
  std::size_t systems_ = 0;
  std::vector<double> cells_;
};

inline MetricMatrix build_metric_matrix(const Dataset& d, const std::vector<MetricSpec>& metric_set) {
  std::vector<std::string> names;
  for (const auto& spec : metric_set) {
    if (std::find(names.begin(), names.end(), spec.name) != names.end()) {
      throw Error("metric '" + spec.name + "' listed twice in the metric set");
    }
    if (spec.kind == MetricKind::internal &&
        std::find(internal_metric_names().begin(), internal_metric_names().end(), spec.name) ==
            internal_metric_names().end()) {
      throw Error("unknown internal metric '" + spec.name + "'");
    }
    names.push_back(spec.name);
  }

  MetricMatrix mm(names, d.size(), d.systems().size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Sample& s = d.at(i);
    for (std::size_t j = 0; j < d.systems().size(); ++j) {
      const std::string& sys = d.systems()[j];
      const std::string& output = s.outputs.at(sys);
      for (std::size_t m = 0; m < metric_set.size(); ++m) {
        const MetricSpec& spec = metric_set[m];
        if (spec.kind == MetricKind::internal) {
          mm.at(i, j, m) = internal_metric(spec.name, output, s.references);
          continue;
        }
        auto it = s.external_metrics.find(spec.name);
        const bool present = it != s.external_metrics.end() && it->second.count(sys);
        if (!present || !std::isfinite(it->second.at(sys))) {
          throw Error("external metric '" + spec.name + "' missing for sample '" + s.sample_id + "' system '" + sys + "'");
        }
        mm.at(i, j, m) = it->second.at(sys);
      }
    }
  }
  return mm;
}

}  // namespace casf
