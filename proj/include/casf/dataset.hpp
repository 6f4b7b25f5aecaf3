#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "casf/common.hpp"

namespace casf {

/// system_id -> aspect -> score
using ScoreTable = std::map<std::string, std::map<std::string, double>>;

struct Sample {
  std::string sample_id;
  std::string source;
  std::vector<std::string> references;
  std::map<std::string, std::string> outputs;  // system_id -> generated text
  std::optional<ScoreTable> human_scores;
  std::map<std::string, std::map<std::string, double>> external_metrics;  // metric -> system -> value

  bool operator==(const Sample&) const = default;
};

/// The evaluation population. Immutable once built; systems and aspects are
/// kept in lexicographic order and every per-system or per-aspect vector in
/// the toolkit follows that order.
class Dataset {
 public:
  Dataset() = default;

  /// Infers systems/aspects as sorted unions and checks every invariant.
  /// `fallback_aspects` supplies the aspect list when no sample carries human
  /// scores (live sessions over unannotated corpora).
  static Dataset make(std::vector<Sample> samples,
                      const std::vector<std::string>& fallback_aspects = {});

  const std::vector<Sample>& samples() const { return samples_; }
  const std::vector<std::string>& systems() const { return systems_; }
  const std::vector<std::string>& aspects() const { return aspects_; }
  std::size_t size() const { return samples_.size(); }

  const Sample& at(std::size_t i) const { return samples_.at(i); }
  const Sample& by_id(const std::string& id) const { return samples_[index_of(id)]; }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("unknown sample_id '" + id + "'");
    return it->second;
  }

  /// True iff every sample carries a complete human score table.
  bool fully_annotated() const {
    return std::all_of(samples_.begin(), samples_.end(),
                       [](const Sample& s) { return s.human_scores.has_value(); });
  }

  bool operator==(const Dataset& o) const {
    return samples_ == o.samples_ && systems_ == o.systems_ && aspects_ == o.aspects_;
  }

 private:
  std::vector<Sample> samples_;
  std::vector<std::string> systems_;
  std::vector<std::string> aspects_;
  std::map<std::string, std::size_t> index_;
};

struct ValidationIssue {
  std::string sample_id;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<std::string> warnings;
  std::map<std::string, double> metric_coverage;

  bool ok() const { return errors.empty(); }
};

inline Dataset Dataset::make(std::vector<Sample> samples,
                             const std::vector<std::string>& fallback_aspects) {
  if (samples.empty()) throw Error("dataset has no samples");

  Dataset d;
  std::set<std::string> systems;
  std::set<std::string> aspects;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.sample_id.empty()) throw Error("sample #" + std::to_string(i + 1) + " has an empty sample_id");
    if (!d.index_.emplace(s.sample_id, i).second) throw Error("duplicate sample_id '" + s.sample_id + "'");
    for (const auto& [sys, text] : s.outputs) systems.insert(sys);
    if (s.human_scores) {
      for (const auto& [sys, per_aspect] : *s.human_scores) {
        for (const auto& [aspect, v] : per_aspect) aspects.insert(aspect);
      }
    }
  }
  if (aspects.empty()) aspects.insert(fallback_aspects.begin(), fallback_aspects.end());

  d.systems_.assign(systems.begin(), systems.end());
  d.aspects_.assign(aspects.begin(), aspects.end());
  if (d.systems_.size() < 2) throw Error("dataset needs at least 2 systems, found " + std::to_string(d.systems_.size()));
  if (d.aspects_.empty()) throw Error("dataset has no human evaluation aspects (supply them via config when unannotated)");

  for (const Sample& s : samples) {
    for (const auto& sys : d.systems_) {
      if (!s.outputs.count(sys)) throw Error("sample '" + s.sample_id + "' has no output for system '" + sys + "'");
    }
    if (!s.human_scores) continue;
    for (const auto& [sys, per_aspect] : *s.human_scores) {
      if (!systems.count(sys)) {
        throw Error("sample '" + s.sample_id + "' has human scores for unknown system '" + sys + "'");
      }
    }
    for (const auto& sys : d.systems_) {
      auto it = s.human_scores->find(sys);
      if (it == s.human_scores->end()) {
        throw Error("sample '" + s.sample_id + "' lacks human scores for system '" + sys + "'");
      }
      for (const auto& aspect : d.aspects_) {
        auto jt = it->second.find(aspect);
        if (jt == it->second.end()) {
          throw Error("sample '" + s.sample_id + "' lacks human score '" + aspect + "' for system '" + sys + "'");
        }
        if (!std::isfinite(jt->second)) {
          throw Error("sample '" + s.sample_id + "' has a non-finite human score");
        }
      }
    }
  }
  d.samples_ = std::move(samples);
  return d;
}

namespace detail {

inline Sample sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  Sample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.source = j.value("source", std::string{});
  if (j.contains("references")) s.references = j.at("references").get<std::vector<std::string>>();
  s.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  if (j.contains("human_scores") && !j.at("human_scores").is_null()) {
    s.human_scores = j.at("human_scores").get<ScoreTable>();
  }
  if (j.contains("external_metrics") && !j.at("external_metrics").is_null()) {
    s.external_metrics = j.at("external_metrics").get<std::map<std::string, std::map<std::string, double>>>();
  }
  return s;
}

inline nlohmann::json sample_to_json(const Sample& s) {
  nlohmann::json j;
  j["sample_id"] = s.sample_id;
  j["source"] = s.source;
  j["references"] = s.references;
  j["outputs"] = s.outputs;
  if (s.human_scores) j["human_scores"] = *s.human_scores;
  if (!s.external_metrics.empty()) j["external_metrics"] = s.external_metrics;
  return j;
}

}  // namespace detail

/// Parses JSONL records (blank lines ignored). Errors carry the line number.
inline Dataset parse_dataset(std::istream& in, const std::vector<std::string>& fallback_aspects = {}) {
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      samples.push_back(detail::sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Dataset::make(std::move(samples), fallback_aspects);
}

/// Merges an external metric sidecar `{metric: {sample_id: {system: value}}}`.
inline Dataset merge_sidecar(const Dataset& d, const nlohmann::json& sidecar) {
  std::vector<Sample> samples = d.samples();
  try {
    for (const auto& [metric, per_sample] : sidecar.items()) {
      for (const auto& [sid, per_system] : per_sample.items()) {
        if (!d.contains(sid)) throw Error("sidecar metric '" + metric + "' names unknown sample '" + sid + "'");
        auto& cell = samples[d.index_of(sid)].external_metrics[metric];
        for (const auto& [sys, v] : per_system.items()) cell[sys] = v.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed metric sidecar: ") + e.what());
  }
  return Dataset::make(std::move(samples), d.aspects());
}

inline Dataset load_dataset(const std::string& path, const std::vector<std::string>& fallback_aspects = {},
                            const std::string& sidecar_path = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  Dataset d = parse_dataset(in, fallback_aspects);
  if (sidecar_path.empty()) return d;
  std::ifstream side(sidecar_path);
  if (!side) throw Error("cannot open metric sidecar '" + sidecar_path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(side);
  } catch (const nlohmann::json::exception& e) {
    throw Error("metric sidecar '" + sidecar_path + "': " + e.what());
  }
  return merge_sidecar(d, j);
}

/// JSONL rendering, one record per line, keys in sorted order.
inline std::string serialize_dataset(const Dataset& d) {
  std::string out;
  for (const Sample& s : d.samples()) {
    out += detail::sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

inline ValidationReport validate(const Dataset& d, const std::vector<std::string>& required_metrics) {
  ValidationReport report;
  std::set<std::string> metrics(required_metrics.begin(), required_metrics.end());
  for (const Sample& s : d.samples()) {
    for (const auto& [m, cells] : s.external_metrics) metrics.insert(m);
  }

  const double total = static_cast<double>(d.size() * d.systems().size());
  for (const auto& metric : metrics) {
    const bool required = std::find(required_metrics.begin(), required_metrics.end(), metric) != required_metrics.end();
    std::size_t present = 0;
    for (const Sample& s : d.samples()) {
      auto it = s.external_metrics.find(metric);
      for (const auto& sys : d.systems()) {
        bool ok = false;
        if (it != s.external_metrics.end()) {
          auto jt = it->second.find(sys);
          ok = jt != it->second.end() && std::isfinite(jt->second);
        }
        if (ok) {
          ++present;
        } else if (required) {
          report.errors.push_back({s.sample_id, "external metric '" + metric + "' missing for system '" + sys + "'"});
        }
      }
    }
    report.metric_coverage[metric] = static_cast<double>(present) / total;
  }

  std::size_t no_refs = 0;
  std::size_t unannotated = 0;
  for (const Sample& s : d.samples()) {
    no_refs += s.references.empty();
    unannotated += !s.human_scores.has_value();
  }
  if (no_refs) {
    report.warnings.push_back(std::to_string(no_refs) + " sample(s) have no references; lexical metrics score them 0");
  }
  if (unannotated) {
    report.warnings.push_back(std::to_string(unannotated) + " sample(s) carry no human scores; simulation is unavailable");
  }
  return report;
}

}  // namespace casf
