#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <json.hpp>

#include "casf/common.hpp"
#include "casf/controller.hpp"
#include "casf/dataset.hpp"
#include "casf/learner.hpp"
#include "casf/sampler.hpp"
#include "casf/text_metrics.hpp"

namespace casf {

enum class PlanMode { average, preliminary_fixed };

inline std::string to_string(PlanMode m) { return m == PlanMode::average ? "average" : "preliminary_fixed"; }

inline PlanMode plan_mode_from_string(const std::string& s) {
  if (s == "average" || s == "A") return PlanMode::average;
  if (s == "preliminary_fixed" || s == "F") return PlanMode::preliminary_fixed;
  throw Error("unknown phase mode '" + s + "' (expected average or preliminary_fixed)");
}

/// Per-phase sample quotas; quotas[0] is the preliminary phase.
struct PhasePlan {
  double rate = 0.5;
  std::size_t population = 0;
  PlanMode mode = PlanMode::average;
  std::vector<std::size_t> quotas;

  std::size_t phase_count() const { return quotas.size(); }
  std::size_t total() const {
    std::size_t t = 0;
    for (auto q : quotas) t += q;
    return t;
  }
  bool operator==(const PhasePlan&) const = default;
};

namespace detail {

// Largest-remainder split of `total` into `parts` near-equal shares; the
// surplus goes to the earliest parts.
inline std::vector<std::size_t> split_evenly(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out(parts, total / parts);
  for (std::size_t i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

}  // namespace detail

/// Quotas summing to k = round_half_up(rate * n). Average mode spreads k over
/// all phases; preliminary-fixed mode reserves round_half_up(p_ratio * n) for
/// the preliminary phase and spreads the rest over the batch phases.
inline PhasePlan plan_phases(std::size_t n, double rate, std::size_t phases, PlanMode mode,
                             double preliminary_ratio = 0.1) {
  if (!(rate > 0.0 && rate <= 1.0)) throw Error("sampling rate must lie in (0, 1]");
  if (phases == 0) throw Error("phase count must be at least 1");
  const std::size_t k = round_half_up(rate * static_cast<double>(n));
  if (k < phases) {
    throw Error("sample budget " + std::to_string(k) + " cannot cover " + std::to_string(phases) + " phases");
  }
  PhasePlan plan{rate, n, mode, {}};
  if (mode == PlanMode::average || phases == 1) {
    plan.quotas = detail::split_evenly(k, phases);
    return plan;
  }
  if (!(preliminary_ratio > 0.0 && preliminary_ratio <= 1.0)) throw Error("preliminary ratio must lie in (0, 1]");
  const std::size_t first = round_half_up(preliminary_ratio * static_cast<double>(n));
  if (first == 0 || first + (phases - 1) > k) {
    throw Error("preliminary quota " + std::to_string(first) + " leaves too few samples for " +
                std::to_string(phases - 1) + " batch phases within budget " + std::to_string(k));
  }
  plan.quotas.push_back(first);
  for (auto q : detail::split_evenly(k - first, phases - 1)) plan.quotas.push_back(q);
  return plan;
}

struct EngineConfig {
  std::vector<MetricSpec> metrics{{"rouge_1", MetricKind::internal},
                                  {"rouge_2", MetricKind::internal},
                                  {"rouge_l", MetricKind::internal},
                                  {"bleu", MetricKind::internal}};
  std::string preliminary_metric = "rouge_l";
  double rate = 0.5;
  std::size_t phases = 5;
  PlanMode mode = PlanMode::average;
  double preliminary_ratio = 0.1;
  ControllerConfig controller;
  bool use_controller = true;  // false gives the online-sampling ablation
  GbdtParams learner;
  std::uint64_t blind_seed = 0;
};

enum class Status { ready_to_select, awaiting_annotation, complete };
enum class OracleKind { simulated, live };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::ready_to_select: return "ready_to_select";
    case Status::awaiting_annotation: return "awaiting_annotation";
    case Status::complete: return "complete";
  }
  return "?";
}

inline Status status_from_string(const std::string& s) {
  if (s == "ready_to_select") return Status::ready_to_select;
  if (s == "awaiting_annotation") return Status::awaiting_annotation;
  if (s == "complete") return Status::complete;
  throw Error("unknown status '" + s + "'");
}

inline std::string to_string(OracleKind o) { return o == OracleKind::simulated ? "simulated" : "live"; }

inline OracleKind oracle_from_string(const std::string& s) {
  if (s == "simulated") return OracleKind::simulated;
  if (s == "live") return OracleKind::live;
  throw Error("unknown oracle '" + s + "' (expected simulated or live)");
}

struct Selection {
  std::size_t phase = 0;
  std::string sample_id;

  bool operator==(const Selection&) const = default;
};

struct EngineState {
  int phase = -1;  // most recent selection phase; -1 before the preliminary phase
  Status status = Status::ready_to_select;
  OracleKind oracle = OracleKind::live;
  PhasePlan plan;
  std::vector<Selection> selected;
  std::map<std::string, ScoreTable> annotations;
  std::vector<std::vector<std::string>> blinding;  // per phase: label index -> system_id
  std::optional<GbdtModel> model;
  std::string dataset_digest;

  std::vector<std::string> selected_ids() const {
    std::vector<std::string> ids;
    ids.reserve(selected.size());
    for (const auto& s : selected) ids.push_back(s.sample_id);
    return ids;
  }
  std::vector<std::string> phase_ids(std::size_t t) const {
    std::vector<std::string> ids;
    for (const auto& s : selected) {
      if (s.phase == t) ids.push_back(s.sample_id);
    }
    return ids;
  }
  bool operator==(const EngineState&) const = default;
};

/// A dataset bound to an engine configuration, with the derived tables the
/// phases share (metric matrix, redundancy profiles).
class Session {
 public:
  Session(Dataset d, EngineConfig cfg) : dataset_(std::move(d)), config_(std::move(cfg)) {
    config_.controller.check();
    metrics_ = build_metric_matrix(dataset_, config_.metrics);
    if (!metrics_.has_metric(config_.preliminary_metric)) {
      throw Error("preliminary metric '" + config_.preliminary_metric + "' is not in the metric set");
    }
    profiles_ = build_profiles(dataset_);
    digest_ = hex64(fnv1a64(serialize_dataset(dataset_)));
    for (const auto& s : dataset_.samples()) ids_.push_back(s.sample_id);
  }

  const Dataset& dataset() const { return dataset_; }
  const EngineConfig& config() const { return config_; }
  const MetricMatrix& metrics() const { return metrics_; }
  const ProfileMap& profiles() const { return profiles_; }
  const std::vector<std::string>& sample_ids() const { return ids_; }
  const std::string& digest() const { return digest_; }

 private:
  Dataset dataset_;
  EngineConfig config_;
  MetricMatrix metrics_;
  ProfileMap profiles_;
  std::vector<std::string> ids_;
  std::string digest_;
};

namespace detail {

inline std::vector<std::string> blinding_order(const std::vector<std::string>& systems, std::uint64_t seed,
                                               std::size_t phase) {
  Rng rng(splitmix64(seed) ^ (0xa24baed4963ee407ULL * (phase + 1)));
  std::vector<std::string> order;
  for (auto i : sample_indices(systems.size(), systems.size(), rng)) order.push_back(systems[i]);
  return order;
}

inline bool annotation_complete(const Dataset& d, const std::map<std::string, ScoreTable>& ann, const std::string& id) {
  auto it = ann.find(id);
  if (it == ann.end()) return false;
  for (const auto& sys : d.systems()) {
    auto jt = it->second.find(sys);
    if (jt == it->second.end()) return false;
    for (const auto& aspect : d.aspects()) {
      if (!jt->second.count(aspect)) return false;
    }
  }
  return true;
}

inline Status settled_status(const EngineState& s) {
  return static_cast<std::size_t>(s.phase) + 1 >= s.plan.phase_count() ? Status::complete : Status::ready_to_select;
}

inline std::vector<std::string> pick(const Session& session, const QualityRanking& ranking, std::size_t quota,
                                     const std::vector<std::string>& prior) {
  const auto buckets = make_buckets(ranking, quota);
  if (!session.config().use_controller) {
    std::vector<std::string> initials;
    for (const auto& b : buckets) initials.push_back(b.initial);
    return initials;
  }
  return select_phase(buckets, prior, session.profiles(), session.config().controller);
}

inline void record_selection(const Session& session, EngineState& s, const std::vector<std::string>& picks) {
  ++s.phase;
  const auto t = static_cast<std::size_t>(s.phase);
  for (const auto& id : picks) s.selected.push_back({t, id});
  s.blinding.push_back(blinding_order(session.dataset().systems(), session.config().blind_seed, t));
  if (s.oracle == OracleKind::simulated) {
    for (const auto& id : picks) {
      const Sample& sample = session.dataset().by_id(id);
      if (!sample.human_scores) throw Error("simulated oracle: sample '" + id + "' has no human scores");
      s.annotations[id] = *sample.human_scores;
    }
    s.status = settled_status(s);
  } else {
    s.status = Status::awaiting_annotation;
  }
}

}  // namespace detail

inline EngineState init_state(const Session& session, OracleKind oracle) {
  if (oracle == OracleKind::simulated && !session.dataset().fully_annotated()) {
    throw Error("simulated oracle requires human_scores on every sample");
  }
  EngineState s;
  s.oracle = oracle;
  const auto& c = session.config();
  s.plan = plan_phases(session.dataset().size(), c.rate, c.phases, c.mode, c.preliminary_ratio);
  s.dataset_digest = session.digest();
  return s;
}

/// Ids of the current phase that still lack a complete score table.
inline std::vector<std::string> pending_ids(const Session& session, const EngineState& s) {
  std::vector<std::string> out;
  if (s.phase < 0) return out;
  for (const auto& id : s.phase_ids(static_cast<std::size_t>(s.phase))) {
    if (!detail::annotation_complete(session.dataset(), s.annotations, id)) out.push_back(id);
  }
  return out;
}

inline EngineState run_preliminary(const Session& session, EngineState s) {
  if (s.phase != -1 || s.status != Status::ready_to_select) throw StateError("preliminary phase already ran");
  const auto ranking = preliminary_quality(session.metrics(), session.sample_ids(), session.config().preliminary_metric);
  const auto picks = detail::pick(session, ranking, s.plan.quotas.at(0), {});
  detail::record_selection(session, s, picks);
  return s;
}

inline EngineState run_batch_phase(const Session& session, EngineState s) {
  if (s.status == Status::awaiting_annotation) {
    throw StateError(std::to_string(pending_ids(session, s).size()) + " selected sample(s) still await annotation");
  }
  if (s.status == Status::complete) throw StateError("all phases are complete");
  if (s.phase < 0) throw StateError("the preliminary phase has not run");
  const auto next = static_cast<std::size_t>(s.phase) + 1;
  if (next >= s.plan.phase_count()) throw StateError("all phases are complete");

  const Dataset& d = session.dataset();
  std::vector<std::pair<std::string, ScoreTable>> pool;
  std::set<std::string> chosen;
  for (const auto& sel : s.selected) {
    pool.emplace_back(sel.sample_id, s.annotations.at(sel.sample_id));
    chosen.insert(sel.sample_id);
  }
  const auto targets = build_targets(pool, d.aspects(), d.systems());

  std::vector<FeatureVector> x;
  std::vector<double> y;
  for (const auto& [id, scores] : pool) {
    x.push_back(build_features(session.metrics(), d.index_of(id)));
    y.push_back(targets.at(id));
  }
  GbdtModel model = fit_gbdt(x, y, session.config().learner);

  std::vector<std::pair<std::string, FeatureVector>> rest;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!chosen.count(d.at(i).sample_id)) rest.emplace_back(d.at(i).sample_id, build_features(session.metrics(), i));
  }
  if (rest.empty()) throw Error("no unselected samples remain");
  const auto ranking = predict_quality(model, rest);
  const auto picks = detail::pick(session, ranking, s.plan.quotas.at(next), s.selected_ids());
  s.model = std::move(model);
  detail::record_selection(session, s, picks);
  return s;
}

/// Runs whichever selection comes next.
inline EngineState advance(const Session& session, EngineState s) {
  if (s.status == Status::complete) throw StateError("all phases are complete");
  if (s.status == Status::awaiting_annotation) {
    throw StateError(std::to_string(pending_ids(session, s).size()) + " selected sample(s) still await annotation");
  }
  return s.phase < 0 ? run_preliminary(session, std::move(s)) : run_batch_phase(session, std::move(s));
}

/// Scores for one sample, keyed by real system ids.
struct AnnotationRecord {
  std::string sample_id;
  ScoreTable scores;
};

namespace detail {

inline bool already_recorded(const EngineState& s, const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) {
    auto it = s.annotations.find(r.sample_id);
    if (it == s.annotations.end()) return false;
    for (const auto& [sys, per_aspect] : r.scores) {
      auto jt = it->second.find(sys);
      if (jt == it->second.end()) return false;
      for (const auto& [aspect, v] : per_aspect) {
        auto kt = jt->second.find(aspect);
        if (kt == jt->second.end() || kt->second != v) return false;
      }
    }
  }
  return true;
}

}  // namespace detail

/// Merges annotations for the current phase. All records are checked before
/// any is applied. Re-sending identical scores for a finished sample is a
/// no-op; changing them is refused.
inline EngineState ingest_annotations(const Session& session, EngineState s, const std::vector<AnnotationRecord>& records) {
  if (s.status != Status::awaiting_annotation) {
    if (!records.empty() && detail::already_recorded(s, records)) return s;
    throw StateError("session is not awaiting annotations (status " + to_string(s.status) + ")");
  }
  const Dataset& d = session.dataset();
  const auto current = s.phase_ids(static_cast<std::size_t>(s.phase));
  const std::set<std::string> phase_set(current.begin(), current.end());
  const auto pending = pending_ids(session, s);
  const std::set<std::string> pending_set(pending.begin(), pending.end());

  for (const auto& r : records) {
    if (!phase_set.count(r.sample_id)) throw Error("sample '" + r.sample_id + "' is not pending annotation");
    const bool done = !pending_set.count(r.sample_id);
    for (const auto& [sys, per_aspect] : r.scores) {
      if (!std::binary_search(d.systems().begin(), d.systems().end(), sys)) {
        throw Error("sample '" + r.sample_id + "': unknown system '" + sys + "'");
      }
      for (const auto& [aspect, v] : per_aspect) {
        if (!std::binary_search(d.aspects().begin(), d.aspects().end(), aspect)) {
          throw Error("sample '" + r.sample_id + "': unknown aspect '" + aspect + "'");
        }
        if (!std::isfinite(v)) throw Error("sample '" + r.sample_id + "': non-finite score");
        if (done && s.annotations.at(r.sample_id).at(sys).at(aspect) != v) {
          throw StateError("sample '" + r.sample_id + "' is already fully annotated with different scores");
        }
      }
    }
  }
  for (const auto& r : records) {
    auto& slot = s.annotations[r.sample_id];
    for (const auto& [sys, per_aspect] : r.scores) {
      for (const auto& [aspect, v] : per_aspect) slot[sys][aspect] = v;
    }
  }
  if (pending_ids(session, s).empty()) s.status = detail::settled_status(s);
  return s;
}

/// Scores submitted under a blinded system label ("System 1".."System M").
struct BlindedScore {
  std::string sample_id;
  std::string label;
  std::map<std::string, double> scores;  // aspect -> value
};

inline std::string blinded_label(std::size_t k) { return "System " + std::to_string(k + 1); }

inline std::vector<AnnotationRecord> unblind(const EngineState& s, const std::vector<BlindedScore>& scores) {
  if (s.phase < 0) throw StateError("no phase has been selected yet");
  const auto& order = s.blinding.at(static_cast<std::size_t>(s.phase));
  std::map<std::string, ScoreTable> merged;
  for (const auto& b : scores) {
    std::optional<std::string> sys;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (blinded_label(k) == b.label) sys = order[k];
    }
    if (!sys) throw Error("sample '" + b.sample_id + "': unknown blinded label '" + b.label + "'");
    for (const auto& [aspect, v] : b.scores) merged[b.sample_id][*sys][aspect] = v;
  }
  std::vector<AnnotationRecord> out;
  for (auto& [id, table] : merged) out.push_back({id, std::move(table)});
  return out;
}

inline std::vector<BlindedScore> blinded_scores_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("annotation file must be a JSON list");
  std::vector<BlindedScore> out;
  try {
    for (const auto& e : j) {
      BlindedScore b;
      b.sample_id = e.at("sample_id").get<std::string>();
      b.label = e.at("blinded_label").get<std::string>();
      for (const auto& [aspect, v] : e.at("scores").items()) {
        if (!v.is_number()) throw Error("sample '" + b.sample_id + "': score for '" + aspect + "' is not a number");
        b.scores[aspect] = v.get<double>();
      }
      out.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed annotation file: ") + e.what());
  }
  return out;
}

/// The current phase's selections with outputs under blinded labels. The
/// system identities never appear in this payload.
inline nlohmann::json make_batch(const Session& session, const EngineState& s) {
  nlohmann::json items = nlohmann::json::array();
  if (s.phase < 0) return items;
  const auto& order = s.blinding.at(static_cast<std::size_t>(s.phase));
  const auto pending = pending_ids(session, s);
  for (const auto& id : s.phase_ids(static_cast<std::size_t>(s.phase))) {
    const Sample& sample = session.dataset().by_id(id);
    nlohmann::json outputs = nlohmann::json::array();
    for (std::size_t k = 0; k < order.size(); ++k) {
      outputs.push_back({{"label", blinded_label(k)}, {"text", sample.outputs.at(order[k])}});
    }
    items.push_back({{"sample_id", id},
                     {"source", sample.source},
                     {"references", sample.references},
                     {"outputs", std::move(outputs)},
                     {"annotated", std::find(pending.begin(), pending.end(), id) == pending.end()}});
  }
  return items;
}

struct SelectionResult {
  std::vector<std::vector<std::string>> phases;
  std::vector<std::string> subset;
  std::vector<GbdtModel> models;

  bool operator==(const SelectionResult&) const = default;
};

inline SelectionResult result_from_state(const EngineState& s) {
  SelectionResult r;
  r.phases.resize(s.plan.phase_count());
  for (const auto& sel : s.selected) r.phases.at(sel.phase).push_back(sel.sample_id);
  r.subset = s.selected_ids();
  return r;
}

/// End-to-end run with the dataset's own human scores as the oracle.
inline SelectionResult run_simulation(const Session& session) {
  EngineState s = init_state(session, OracleKind::simulated);
  std::vector<GbdtModel> models;
  while (s.status != Status::complete) {
    s = advance(session, std::move(s));
    if (s.phase >= 1) models.push_back(*s.model);
  }
  SelectionResult r = result_from_state(s);
  r.models = std::move(models);
  return r;
}

// ---- serialization --------------------------------------------------------

inline nlohmann::json metric_set_to_json(const std::vector<MetricSpec>& set) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& m : set) j.push_back({{"name", m.name}, {"kind", m.kind == MetricKind::internal ? "internal" : "external"}});
  return j;
}

inline std::vector<MetricSpec> metric_set_from_json(const nlohmann::json& j) {
  std::vector<MetricSpec> set;
  for (const auto& e : j) {
    const auto kind = e.at("kind").get<std::string>();
    if (kind != "internal" && kind != "external") throw Error("metric kind must be internal or external");
    set.push_back({e.at("name").get<std::string>(), kind == "internal" ? MetricKind::internal : MetricKind::external});
  }
  return set;
}

inline nlohmann::json engine_config_to_json(const EngineConfig& c) {
  return {{"metrics", metric_set_to_json(c.metrics)},
          {"preliminary_metric", c.preliminary_metric},
          {"rate", c.rate},
          {"phases", c.phases},
          {"mode", to_string(c.mode)},
          {"preliminary_ratio", c.preliminary_ratio},
          {"controller", {{"tau", c.controller.tau}, {"enabled", c.use_controller}}},
          {"learner",
           {{"n_trees", c.learner.n_trees},
            {"max_depth", c.learner.max_depth},
            {"learning_rate", c.learner.learning_rate},
            {"min_samples_leaf", c.learner.min_samples_leaf}}},
          {"blind_seed", c.blind_seed}};
}

/// Reads the engine keys of a config object; absent keys keep their defaults.
inline EngineConfig engine_config_from_json(const nlohmann::json& j, EngineConfig c = {}) {
  try {
    if (j.contains("metrics")) c.metrics = metric_set_from_json(j.at("metrics"));
    if (j.contains("preliminary_metric")) c.preliminary_metric = j.at("preliminary_metric").get<std::string>();
    if (j.contains("rate")) c.rate = j.at("rate").get<double>();
    if (j.contains("phases")) c.phases = j.at("phases").get<std::size_t>();
    if (j.contains("mode")) c.mode = plan_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("preliminary_ratio")) c.preliminary_ratio = j.at("preliminary_ratio").get<double>();
    if (j.contains("controller")) {
      const auto& cj = j.at("controller");
      if (cj.contains("tau")) c.controller.tau = cj.at("tau").get<double>();
      if (cj.contains("enabled")) c.use_controller = cj.at("enabled").get<bool>();
    }
    if (j.contains("learner")) {
      const auto& lj = j.at("learner");
      c.learner.n_trees = lj.value("n_trees", c.learner.n_trees);
      c.learner.max_depth = lj.value("max_depth", c.learner.max_depth);
      c.learner.learning_rate = lj.value("learning_rate", c.learner.learning_rate);
      c.learner.min_samples_leaf = lj.value("min_samples_leaf", c.learner.min_samples_leaf);
    }
    if (j.contains("blind_seed")) c.blind_seed = j.at("blind_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid engine config: ") + e.what());
  }
  return c;
}

inline constexpr int kStateVersion = 1;

inline nlohmann::json state_to_json(const EngineState& s) {
  nlohmann::json selected = nlohmann::json::array();
  for (const auto& sel : s.selected) selected.push_back({{"phase", sel.phase}, {"sample_id", sel.sample_id}});
  return {{"version", kStateVersion},
          {"phase", s.phase},
          {"status", to_string(s.status)},
          {"oracle", to_string(s.oracle)},
          {"plan",
           {{"rate", s.plan.rate},
            {"population", s.plan.population},
            {"mode", to_string(s.plan.mode)},
            {"quotas", s.plan.quotas}}},
          {"selected", std::move(selected)},
          {"annotations", s.annotations},
          {"blinding", s.blinding},
          {"model", s.model ? model_to_json(*s.model) : nlohmann::json(nullptr)},
          {"dataset_digest", s.dataset_digest}};
}

inline EngineState state_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("version")) throw Error("corrupt state: missing version");
  const int version = j.at("version").get<int>();
  if (version != kStateVersion) {
    throw Error("state version " + std::to_string(version) + " is not supported (expected " +
                std::to_string(kStateVersion) + ")");
  }
  try {
    EngineState s;
    s.phase = j.at("phase").get<int>();
    s.status = status_from_string(j.at("status").get<std::string>());
    s.oracle = oracle_from_string(j.at("oracle").get<std::string>());
    const auto& pj = j.at("plan");
    s.plan.rate = pj.at("rate").get<double>();
    s.plan.population = pj.at("population").get<std::size_t>();
    s.plan.mode = plan_mode_from_string(pj.at("mode").get<std::string>());
    s.plan.quotas = pj.at("quotas").get<std::vector<std::size_t>>();
    for (const auto& e : j.at("selected")) {
      s.selected.push_back({e.at("phase").get<std::size_t>(), e.at("sample_id").get<std::string>()});
    }
    s.annotations = j.at("annotations").get<std::map<std::string, ScoreTable>>();
    s.blinding = j.at("blinding").get<std::vector<std::vector<std::string>>>();
    if (!j.at("model").is_null()) s.model = model_from_json(j.at("model"));
    s.dataset_digest = j.at("dataset_digest").get<std::string>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("corrupt state: ") + e.what());
  }
}

inline nlohmann::json selection_result_to_json(const SelectionResult& r) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : r.models) models.push_back(model_to_json(m));
  return {{"phases", r.phases}, {"subset", r.subset}, {"models", std::move(models)}};
}

/// Replaces `path` atomically: write a sibling temp file, fsync, rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << content;
    out.flush();
    if (!out) throw Error("failed writing '" + tmp + "'");
  }
  const int fd = ::open(tmp.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot replace '" + path.string() + "': " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace casf
