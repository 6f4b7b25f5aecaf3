#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <json.hpp>

#include "casf/common.hpp"
#include "casf/dataset.hpp"
#include "casf/engine.hpp"
#include "casf/text_metrics.hpp"

namespace casf {

struct LikertScale {
  int min = 1;
  int max = 5;

  bool contains(double v) const { return v >= min && v <= max; }
};

/// Everything a command needs: data location, engine parameters, baseline
/// seeds, output locations, service settings.
struct RunConfig {
  std::string data;
  std::string sidecar;
  std::vector<std::string> aspects;  // used when the dataset carries no human scores
  std::optional<std::vector<std::string>> metrics;  // explicit set; every listed metric is required
  std::optional<std::string> preliminary_metric;
  EngineConfig engine;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double alpha = 0.05;
  bool significance = true;
  std::string out = "casf_out";
  int port = 8080;
  LikertScale likert;

  /// Fails fast on parameters the engine would reject later.
  void check() const {
    engine.controller.check();
    if (!(engine.rate > 0.0 && engine.rate <= 1.0)) throw Error("rate must lie in (0, 1]");
    if (engine.phases == 0) throw Error("phases must be at least 1");
    if (engine.learner.n_trees == 0) throw Error("learner.n_trees must be positive");
    if (engine.learner.max_depth == 0) throw Error("learner.max_depth must be positive");
    if (engine.learner.min_samples_leaf == 0) throw Error("learner.min_samples_leaf must be positive");
    if (!(engine.learner.learning_rate > 0.0)) throw Error("learner.learning_rate must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
    if (likert.min >= likert.max) throw Error("likert.min must be below likert.max");
    if (port < 0 || port > 65535) throw Error("port must lie in [0, 65535]");
  }
};

inline std::vector<MetricSpec> metric_specs(const std::vector<std::string>& names) {
  const auto& internal = internal_metric_names();
  std::vector<MetricSpec> out;
  for (const auto& n : names) {
    const bool is_internal = std::find(internal.begin(), internal.end(), n) != internal.end();
    out.push_back({n, is_internal ? MetricKind::internal : MetricKind::external});
  }
  return out;
}

/// Fills the metric set and preliminary metric from the dataset when the
/// config leaves them open: internal metrics plus every default external
/// metric the dataset carries, and mover_score as preliminary metric when
/// present (rouge_l otherwise).
inline EngineConfig resolve_engine(const RunConfig& rc, const Dataset& d) {
  EngineConfig e = rc.engine;
  if (rc.metrics) {
    e.metrics = metric_specs(*rc.metrics);
  } else {
    std::vector<std::string> names = internal_metric_names();
    for (const auto& m : default_external_metric_names()) {
      bool present = false;
      for (const auto& s : d.samples()) present = present || s.external_metrics.count(m);
      if (present) names.push_back(m);
    }
    e.metrics = metric_specs(names);
  }
  if (rc.preliminary_metric) {
    e.preliminary_metric = *rc.preliminary_metric;
  } else {
    bool mover = false;
    for (const auto& m : e.metrics) mover = mover || m.name == "mover_score";
    e.preliminary_metric = mover ? "mover_score" : "rouge_l";
  }
  return e;
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j{{"data", c.data},
                   {"sidecar", c.sidecar},
                   {"aspects", c.aspects},
                   {"rate", c.engine.rate},
                   {"phases", c.engine.phases},
                   {"mode", to_string(c.engine.mode)},
                   {"preliminary_ratio", c.engine.preliminary_ratio},
                   {"tau", c.engine.controller.tau},
                   {"controller", c.engine.use_controller},
                   {"learner",
                    {{"n_trees", c.engine.learner.n_trees},
                     {"max_depth", c.engine.learner.max_depth},
                     {"learning_rate", c.engine.learner.learning_rate},
                     {"min_samples_leaf", c.engine.learner.min_samples_leaf}}},
                   {"blind_seed", c.engine.blind_seed},
                   {"seeds", c.seeds},
                   {"alpha", c.alpha},
                   {"significance", c.significance},
                   {"out", c.out},
                   {"port", c.port},
                   {"likert", {{"min", c.likert.min}, {"max", c.likert.max}}}};
  j["metrics"] = c.metrics ? nlohmann::json(*c.metrics) : nlohmann::json(nullptr);
  j["preliminary_metric"] = c.preliminary_metric ? nlohmann::json(*c.preliminary_metric) : nlohmann::json(nullptr);
  return j;
}

/// Overlays the keys present in `j` onto `c`.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "data") c.data = v.get<std::string>();
      else if (key == "sidecar") c.sidecar = v.get<std::string>();
      else if (key == "aspects") c.aspects = v.get<std::vector<std::string>>();
      else if (key == "metrics") c.metrics = v.is_null() ? std::nullopt : std::optional(v.get<std::vector<std::string>>());
      else if (key == "preliminary_metric") c.preliminary_metric = v.is_null() ? std::nullopt : std::optional(v.get<std::string>());
      else if (key == "rate") c.engine.rate = v.get<double>();
      else if (key == "phases") c.engine.phases = v.get<std::size_t>();
      else if (key == "mode") c.engine.mode = plan_mode_from_string(v.get<std::string>());
      else if (key == "preliminary_ratio") c.engine.preliminary_ratio = v.get<double>();
      else if (key == "tau") c.engine.controller.tau = v.get<double>();
      else if (key == "controller") c.engine.use_controller = v.get<bool>();
      else if (key == "learner") {
        auto& l = c.engine.learner;
        l.n_trees = v.value("n_trees", l.n_trees);
        l.max_depth = v.value("max_depth", l.max_depth);
        l.learning_rate = v.value("learning_rate", l.learning_rate);
        l.min_samples_leaf = v.value("min_samples_leaf", l.min_samples_leaf);
      }
      else if (key == "blind_seed") c.engine.blind_seed = v.get<std::uint64_t>();
      else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "significance") c.significance = v.get<bool>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "port") c.port = v.get<int>();
      else if (key == "likert") {
        c.likert.min = v.value("min", c.likert.min);
        c.likert.max = v.value("max", c.likert.max);
      }
      else throw Error("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
  return c;
}

/// Digest of the parameters that shape results (paths and service settings
/// excluded), recorded in reports.
inline std::string config_digest(const RunConfig& c, const EngineConfig& resolved) {
  nlohmann::json j = run_config_to_json(c);
  for (const char* k : {"data", "sidecar", "out", "port", "likert", "metrics", "preliminary_metric"}) j.erase(k);
  j["engine"] = engine_config_to_json(resolved);
  return hex64(fnv1a64(j.dump()));
}

/// State path precedence: explicit flag, then CASF_STATE, then the default.
inline std::filesystem::path resolve_state_path(const std::optional<std::string>& flag,
                                                const std::string& fallback = "casf_state.json") {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("CASF_STATE"); env && *env) return env;
  return fallback;
}

/// On-disk live session: the config snapshot it was created with plus the
/// engine state.
struct StateFile {
  RunConfig config;
  EngineState engine;
};

inline std::string state_file_dump(const StateFile& f) {
  return nlohmann::json{{"config", run_config_to_json(f.config)}, {"engine", state_to_json(f.engine)}}.dump(2) + "\n";
}

inline StateFile load_state_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error&) {
    throw Error("corrupt state: '" + path.string() + "' is not valid JSON");
  }
  if (!j.is_object() || !j.contains("config") || !j.contains("engine")) {
    throw Error("corrupt state: '" + path.string() + "' lacks config or engine");
  }
  return {run_config_from_json(j.at("config")), state_from_json(j.at("engine"))};
}

inline void save_state_file(const std::filesystem::path& path, const StateFile& f) {
  write_file_atomic(path, state_file_dump(f));
}

/// Loads the dataset named by a config and binds it to the resolved engine.
inline Session open_session(const RunConfig& rc) {
  if (rc.data.empty()) throw Error("no dataset given (--data)");
  Dataset d = load_dataset(rc.data, rc.aspects, rc.sidecar);
  EngineConfig e = resolve_engine(rc, d);
  return Session(std::move(d), std::move(e));
}

/// Session for a stored state; refuses a dataset that changed underneath it.
inline Session open_session(const StateFile& f) {
  Session s = open_session(f.config);
  if (s.digest() != f.engine.dataset_digest) {
    throw Error("dataset '" + f.config.data + "' changed since the state was created");
  }
  return s;
}

/// Exclusive advisory lock on "<state>.lock"; held for the object's lifetime.
class WriterLock {
 public:
  explicit WriterLock(const std::filesystem::path& state_path) : path_(state_path.string() + ".lock") {
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw Error("cannot open lock file '" + path_ + "'");
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error("state '" + state_path.string() + "' is locked by another writer");
    }
  }
  WriterLock(const WriterLock&) = delete;
  WriterLock& operator=(const WriterLock&) = delete;
  ~WriterLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }

 private:
  std::string path_;
  int fd_ = -1;
};

}  // namespace casf
