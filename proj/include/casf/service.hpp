#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <regex>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "casf/config.hpp"
#include "casf/engine.hpp"
#include "casf/evaluation.hpp"

namespace casf {

/// Per-aspect system means over the annotated selections so far, with the
/// agreement against the full population when the dataset carries scores.
inline nlohmann::json live_report(const Session& session, const EngineState& s) {
  const Dataset& d = session.dataset();
  std::vector<std::string> annotated;
  for (const auto& id : s.selected_ids()) {
    if (detail::annotation_complete(d, s.annotations, id)) annotated.push_back(id);
  }
  nlohmann::json aspects = nlohmann::json::object();
  for (const auto& aspect : d.aspects()) {
    nlohmann::json entry;
    std::map<std::string, double> means;
    if (!annotated.empty()) {
      for (const auto& sys : d.systems()) {
        double sum = 0.0;
        for (const auto& id : annotated) sum += s.annotations.at(id).at(sys).at(aspect);
        means[sys] = sum / static_cast<double>(annotated.size());
      }
      std::vector<std::pair<std::string, double>> scored(means.begin(), means.end());
      const auto ranking = rank_by_score(scored);
      entry["system_means"] = means;
      entry["ranking"] = ranking.order;
      if (d.fully_annotated()) {
        std::vector<std::string> all = session.sample_ids();
        const auto full = system_means(d, all, aspect);
        const auto tau = kendall_tau_b(SystemMeans{aspect, means}.ordered(d.systems()), full.ordered(d.systems()));
        entry["tau_vs_full"] = tau ? nlohmann::json(*tau) : nlohmann::json("undefined");
        entry["top_hit"] = top_ranked_hit(SystemMeans{aspect, means}, full);
      }
    }
    aspects[aspect] = std::move(entry);
  }
  return {{"status", to_string(s.status)},
          {"phase", s.phase},
          {"annotated", annotated.size()},
          {"subset", s.selected_ids()},
          {"aspects", std::move(aspects)}};
}

/// HTTP front end for the live annotation loop. Readers share the state;
/// every mutation runs under the exclusive lock and is persisted before the
/// response goes out. The state file's writer lock is held for the
/// service's lifetime.
class AnnotationService {
 public:
  AnnotationService(std::filesystem::path state_path)
      : path_(std::move(state_path)), lock_(path_), file_(load_state_file(path_)), session_(open_session(file_)) {}

  nlohmann::json session_view() const {
    std::shared_lock lk(mu_);
    return view_locked();
  }

  nlohmann::json batch() const {
    std::shared_lock lk(mu_);
    return {{"phase", file_.engine.phase}, {"items", make_batch(session_, file_.engine)}};
  }

  nlohmann::json report() const {
    std::shared_lock lk(mu_);
    return live_report(session_, file_.engine);
  }

  /// Accepts the blinded annotation list, or an object wrapping it as "scores".
  nlohmann::json post_scores(const nlohmann::json& body) {
    const auto& list = body.is_object() && body.contains("scores") ? body.at("scores") : body;
    const auto blinded = blinded_scores_from_json(list);
    const auto& scale = file_.config.likert;
    for (const auto& b : blinded) {
      for (const auto& [aspect, v] : b.scores) {
        if (!scale.contains(v)) {
          throw Error("sample '" + b.sample_id + "': score " + std::to_string(v) + " for '" + aspect +
                      "' is outside the scale [" + std::to_string(scale.min) + ", " + std::to_string(scale.max) + "]");
        }
      }
    }
    std::unique_lock lk(mu_);
    EngineState next = ingest_annotations(session_, file_.engine, unblind(file_.engine, blinded));
    commit(std::move(next));
    return view_locked();
  }

  nlohmann::json advance_phase() {
    std::unique_lock lk(mu_);
    EngineState next = advance(session_, file_.engine);
    commit(std::move(next));
    return view_locked();
  }

  /// Registers the REST routes on `server`.
  void bind(httplib::Server& server) {
    server.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) {
      respond(res, [&] { return session_view(); });
    });
    server.Get("/api/batch", [this](const httplib::Request&, httplib::Response& res) {
      respond(res, [&] { return batch(); });
    });
    server.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) {
      respond(res, [&] { return report(); });
    });
    server.Post("/api/scores", [this](const httplib::Request& req, httplib::Response& res) {
      respond(res, [&] {
        nlohmann::json body;
        try {
          body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error&) {
          throw Error("request body is not valid JSON");
        }
        return post_scores(body);
      });
    });
    server.Post("/api/phase/advance", [this](const httplib::Request&, httplib::Response& res) {
      respond(res, [&] { return advance_phase(); });
    });
  }

 private:
  nlohmann::json view_locked() const {
    const EngineState& s = file_.engine;
    const auto pending = pending_ids(session_, s);
    const std::size_t batch_size = s.phase < 0 ? 0 : s.phase_ids(static_cast<std::size_t>(s.phase)).size();
    nlohmann::json aspects = nlohmann::json::array();
    for (const auto& a : session_.dataset().aspects()) {
      aspects.push_back({{"name", a}, {"min", file_.config.likert.min}, {"max", file_.config.likert.max}});
    }
    return {{"phase", s.phase},
            {"phases", s.plan.phase_count()},
            {"status", to_string(s.status)},
            {"pending", pending.size()},
            {"total", batch_size},
            {"selected", s.selected.size()},
            {"budget", s.plan.total()},
            {"labels", session_.dataset().systems().size()},
            {"aspects", std::move(aspects)}};
  }

  void commit(EngineState next) {
    if (next == file_.engine) return;
    StateFile updated{file_.config, std::move(next)};
    save_state_file(path_, updated);
    file_ = std::move(updated);
  }

  template <class F>
  static void respond(httplib::Response& res, F&& f) {
    try {
      res.set_content(f().dump(), "application/json");
    } catch (const StateError& e) {
      res.status = 409;
      res.set_content(error_body(e.what()).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(error_body(e.what()).dump(), "application/json");
    }
  }

  static nlohmann::json error_body(const std::string& msg) {
    nlohmann::json j{{"error", msg}};
    std::smatch m;
    if (std::regex_search(msg, m, std::regex("sample '([^']*)'"))) j["sample_id"] = m[1].str();
    return j;
  }

  std::filesystem::path path_;
  WriterLock lock_;
  StateFile file_;
  Session session_;
  mutable std::shared_mutex mu_;
};

}  // namespace casf
