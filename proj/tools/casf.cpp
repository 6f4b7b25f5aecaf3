// casf: simulation, live phase workflow, reporting and the annotation service.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "casf/config.hpp"
#include "casf/engine.hpp"
#include "casf/evaluation.hpp"
#include "casf/service.hpp"

namespace fs = std::filesystem;
using namespace casf;

namespace {

// Flags mirroring RunConfig keys; only flags the user actually passed
// override the config file.
struct RunFlags {
  std::string config;
  std::optional<std::string> data, sidecar, aspects, metrics, preliminary_metric, mode, seeds, out;
  std::optional<double> rate, preliminary_ratio, tau, learning_rate, alpha;
  std::optional<std::size_t> phases, trees, depth, min_leaf;
  std::optional<std::uint64_t> blind_seed;
  std::optional<int> port, likert_min, likert_max;
  bool no_controller = false;
  bool no_significance = false;

  void add_engine(CLI::App* app) {
    app->add_option("--config", config, "JSON config file; flags override its keys");
    app->add_option("--data", data, "dataset JSONL");
    app->add_option("--sidecar", sidecar, "external metric sidecar JSON");
    app->add_option("--aspects", aspects, "comma-separated aspects for unannotated datasets");
    app->add_option("--metrics", metrics, "comma-separated metric set (all required)");
    app->add_option("--preliminary-metric", preliminary_metric, "metric ranking the preliminary phase");
    app->add_option("--rate", rate, "sampling rate r in (0, 1]");
    app->add_option("--phases", phases, "number of phases P");
    app->add_option("--mode", mode, "phase plan: average or preliminary_fixed");
    app->add_option("--preliminary-ratio", preliminary_ratio, "preliminary share of N in preliminary_fixed mode");
    app->add_option("--tau", tau, "redundancy threshold in [0, 1]");
    app->add_flag("--no-controller", no_controller, "take every bucket's initial sample");
    app->add_option("--trees", trees, "boosting rounds");
    app->add_option("--depth", depth, "maximum tree depth");
    app->add_option("--learning-rate", learning_rate, "shrinkage");
    app->add_option("--min-leaf", min_leaf, "minimum samples per leaf");
    app->add_option("--blind-seed", blind_seed, "seed for blinded label order");
  }
  void add_evaluation(CLI::App* app) {
    app->add_option("--seeds", seeds, "comma-separated baseline seeds");
    app->add_option("--alpha", alpha, "significance level");
    app->add_flag("--no-significance", no_significance, "skip significance retention");
  }
  void add_out(CLI::App* app) { app->add_option("--out", out, "output directory"); }
  void add_service(CLI::App* app) {
    app->add_option("--port", port, "listen port (0 picks a free port)");
    app->add_option("--likert-min", likert_min, "lowest score on the annotation scale");
    app->add_option("--likert-max", likert_max, "highest score on the annotation scale");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config.empty()) {
      try {
        c = run_config_from_json(nlohmann::json::parse(read_file(config)));
      } catch (const nlohmann::json::parse_error&) {
        throw Error("config '" + config + "' is not valid JSON");
      }
    }
    if (data) c.data = *data;
    if (sidecar) c.sidecar = *sidecar;
    if (aspects) c.aspects = split(*aspects);
    if (metrics) c.metrics = split(*metrics);
    if (preliminary_metric) c.preliminary_metric = *preliminary_metric;
    if (rate) c.engine.rate = *rate;
    if (phases) c.engine.phases = *phases;
    if (mode) c.engine.mode = plan_mode_from_string(*mode);
    if (preliminary_ratio) c.engine.preliminary_ratio = *preliminary_ratio;
    if (tau) c.engine.controller.tau = *tau;
    if (no_controller) c.engine.use_controller = false;
    if (trees) c.engine.learner.n_trees = *trees;
    if (depth) c.engine.learner.max_depth = *depth;
    if (learning_rate) c.engine.learner.learning_rate = *learning_rate;
    if (min_leaf) c.engine.learner.min_samples_leaf = *min_leaf;
    if (blind_seed) c.engine.blind_seed = *blind_seed;
    if (seeds) {
      c.seeds.clear();
      for (const auto& s : split(*seeds)) {
        try {
          std::size_t used = 0;
          c.seeds.push_back(std::stoull(s, &used));
          if (used != s.size()) throw std::invalid_argument(s);
        } catch (const std::logic_error&) {
          throw Error("seed '" + s + "' is not a non-negative integer");
        }
      }
      if (c.seeds.empty()) throw Error("--seeds needs at least one seed");
    }
    if (alpha) c.alpha = *alpha;
    if (no_significance) c.significance = false;
    if (out) c.out = *out;
    if (port) c.port = *port;
    if (likert_min) c.likert.min = *likert_min;
    if (likert_max) c.likert.max = *likert_max;
    c.check();
    return c;
  }

  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }
};

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

nlohmann::json subsets_json(const std::vector<std::uint64_t>& seeds, const std::vector<std::vector<std::string>>& subsets) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < subsets.size(); ++i) arr.push_back({{"seed", seeds[i]}, {"subset", subsets[i]}});
  return arr;
}

int cmd_simulate(const RunFlags& flags) {
  const RunConfig rc = flags.resolve();
  const Session session = open_session(rc);
  const Dataset& d = session.dataset();
  if (!d.fully_annotated()) throw Error("simulate requires human scores on every sample");
  plan_phases(d.size(), session.config().rate, session.config().phases, session.config().mode,
              session.config().preliminary_ratio);

  const SelectionResult casf = run_simulation(session);

  std::vector<std::vector<std::string>> random, heuristic;
  bool fell_back = false;
  for (auto seed : rc.seeds) {
    random.push_back(random_subset(d, session.config().rate, seed));
    auto h = heuristic_baseline(d, session.config().rate, seed);
    fell_back = fell_back || h.fell_back;
    heuristic.push_back(std::move(h.subset));
  }
  std::vector<MethodRuns> methods{{"R", random, rc.seeds}, {"H", heuristic, rc.seeds}};
  nlohmann::json ablations = nlohmann::json::object();
  for (auto mode : {AblationMode::eight_metric, AblationMode::single_metric, AblationMode::online}) {
    auto subset = ablation_subset(session, mode);
    ablations[to_string(mode)] = subset;
    methods.push_back({to_string(mode), {std::move(subset)}, {}});
  }
  methods.push_back({"CASF", {casf.subset}, {}});

  ReportOptions opt;
  opt.dataset = fs::path(rc.data).filename().string();
  opt.config_digest = config_digest(rc, session.config());
  opt.alpha = rc.alpha;
  opt.significance = rc.significance;
  const RankingReport report = build_report(d, methods, opt);

  fs::create_directories(rc.out);
  write_json(fs::path(rc.out) / "selection.json", selection_result_to_json(casf));
  write_json(fs::path(rc.out) / "baselines.json", {{"random", subsets_json(rc.seeds, random)},
                                                   {"heuristic", subsets_json(rc.seeds, heuristic)},
                                                   {"heuristic_fallback", fell_back},
                                                   {"ablations", ablations}});
  write_json(fs::path(rc.out) / "report.json", report_to_json(report));
  write_file_atomic(fs::path(rc.out) / "report.md", report_to_markdown(report));
  std::cout << "selected " << casf.subset.size() << " of " << d.size() << " samples; report in "
            << (fs::path(rc.out) / "report.md").string() << "\n";
  return 0;
}

int cmd_phase_init(const RunFlags& flags, const std::optional<std::string>& state_flag, const std::string& oracle,
                   bool force) {
  const RunConfig rc = flags.resolve();
  const fs::path path = resolve_state_path(state_flag);
  if (fs::exists(path) && !force) throw Error("state '" + path.string() + "' already exists (use --force to replace)");
  WriterLock lock(path);
  const Session session = open_session(rc);
  EngineState s = init_state(session, oracle_from_string(oracle));
  save_state_file(path, {rc, std::move(s)});
  std::cout << "initialized " << path.string() << ": " << session.dataset().size() << " samples, budget "
            << plan_phases(session.dataset().size(), session.config().rate, session.config().phases,
                           session.config().mode, session.config().preliminary_ratio).total()
            << " over " << session.config().phases << " phases\n";
  return 0;
}

void write_final(const StateFile& f) {
  const fs::path out = fs::path(f.config.out) / "subset.json";
  fs::create_directories(out.parent_path());
  write_json(out, selection_result_to_json(result_from_state(f.engine)));
  std::cout << "complete\n" << "final subset (" << f.engine.selected.size() << " samples) in " << out.string() << "\n";
}

int cmd_phase_next(const std::optional<std::string>& state_flag, const std::string& batch_out) {
  const fs::path path = resolve_state_path(state_flag);
  WriterLock lock(path);
  StateFile f = load_state_file(path);
  const Session session = open_session(f);
  if (f.engine.status == Status::complete) {
    write_final(f);
    return 0;
  }
  if (f.engine.status == Status::awaiting_annotation) {
    const auto missing = pending_ids(session, f.engine);
    std::cout << "phase " << f.engine.phase << ": " << missing.size() << " sample(s) await annotation:";
    for (const auto& id : missing) std::cout << ' ' << id;
    std::cout << "\n";
    return 0;
  }
  f.engine = advance(session, std::move(f.engine));
  save_state_file(path, f);
  const auto t = static_cast<std::size_t>(f.engine.phase);
  if (f.engine.status == Status::complete && f.engine.oracle == OracleKind::simulated) {
    write_final(f);
    return 0;
  }
  const fs::path batch = batch_out.empty() ? fs::path(f.config.out) / ("batch_phase" + std::to_string(t) + ".json")
                                           : fs::path(batch_out);
  if (batch.has_parent_path()) fs::create_directories(batch.parent_path());
  write_json(batch, {{"phase", t}, {"items", make_batch(session, f.engine)}});
  std::cout << "phase " << t << ": " << f.engine.phase_ids(t).size() << " sample(s) selected; batch in "
            << batch.string() << "\n";
  return 0;
}

int cmd_ingest(const std::optional<std::string>& state_flag, const std::string& file) {
  const fs::path path = resolve_state_path(state_flag);
  WriterLock lock(path);
  StateFile f = load_state_file(path);
  const Session session = open_session(f);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error&) {
    throw Error("annotation file '" + file + "' is not valid JSON");
  }
  const auto records = unblind(f.engine, blinded_scores_from_json(j));
  EngineState next = ingest_annotations(session, f.engine, records);
  if (!(next == f.engine)) {
    f.engine = std::move(next);
    save_state_file(path, f);
  }
  std::cout << "phase " << f.engine.phase << ": " << pending_ids(session, f.engine).size()
            << " sample(s) pending; status " << to_string(f.engine.status) << "\n";
  return 0;
}

int cmd_report(const std::optional<std::string>& state_flag, const std::optional<std::string>& out_flag) {
  const fs::path path = resolve_state_path(state_flag);
  const StateFile f = load_state_file(path);
  const Session session = open_session(f);
  const fs::path out = out_flag ? fs::path(*out_flag) : fs::path(f.config.out);
  fs::create_directories(out);
  nlohmann::json summary = live_report(session, f.engine);
  const Dataset& d = session.dataset();
  if (d.fully_annotated() && f.engine.status == Status::complete) {
    std::vector<std::vector<std::string>> random;
    for (auto seed : f.config.seeds) random.push_back(random_subset(d, session.config().rate, seed));
    ReportOptions opt;
    opt.dataset = fs::path(f.config.data).filename().string();
    opt.config_digest = config_digest(f.config, session.config());
    opt.alpha = f.config.alpha;
    opt.significance = f.config.significance;
    const auto report = build_report(d, {{"R", random, f.config.seeds}, {"CASF", {f.engine.selected_ids()}, {}}}, opt);
    summary["ranking_report"] = report_to_json(report);
    write_file_atomic(out / "report.md", report_to_markdown(report));
  }
  write_json(out / "report.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_serve(const std::optional<std::string>& state_flag, const RunFlags& flags, const std::string& host) {
  const fs::path path = resolve_state_path(state_flag);
  AnnotationService service(path);
  const int port = flags.port.value_or(load_state_file(path).config.port);
  httplib::Server server;
  // SO_REUSEPORT would let a second server share a busy port silently.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  service.bind(server);
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
  } else if (!server.bind_to_port(host, port)) {
    throw Error("port " + std::to_string(port) + " is busy or unavailable");
  }
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  if (!server.listen_after_bind()) throw Error("server stopped unexpectedly");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained active sampling for human evaluation of generated text"};
  app.require_subcommand(1);

  RunFlags run;
  std::optional<std::string> state;
  std::string oracle = "live", batch_out, ingest_file, host = "127.0.0.1";
  std::optional<std::string> report_out;
  bool force = false;

  auto* simulate = app.add_subcommand("simulate", "run the full comparison against the dataset's human scores");
  run.add_engine(simulate);
  run.add_evaluation(simulate);
  run.add_out(simulate);

  auto* init = app.add_subcommand("phase-init", "create a live session state file");
  run.add_engine(init);
  run.add_evaluation(init);
  run.add_out(init);
  run.add_service(init);
  init->add_option("--state", state, "state file (overrides CASF_STATE)");
  init->add_option("--oracle", oracle, "live or simulated")->check(CLI::IsMember({"live", "simulated"}));
  init->add_flag("--force", force, "replace an existing state file");

  auto* next = app.add_subcommand("phase-next", "run the next selection or report what is missing");
  next->add_option("--state", state, "state file (overrides CASF_STATE)");
  next->add_option("--batch-out", batch_out, "where to write the batch file");

  auto* ingest = app.add_subcommand("ingest", "merge a blinded annotation file into the state");
  ingest->add_option("--state", state, "state file (overrides CASF_STATE)");
  ingest->add_option("--file", ingest_file, "annotation JSON list")->required();

  auto* report = app.add_subcommand("report", "summarize the selected subset");
  report->add_option("--state", state, "state file (overrides CASF_STATE)");
  report->add_option("--out", report_out, "output directory");

  auto* serve = app.add_subcommand("serve", "serve the annotation REST API");
  serve->add_option("--state", state, "state file (overrides CASF_STATE)");
  serve->add_option("--port", run.port, "listen port (0 picks a free port)");
  serve->add_option("--host", host, "listen address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::cerr << "casf: error: " << msg.substr(0, msg.find('\n')) << "\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*simulate) return cmd_simulate(run);
    if (*init) return cmd_phase_init(run, state, oracle, force);
    if (*next) return cmd_phase_next(state, batch_out);
    if (*ingest) return cmd_ingest(state, ingest_file);
    if (*report) return cmd_report(state, report_out);
    if (*serve) return cmd_serve(state, run, host);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "casf: error: " << msg << "\n";
    return 1;
  }
  return 1;
}
