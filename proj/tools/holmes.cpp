#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "holmes/analysis.hpp"
#include "holmes/errors.hpp"
#include "holmes/serialization.hpp"
#include "holmes/store.hpp"

#ifdef HOLMES_WITH_SERVICE
#include "holmes/service/router.hpp"
#include "holmes/service/server.hpp"
#endif

namespace {

using namespace holmes;
namespace fs = std::filesystem;

std::atomic<bool> interrupted{false};

ExplorationConfig read_config(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open " + file.string());
  serial::Json j;
  try {
    is >> j;
  } catch (const serial::Json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return serial::config_from_json(j);
}

/// Progress lines on stderr at stage boundaries.
class ProgressSink : public ExplorationSink {
 public:
  void on_stage_trained(const StageReport& r) override {
    std::cerr << "stage " << r.stage << ": " << r.runs_done << " runs";
    for (std::size_t i = 0; i < r.trained.size(); ++i)
      if (!r.reports[i].epoch_losses.empty()) std::cerr << "  " << r.trained[i] << "=" << r.reports[i].epoch_losses.back();
    std::cerr << "\n";
  }
  void on_split(const StageReport& r) override {
    if (r.split && r.split->split)
      std::cerr << "  split " << r.split_node << " -> " << r.split->left << ", " << r.split->right << "\n";
    else if (r.split)
      std::cerr << "  split of " << r.split_node << " refused: " << r.split->reason << "\n";
  }
};

std::unique_ptr<FeedbackSource> make_feedback(const std::string& spec) {
  if (spec == "none") return nullptr;
  if (spec == "slp") return std::make_unique<SimulatedUser>(eval::PatternClass::SLP);
  if (spec == "tlp") return std::make_unique<SimulatedUser>(eval::PatternClass::TLP);
  throw ConfigError("feedback must be none, slp or tlp");
}

/// Creates a run from `fresh`, or continues the one already in `dir`.
struct OpenedRun {
  std::unique_ptr<Explorer> explorer;
  std::unique_ptr<store::RunStore> store;
};

OpenedRun open_run(const fs::path& dir, const std::optional<ExplorationConfig>& fresh) {
  OpenedRun out;
  if (fresh) {
    out.store = std::make_unique<store::RunStore>(store::RunStore::create(dir, *fresh));
    out.explorer = std::make_unique<Explorer>(*fresh);
    return out;
  }
  auto loaded = store::load_run(dir);
  const std::size_t runs = loaded.state.history.size();
  std::cerr << "resuming " << dir.string() << " at stage " << loaded.state.stage << " (" << runs << " runs, "
            << loaded.uncommitted << " uncommitted dropped)\n";
  out.store = std::make_unique<store::RunStore>(store::RunStore::reopen(dir, runs, loaded.state.stage));
  if (loaded.state.stage == 0)
    out.explorer = std::make_unique<Explorer>(loaded.config);
  else
    out.explorer = std::make_unique<Explorer>(loaded.config, std::move(loaded.state));
  return out;
}

int cmd_explore(const fs::path& config_file, const fs::path& out, std::optional<std::uint64_t> seed, bool guided,
                const std::string& feedback_spec, bool resume) {
  std::optional<ExplorationConfig> config;
  if (!resume) {
    config = read_config(config_file);
    if (seed) config->seed = *seed;
    if (guided) config->guided = true;
    config->validate();
  }
  auto run = open_run(out, config);
  store::StoreSink store_sink(*run.store);
  ProgressSink progress;
  FanoutSink sink({&store_sink, &progress});
  auto feedback = make_feedback(feedback_spec);
  run.explorer->run(&sink, feedback.get());
  run.store->flush();
  std::cerr << "done: " << run.explorer->history().size() << " runs, " << run.explorer->leaves().size()
            << " leaves, digest " << store::history_digest(run.explorer->history()) << "\n";
  return 0;
}

int cmd_reference(const fs::path& config_file, const fs::path& out, std::size_t count, std::uint64_t seed) {
  const auto config = read_config(config_file);
  std::cerr << "rolling out " << count << " random patterns\n";
  const auto patterns = analysis::reference_patterns(config, count, seed);
  analysis::fit_reference(patterns, out);
  std::cerr << "wrote projections to " << out << "\n";
  return 0;
}

int cmd_evaluate(const fs::path& dir, const std::string& bc, int bins, const std::string& cls,
                 std::optional<fs::path> projections, std::optional<fs::path> out) {
  auto loaded = store::load_run(dir);
  const History& history = loaded.state.history;
  const auto selector = analysis::BcSelector::parse(bc);
  std::vector<std::vector<double>> descriptors;
  if (selector.kind) {
    if (!projections) {
      if (loaded.config.projection_dir.empty()) throw ConfigError("--projections is required for this run");
      projections = loaded.config.projection_dir;
    }
    descriptors = analysis::analytic_descriptors(history, analysis::load_reference(*projections, *selector.kind));
  } else {
    if (!loaded.state.tree) throw ConfigError("run has no hierarchy");
    descriptors = analysis::normalize_embeddings(
        analysis::node_embeddings(*loaded.state.tree, selector.node, analysis::history_patterns(history)));
  }
  std::optional<eval::PatternClass> only;
  std::vector<eval::PatternClass> classes;
  if (cls != "all") {
    only = eval::pattern_class_from_string(cls);
    classes = analysis::classify_history(history);
  }
  const auto curve = analysis::diversity_curve(descriptors, bins, classes, only);
  const fs::path file = out ? *out : dir / "eval" / "diversity.csv";
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file);
  os << "run_index,occupied_bins\n";
  for (std::size_t i = 0; i < curve.occupied.size(); ++i) os << i << ',' << curve.occupied[i] << '\n';
  if (!os) throw IntegrityError("failed writing " + file.string());
  std::cout << selector.to_string() << " bins=" << bins << " class=" << cls << ": " << curve.final()
            << " occupied bins over " << curve.occupied.size() << " runs -> " << file.string() << "\n";
  return 0;
}

int cmd_rsa(const fs::path& dir, std::optional<fs::path> out) {
  auto loaded = store::load_run(dir);
  if (!loaded.state.tree) throw ConfigError("run has no hierarchy");
  const auto leaves = loaded.state.tree->leaves();
  const auto stimuli = analysis::history_patterns(loaded.state.history);
  const auto m = analysis::cka_matrix(*loaded.state.tree, leaves, stimuli);
  const fs::path file = out ? *out : dir / "eval" / "rsa.csv";
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file);
  os << "leaf";
  for (const auto& l : leaves) os << ',' << l;
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    os << leaves[i];
    for (double v : m[i]) os << ',' << v;
    os << '\n';
  }
  if (!os) throw IntegrityError("failed writing " + file.string());
  std::cout << leaves.size() << " leaves -> " << file.string() << "\n";
  return 0;
}

#ifdef HOLMES_WITH_SERVICE
int cmd_serve(const fs::path& dir, const fs::path& config_file, const std::string& address, std::uint16_t port,
              bool attach_live, const std::string& origin, std::optional<fs::path> projections) {
  std::unique_ptr<OpenedRun> live;
  std::optional<store::LoadedRun> loaded;
  if (attach_live) {
    std::optional<ExplorationConfig> fresh;
    if (!config_file.empty() && !fs::exists(dir / "config.json")) {
      fresh = read_config(config_file);
      fresh->validate();
    }
    live = std::make_unique<OpenedRun>(open_run(dir, fresh));
  } else {
    loaded = store::load_run(dir);
  }
  const ExplorationConfig& config = live ? live->explorer->config() : loaded->config;
  service::HubOptions options;
  options.seed = config.seed;
  options.feedback_timeout_s = config.feedback_timeout_s;
  if (!projections && !config.projection_dir.empty()) projections = config.projection_dir;
  options.projection_dir = projections;
  service::Hub hub(options);
  if (live)
    hub.publish(*live->explorer);
  else
    hub.publish(loaded->state.stage, loaded->state.history, loaded->state.tree.get(), loaded->state.scores);
  service::Server server(hub, {address, port, origin});
  const auto bound = server.start();
  std::cerr << "serving " << dir << " on http://" << address << ":" << bound << "\n";

  std::thread engine;
  std::atomic<bool> finished{!attach_live};
  service::HubSink hub_sink(hub);
  service::HubFeedback feedback(hub);
  std::unique_ptr<store::StoreSink> store_sink;
  ProgressSink progress;
  std::unique_ptr<FanoutSink> sink;
  if (live) {
    store_sink = std::make_unique<store::StoreSink>(*live->store);
    sink = std::make_unique<FanoutSink>(std::vector<ExplorationSink*>{store_sink.get(), &hub_sink, &progress});
    engine = std::thread([&] {
      live->explorer->run(sink.get(), &feedback);
      live->store->flush();
      std::cerr << "exploration finished; still serving\n";
      finished = true;
    });
  }
  std::signal(SIGINT, [](int) { interrupted = true; });
  std::signal(SIGTERM, [](int) { interrupted = true; });
  while (!interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  if (live) {
    live->explorer->request_stop();
    hub.shutdown();
    engine.join();
    live->store->flush();
  }
  hub.shutdown();
  server.stop();
  return 0;
}
#endif

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical goal exploration of Lenia patterns"};
  app.require_subcommand(1);

  fs::path config_file, out, run_dir;
  std::optional<std::uint64_t> seed;
  bool guided = false, resume = false;
  std::string feedback = "none";
  auto* explore = app.add_subcommand("explore", "Run or resume an exploration");
  explore->add_option("--config", config_file, "JSON exploration config")->check(CLI::ExistingFile);
  explore->add_option("--out", out, "Run directory")->required();
  explore->add_option("--seed", seed, "Override the config seed");
  explore->add_flag("--guided", guided, "Enable guided goal-space sampling");
  explore->add_option("--feedback", feedback, "Feedback at pauses: none, slp or tlp (simulated user)")
      ->check(CLI::IsMember({"none", "slp", "tlp"}));
  explore->add_flag("--resume", resume, "Continue the run in --out from its last committed stage");

  std::size_t count = 2000;
  std::uint64_t ref_seed = 0;
  auto* reference = app.add_subcommand("reference", "Fit descriptor projections on random rollouts");
  reference->add_option("--config", config_file, "JSON exploration config (grid and steps)")
      ->required()
      ->check(CLI::ExistingFile);
  reference->add_option("--out", out, "Output directory for bc_<kind>.proj")->required();
  reference->add_option("--count", count, "Number of reference rollouts")->check(CLI::PositiveNumber);
  reference->add_option("--seed", ref_seed, "Reference seed");

  std::string bc = "statistics", cls = "all";
  int bins = 20;
  std::optional<fs::path> projections, out_file;
  auto* evaluate = app.add_subcommand("evaluate", "Cumulative binning diversity of a run");
  evaluate->add_option("--run", run_dir, "Run directory")->required();
  evaluate->add_option("--bc", bc, "spectrum, elliptical, statistics or leaf:<id>");
  evaluate->add_option("--bins", bins, "Bins per dimension")->check(CLI::PositiveNumber);
  evaluate->add_option("--class", cls, "all, slp or tlp")->check(CLI::IsMember({"all", "slp", "tlp"}));
  evaluate->add_option("--projections", projections, "Directory of bc_<kind>.proj files");
  evaluate->add_option("--out", out_file, "CSV path (default <run>/eval/diversity.csv)");

  auto* rsa = app.add_subcommand("rsa", "Pairwise CKA between the final leaf modules");
  rsa->add_option("--run", run_dir, "Run directory")->required();
  rsa->add_option("--out", out_file, "CSV path (default <run>/eval/rsa.csv)");

  std::size_t index = 0;
  auto* export_png = app.add_subcommand("export-png", "Write a run's final pattern as a PNG");
  export_png->add_option("--run", run_dir, "Run directory")->required();
  export_png->add_option("--index", index, "Run index")->required();
  export_png->add_option("--out", out, "PNG path")->required();

#ifdef HOLMES_WITH_SERVICE
  std::uint16_t port = 8080;
  std::string address = "127.0.0.1", origin = "*";
  bool attach_live = false;
  auto* serve = app.add_subcommand("serve", "HTTP/WebSocket service over a run");
  serve->add_option("--run", run_dir, "Run directory")->required();
  serve->add_option("--config", config_file, "Config for a fresh live run (with --attach-live)");
  serve->add_option("--port", port, "Listening port");
  serve->add_option("--address", address, "Listening address");
  serve->add_option("--origin", origin, "Allowed CORS origin");
  serve->add_option("--projections", projections, "Directory of bc_<kind>.proj files for /diversity");
  serve->add_flag("--attach-live", attach_live, "Continue the exploration in-process, taking feedback over HTTP");
#endif

  CLI11_PARSE(app, argc, argv);
  try {
    if (*explore) {
      if (!resume && config_file.empty()) throw ConfigError("--config is required unless --resume is given");
      return cmd_explore(config_file, out, seed, guided, feedback, resume);
    }
    if (*reference) return cmd_reference(config_file, out, count, ref_seed);
    if (*evaluate) return cmd_evaluate(run_dir, bc, bins, cls, projections, out_file);
    if (*rsa) return cmd_rsa(run_dir, out_file);
    if (*export_png) {
      store::export_png(run_dir, index, out);
      return 0;
    }
#ifdef HOLMES_WITH_SERVICE
    if (*serve) return cmd_serve(run_dir, config_file, address, port, attach_live, origin, projections);
#endif
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
