#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "holmes/bc.hpp"
#include "holmes/embedding.hpp"
#include "holmes/eval.hpp"
#include "holmes/history.hpp"
#include "holmes/lenia.hpp"
#include "holmes/params.hpp"
#include "holmes/tree.hpp"

namespace holmes {

/// Space in which goals are sampled: the learned hierarchy, one fixed
/// analytic descriptor, or none (pure random exploration).
enum class GoalSpaceKind { holmes, spectrum, elliptical, statistics, random };
std::string_view to_string(GoalSpaceKind k);
GoalSpaceKind goal_space_from_string(std::string_view s);

using InterestScores = std::map<std::string, double>;

struct ExplorationConfig {
  std::size_t n_total = 5000;
  std::size_t n_init = 1000;
  std::size_t train_every = 100;  ///< N_T
  int train_epochs = 100;         ///< E
  int grid = 256;
  int steps = 200;
  std::uint64_t seed = 0;
  bool guided = false;
  double softmax_temperature = 1.0;
  GoalSpaceKind goal_space = GoalSpaceKind::holmes;
  double envelope_inflation = 0.1;
  double feedback_timeout_s = -1.0;  ///< negative waits forever
  std::string projection_dir;        ///< holds bc_<kind>.proj for analytic goal spaces

  SplitPolicy split;
  int batch_size = 128;
  double new_fraction = 0.3;
  AugmentConfig augment;
  AdamConfig adam;
  int channels = 16;
  int hidden = 64;
  int latent = 16;
  bool mutate_genome = true;

  nn::Architecture architecture() const { return {grid, channels, hidden, latent}; }
  GridShape shape() const { return {grid, grid}; }
  bool analytic() const;
  void validate() const;
};

/// Leaf drawn uniformly (non-guided) or with probability proportional to
/// exp(score / temperature) (guided). Missing scores count as 0.
std::string sample_goal_space(std::span<const std::string> leaves, const InterestScores& scores, bool guided,
                              double temperature, Rng& rng);

/// Uniform draw in the per-dimension envelope of the leaf's reached
/// embeddings; a single reached point is inflated by `inflation`.
std::vector<double> sample_goal(const History& history, const std::string& leaf, double inflation, Rng& rng);

/// History index of the record at the leaf nearest to the goal; ties go to
/// the earliest run.
std::size_t select_parameters(const History& history, const std::string& leaf, std::span<const double> goal);

struct FeedbackRequest {
  int stage = 0;
  std::string split_node;
  std::vector<std::string> leaves;
  InterestScores current;
};

/// Embedding refreshed or added to a past record during a stage.
struct ReembedEntry {
  std::size_t run_index = 0;
  std::string node;
  std::vector<double> embedding;
};

struct StageReport {
  int stage = 0;
  std::size_t runs_done = 0;
  std::vector<std::string> trained;
  std::vector<TrainReport> reports;
  std::vector<ReembedEntry> reembedded;
  std::optional<SplitOutcome> split;
  std::string split_node;
};

class Explorer;

/// Observer of engine progress, called on the exploration thread.
class ExplorationSink {
 public:
  virtual ~ExplorationSink() = default;
  virtual void on_record(const Record&) {}
  virtual void on_stage_trained(const StageReport&) {}
  virtual void on_split(const StageReport&) {}
  virtual void on_feedback_requested(const FeedbackRequest&) {}
  /// Stage fully processed (training, split, feedback); state is checkpointable.
  virtual void on_stage_end(const Explorer&, const StageReport&) {}
};

/// Forwards every notification to each sink in order.
class FanoutSink : public ExplorationSink {
 public:
  explicit FanoutSink(std::vector<ExplorationSink*> sinks) : sinks_(std::move(sinks)) {}
  void on_record(const Record& r) override {
    for (auto* s : sinks_) s->on_record(r);
  }
  void on_stage_trained(const StageReport& r) override {
    for (auto* s : sinks_) s->on_stage_trained(r);
  }
  void on_split(const StageReport& r) override {
    for (auto* s : sinks_) s->on_split(r);
  }
  void on_feedback_requested(const FeedbackRequest& r) override {
    for (auto* s : sinks_) s->on_feedback_requested(r);
  }
  void on_stage_end(const Explorer& e, const StageReport& r) override {
    for (auto* s : sinks_) s->on_stage_end(e, r);
  }

 private:
  std::vector<ExplorationSink*> sinks_;
};

/// Supplies interest scores at feedback pauses.
class FeedbackSource {
 public:
  virtual ~FeedbackSource() = default;
  /// New scores, or nullopt to keep the current ones.
  virtual std::optional<InterestScores> request(const FeedbackRequest& request, const Explorer& explorer) = 0;
};

/// Scores fixed per stage.
class ScriptedFeedback : public FeedbackSource {
 public:
  explicit ScriptedFeedback(std::map<int, InterestScores> script) : script_(std::move(script)) {}
  std::optional<InterestScores> request(const FeedbackRequest& request, const Explorer&) override;

 private:
  std::map<int, InterestScores> script_;
};

/// Engine state captured at a stage boundary.
struct EngineState {
  std::unique_ptr<HolmesTree> tree;
  History history;
  InterestScores scores;
  std::string rng_state;
  int stage = 0;
};

/// The exploration loop: random bootstrap, goal-directed runs, periodic
/// training, splits and feedback pauses.
class Explorer {
 public:
  explicit Explorer(ExplorationConfig config);
  Explorer(ExplorationConfig config, EngineState state);
  ~Explorer();

  const ExplorationConfig& config() const { return config_; }
  const History& history() const { return history_; }
  History& history() { return history_; }
  const HolmesTree* tree() const { return tree_.get(); }
  const InterestScores& scores() const { return scores_; }
  int stage() const { return stage_; }
  std::string rng_state() const { return rng_.state(); }
  std::vector<std::string> leaves() const;

  /// Runs until n_total records exist, or until `stop_after_stage` has
  /// completed, or until request_stop() is observed at a stage boundary.
  void run(ExplorationSink* sink = nullptr, FeedbackSource* feedback = nullptr,
           std::optional<int> stop_after_stage = std::nullopt);
  void request_stop() { stop_ = true; }

  /// Executes one run and returns its record.
  const Record& explore_once(ExplorationSink* sink = nullptr);

  /// Training, re-embedding, split and feedback for the current boundary.
  StageReport run_stage(ExplorationSink* sink, FeedbackSource* feedback);

  /// Embedding of a grid in an analytic goal space, or the path through the tree.
  std::vector<RouteStep> embed(const Grid& pattern) const;

  const bc::BcProjection* projection() const { return projection_ ? &*projection_ : nullptr; }

 private:
  void init_goal_space();
  SystemParams propose(std::string& goal_node);

  ExplorationConfig config_;
  ParameterSpace space_;
  Rng rng_;
  std::unique_ptr<HolmesTree> tree_;
  std::optional<bc::BcProjection> projection_;
  History history_;
  InterestScores scores_;
  int stage_ = 0;
  std::unique_ptr<lenia::Simulator> sim_;
  std::atomic<bool> stop_{false};
};

/// Simulated user: scores each leaf by the number of patterns of the
/// preferred class it holds.
class SimulatedUser : public FeedbackSource {
 public:
  explicit SimulatedUser(eval::PatternClass preference, eval::ClassifierConfig classifier = {})
      : preference_(preference), classifier_(classifier) {}
  std::optional<InterestScores> request(const FeedbackRequest& request, const Explorer& explorer) override;

 private:
  eval::PatternClass preference_;
  eval::ClassifierConfig classifier_;
  std::vector<eval::PatternClass> classes_;
};

}  // namespace holmes
