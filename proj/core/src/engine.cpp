#include "holmes/engine.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "holmes/errors.hpp"

namespace holmes {

std::string_view to_string(GoalSpaceKind k) {
  switch (k) {
    case GoalSpaceKind::holmes: return "holmes";
    case GoalSpaceKind::spectrum: return "spectrum";
    case GoalSpaceKind::elliptical: return "elliptical";
    case GoalSpaceKind::statistics: return "statistics";
    case GoalSpaceKind::random: return "random";
  }
  return "?";
}

GoalSpaceKind goal_space_from_string(std::string_view s) {
  for (auto k : {GoalSpaceKind::holmes, GoalSpaceKind::spectrum, GoalSpaceKind::elliptical, GoalSpaceKind::statistics,
                 GoalSpaceKind::random})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown goal space " + std::string(s));
}

bool ExplorationConfig::analytic() const {
  return goal_space == GoalSpaceKind::spectrum || goal_space == GoalSpaceKind::elliptical ||
         goal_space == GoalSpaceKind::statistics;
}

void ExplorationConfig::validate() const {
  if (n_total == 0 || n_init == 0 || train_every == 0) throw ConfigError("run counts must be positive");
  if (n_init > n_total) throw ConfigError("n_init must not exceed n_total");
  if (train_epochs < 0) throw ConfigError("train_epochs must be non-negative");
  if (steps < 1) throw ConfigError("steps must be at least 1");
  if (softmax_temperature <= 0.0) throw ConfigError("softmax temperature must be positive");
  if (envelope_inflation < 0.0) throw ConfigError("envelope inflation must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (new_fraction < 0.0 || new_fraction > 1.0) throw ConfigError("new_fraction must lie in [0, 1]");
  if (analytic() && projection_dir.empty()) throw ConfigError("analytic goal spaces need projection_dir");
  if (goal_space == GoalSpaceKind::holmes) architecture().validate();
  if (grid < 8) throw ConfigError("grid must be at least 8 cells");
}

std::string sample_goal_space(std::span<const std::string> leaves, const InterestScores& scores, bool guided,
                              double temperature, Rng& rng) {
  if (leaves.empty()) throw ConfigError("no leaves to sample from");
  if (!guided || leaves.size() == 1) return leaves[rng.index(leaves.size())];
  std::vector<double> logits(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto it = scores.find(leaves[i]);
    logits[i] = (it == scores.end() ? 0.0 : it->second) / temperature;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) total += (l = std::exp(l - top));
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (u < logits[i]) return leaves[i];
    u -= logits[i];
  }
  return leaves.back();
}

std::vector<double> sample_goal(const History& history, const std::string& leaf, double inflation, Rng& rng) {
  const auto& members = history.members(leaf);
  if (members.empty()) throw ConfigError("leaf " + leaf + " has no reached goals");
  std::vector<double> lo = history[members[0]].emb.at(leaf), hi = lo;
  for (std::size_t idx : members) {
    const auto& e = history[idx].emb.at(leaf);
    for (std::size_t k = 0; k < e.size(); ++k) {
      lo[k] = std::min(lo[k], e[k]);
      hi[k] = std::max(hi[k], e[k]);
    }
  }
  if (members.size() == 1)
    for (std::size_t k = 0; k < lo.size(); ++k) {
      lo[k] -= inflation;
      hi[k] += inflation;
    }
  std::vector<double> goal(lo.size());
  for (std::size_t k = 0; k < lo.size(); ++k) goal[k] = lo[k] + (hi[k] - lo[k]) * rng.uniform();
  return goal;
}

std::size_t select_parameters(const History& history, const std::string& leaf, std::span<const double> goal) {
  const auto& members = history.members(leaf);
  if (members.empty()) throw ConfigError("leaf " + leaf + " has no records");
  std::size_t best = members[0];
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t idx : members) {
    const auto& e = history[idx].emb.at(leaf);
    double d = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) d += (e[k] - goal[k]) * (e[k] - goal[k]);
    if (d < best_d) {
      best_d = d;
      best = idx;
    }
  }
  return best;
}

std::optional<InterestScores> ScriptedFeedback::request(const FeedbackRequest& request, const Explorer&) {
  const auto it = script_.find(request.stage);
  if (it == script_.end()) return std::nullopt;
  return it->second;
}

std::optional<InterestScores> SimulatedUser::request(const FeedbackRequest& request, const Explorer& explorer) {
  const History& h = explorer.history();
  while (classes_.size() < h.size()) classes_.push_back(eval::classify_pattern(*h[classes_.size()].pattern, classifier_));
  return eval::score_leaves(request.leaves, h, classes_, preference_);
}

Explorer::Explorer(ExplorationConfig config) : config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
  init_goal_space();
  if (config_.goal_space == GoalSpaceKind::holmes) tree_ = std::make_unique<HolmesTree>(config_.architecture(), rng_);
}

Explorer::Explorer(ExplorationConfig config, EngineState state)
    : config_(std::move(config)), rng_(0), tree_(std::move(state.tree)), history_(std::move(state.history)),
      scores_(std::move(state.scores)), stage_(state.stage) {
  config_.validate();
  init_goal_space();
  rng_.restore(state.rng_state);
  if (config_.goal_space == GoalSpaceKind::holmes && !tree_) throw IntegrityError("resumed state lacks a tree");
}

Explorer::~Explorer() = default;

void Explorer::init_goal_space() {
  space_ = ParameterSpace::for_grid(config_.shape());
  space_.mutate_genome = config_.mutate_genome;
  sim_ = std::make_unique<lenia::Simulator>(config_.shape());
  if (config_.analytic()) {
    const auto kind = bc::feature_kind_from_string(to_string(config_.goal_space));
    projection_ = bc::load_projection(std::filesystem::path(config_.projection_dir) /
                                      ("bc_" + std::string(bc::to_string(kind)) + ".proj"));
  }
}

std::vector<std::string> Explorer::leaves() const {
  if (tree_) return tree_->leaves();
  return {HolmesTree::kRoot};
}

std::vector<RouteStep> Explorer::embed(const Grid& pattern) const {
  if (tree_) return tree_->route(pattern);
  if (projection_) return {{HolmesTree::kRoot, bc::project(*projection_, bc::compute_features(projection_->kind, pattern))}};
  return {{HolmesTree::kRoot, {}}};
}

SystemParams Explorer::propose(std::string& goal_node) {
  if (history_.size() < config_.n_init || config_.goal_space == GoalSpaceKind::random) return sample_random(space_, rng_);
  std::vector<std::string> candidates;
  for (const auto& leaf : leaves())
    if (history_.population(leaf) > 0) candidates.push_back(leaf);
  goal_node = sample_goal_space(candidates, scores_, config_.guided, config_.softmax_temperature, rng_);
  const auto goal = sample_goal(history_, goal_node, config_.envelope_inflation, rng_);
  const std::size_t parent = select_parameters(history_, goal_node, goal);
  return mutate_parameters(history_[parent].theta, space_, rng_);
}

const Record& Explorer::explore_once(ExplorationSink* sink) {
  Record r;
  r.run_index = history_.size();
  r.pattern_ref = pattern_ref_for(r.run_index);
  r.theta = propose(r.goal_node);
  r.theta.run_seed = rng_.fork_seed();
  const Grid init = cppn::render_init_state(r.theta.genome, config_.shape());
  Grid final_state;
  try {
    sim_->set_rule(r.theta.rule);
    final_state = lenia::rollout(*sim_, init, config_.steps).final;
  } catch (const NumericalFault&) {
    final_state = Grid(config_.shape());
    r.faulted = true;
  }
  r.pattern = std::make_shared<const Grid>(quantize_f32(final_state));
  for (auto& step : embed(*r.pattern)) {
    r.path.push_back(step.node);
    r.emb[step.node] = std::move(step.embedding);
  }
  history_.append(std::move(r));
  const Record& out = history_[history_.size() - 1];
  if (sink) sink->on_record(out);
  return out;
}

StageReport Explorer::run_stage(ExplorationSink* sink, FeedbackSource* feedback) {
  StageReport report;
  report.stage = ++stage_;
  report.runs_done = history_.size();
  if (!tree_) {
    if (sink) sink->on_stage_end(*this, report);
    return report;
  }
  const std::size_t stage_start = history_.size() - std::min(history_.size(), config_.train_every);

  TrainConfig tc;
  tc.epochs = config_.train_epochs;
  tc.batch_size = config_.batch_size;
  tc.new_fraction = config_.new_fraction;
  tc.augment = config_.augment;
  tc.adam = config_.adam;
  for (const auto& leaf : tree_->leaves()) {
    TreeNode& node = tree_->node(leaf);
    if (node.module->frozen()) continue;
    const auto& members = history_.members(leaf);
    std::vector<TrainSample> samples;
    samples.reserve(members.size());
    for (std::size_t idx : members) samples.push_back({history_[idx].pattern.get(), idx >= stage_start});
    const auto chain = tree_->ancestors(leaf);
    report.reports.push_back(train_stage(*node.module, chain, samples, tc, rng_));
    report.trained.push_back(leaf);
    for (std::size_t idx : members) {
      auto e = tree_->embed(leaf, *history_[idx].pattern);
      report.reembedded.push_back({idx, leaf, e});
      history_.set_embedding(idx, leaf, std::move(e));
    }
  }
  if (sink) sink->on_stage_trained(report);

  std::string chosen;
  std::size_t chosen_pop = 0;
  for (const auto& leaf : tree_->leaves()) {
    const std::size_t pop = history_.population(leaf);
    if (tree_->check_saturation(leaf, config_.split, pop, history_.size()) && (chosen.empty() || pop > chosen_pop)) {
      chosen = leaf;
      chosen_pop = pop;
    }
  }
  if (!chosen.empty()) {
    std::vector<std::vector<double>> embeddings;
    for (std::size_t idx : history_.members(chosen)) embeddings.push_back(history_[idx].emb.at(chosen));
    report.split_node = chosen;
    report.split = tree_->split_node(chosen, embeddings, config_.split, rng_);
    if (report.split->split) {
      const auto parent_members = history_.members(chosen);
      reproject(*tree_, chosen, history_);
      for (std::size_t idx : parent_members) {
        const Record& r = history_[idx];
        if (r.path.size() >= 2 && r.path[r.path.size() - 2] == chosen)
          report.reembedded.push_back({idx, r.leaf(), r.emb.at(r.leaf())});
      }
      const auto inherited = scores_.find(chosen);
      if (inherited != scores_.end()) {
        const double s = inherited->second;
        scores_.erase(inherited);
        scores_[report.split->left] = s;
        scores_[report.split->right] = s;
      }
      if (sink) sink->on_split(report);
      if (config_.guided) {
        FeedbackRequest req{stage_, chosen, tree_->leaves(), scores_};
        if (sink) sink->on_feedback_requested(req);
        if (feedback)
          if (auto s = feedback->request(req, *this)) scores_ = std::move(*s);
      }
    }
  }
  if (sink) sink->on_stage_end(*this, report);
  return report;
}

void Explorer::run(ExplorationSink* sink, FeedbackSource* feedback, std::optional<int> stop_after_stage) {
  stop_ = false;
  while (history_.size() < config_.n_total) {
    explore_once(sink);
    if (history_.size() % config_.train_every == 0 || history_.size() == config_.n_total) {
      run_stage(sink, feedback);
      if (stop_ || (stop_after_stage && stage_ >= *stop_after_stage)) return;
    }
  }
}

}  // namespace holmes
