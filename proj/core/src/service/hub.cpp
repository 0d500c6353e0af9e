#include "holmes/service/hub.hpp"

#include "holmes/analysis.hpp"
#include "holmes/errors.hpp"
#include "holmes/eval.hpp"
#include "holmes/store.hpp"

namespace holmes::service {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Json tree_json(int stage, const History& history, const HolmesTree* tree, const InterestScores& scores) {
  Json nodes = Json::array();
  const std::vector<std::string> ids = tree ? tree->node_ids() : std::vector<std::string>{HolmesTree::kRoot};
  for (const auto& id : ids) {
    Json n;
    n["id"] = id;
    n["parent"] = id.size() > 1 ? Json(id.substr(0, id.size() - 1)) : Json(nullptr);
    Json children = Json::array();
    bool leaf = true;
    if (tree) {
      const TreeNode& node = tree->node(id);
      leaf = node.leaf();
      if (!leaf) children = {id + "0", id + "1"};
      n["frozen"] = node.module->frozen();
      n["epochs"] = node.module->train_epochs();
      n["split_ineligible"] = node.split_ineligible;
    } else {
      n["frozen"] = false;
      n["epochs"] = 0;
      n["split_ineligible"] = false;
    }
    n["children"] = children;
    n["leaf"] = leaf;
    n["population"] = tree ? history.population(id) : history.size();
    const auto s = scores.find(id);
    n["score"] = s == scores.end() ? Json(nullptr) : Json(s->second);
    nodes.push_back(std::move(n));
  }
  return {{"stage", stage}, {"runs_done", history.size()}, {"nodes", std::move(nodes)}};
}

Json request_json(const FeedbackRequest& r) {
  return {{"stage", r.stage}, {"split_node", r.split_node}, {"leaves", r.leaves}, {"current", r.current}};
}

}  // namespace

bool Subscriber::push(std::string message) {
  {
    std::lock_guard lock(mutex_);
    if (dropped_ || closed_) return false;
    if (queue_.size() >= capacity_) {
      dropped_ = true;
      queue_.clear();
    } else {
      queue_.push_back(std::move(message));
    }
  }
  ready_.notify_all();
  return !dropped();
}

std::optional<std::string> Subscriber::pop(std::chrono::milliseconds wait) {
  std::unique_lock lock(mutex_);
  ready_.wait_for(lock, wait, [&] { return !queue_.empty() || dropped_ || closed_; });
  if (queue_.empty() || dropped_) return std::nullopt;
  std::string m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

bool Subscriber::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

bool Subscriber::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

void Subscriber::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  ready_.notify_all();
}

Hub::Hub(HubOptions options) : options_(std::move(options)) {
  auto empty = std::make_shared<Snapshot>();
  empty->history = std::make_shared<History>();
  empty->tree = tree_json(0, *empty->history, nullptr, {});
  empty->nodes = empty->leaves = {HolmesTree::kRoot};
  snapshot_ = std::move(empty);
}

void Hub::publish(const Explorer& explorer) {
  publish(explorer.stage(), explorer.history(), explorer.tree(), explorer.scores());
}

void Hub::publish(int stage, const History& history, const HolmesTree* tree, const InterestScores& scores) {
  auto snap = std::make_shared<Snapshot>();
  snap->stage = stage;
  snap->runs_done = history.size();
  snap->history = std::make_shared<History>(history);
  snap->tree = tree_json(stage, history, tree, scores);
  if (tree) {
    for (const auto& id : tree->node_ids()) snap->nodes.insert(id);
    for (const auto& id : tree->leaves()) snap->leaves.insert(id);
  } else {
    snap->nodes = snap->leaves = {HolmesTree::kRoot};
  }
  snap->scores = scores;
  std::lock_guard lock(mutex_);
  publish_locked(std::move(snap));
}

void Hub::publish_locked(std::shared_ptr<const Snapshot> snap) {
  for (std::size_t i = patterns_.size(); i < snap->history->size(); ++i) patterns_.push_back((*snap->history)[i].pattern);
  if (runs_done_.load() < snap->runs_done) runs_done_ = snap->runs_done;
  snapshot_ = std::move(snap);
}

void Hub::record_completed(const Record& record) {
  {
    std::lock_guard lock(mutex_);
    if (record.run_index == patterns_.size()) patterns_.push_back(record.pattern);
    runs_done_ = record.run_index + 1;
  }
  Json e = {{"type", "run_completed"}, {"run", record.run_index}, {"leaf", record.leaf()}, {"faulted", record.faulted}};
  if (!record.goal_node.empty()) e["goal_node"] = record.goal_node;
  emit(e);
}

void Hub::emit(const Json& event) {
  const std::string text = event.dump();
  std::lock_guard lock(mutex_);
  std::erase_if(subscribers_, [&](const std::shared_ptr<Subscriber>& s) { return !s->push(text); });
}

std::shared_ptr<const Snapshot> Hub::snapshot() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

Json Hub::status_locked() const {
  return {{"stage", snapshot_->stage},
          {"runs_done", runs_done_.load()},
          {"paused", pending_.has_value()},
          {"pending_feedback", pending_ ? request_json(*pending_) : Json(nullptr)}};
}

Json Hub::status() const {
  std::lock_guard lock(mutex_);
  return status_locked();
}

Json Hub::tree() const { return snapshot()->tree; }

bool Hub::paused() const {
  std::lock_guard lock(mutex_);
  return pending_.has_value();
}

Json Hub::snapshot_event_locked() const {
  return {{"type", "snapshot"}, {"status", status_locked()}, {"tree", snapshot_->tree}};
}

std::shared_ptr<Subscriber> Hub::subscribe() {
  auto sub = std::make_shared<Subscriber>(options_.subscriber_capacity);
  std::lock_guard lock(mutex_);
  sub->push(snapshot_event_locked().dump());
  subscribers_.push_back(sub);
  return sub;
}

std::optional<Json> Hub::representatives(const std::string& leaf, std::size_t n) {
  const auto snap = snapshot();
  if (!snap->leaves.contains(leaf)) return std::nullopt;
  const auto key = std::make_tuple(snap->stage, leaf, n);
  {
    std::lock_guard lock(mutex_);
    if (const auto it = representative_cache_.find(key); it != representative_cache_.end()) return it->second;
  }
  const History& h = *snap->history;
  std::vector<std::size_t> members;
  std::vector<std::vector<double>> descriptors;
  for (const Record& r : h.records()) {
    const auto e = r.emb.find(leaf);
    if (e == r.emb.end() || r.leaf() != leaf) continue;
    members.push_back(r.run_index);
    descriptors.push_back(e->second);
  }
  std::vector<std::size_t> chosen;
  if (n > 0 && !members.empty()) {
    Rng rng(options_.seed ^ fnv1a(leaf) ^ (static_cast<std::uint64_t>(snap->stage) << 32));
    try {
      chosen = eval::representative_set(descriptors, n, options_.representative_candidates, rng);
    } catch (const DegeneracyError&) {
      for (std::size_t i = 0; i < std::min(n, members.size()); ++i) chosen.push_back(i);
    }
  }
  Json reps = Json::array();
  for (std::size_t i : chosen) {
    const std::size_t run = members[i];
    reps.push_back({{"run", run}, {"image", "/patterns/" + std::to_string(run) + ".png"}});
  }
  const auto score = snap->scores.find(leaf);
  Json out = {{"leaf", leaf},
              {"stage", snap->stage},
              {"population", members.size()},
              {"score", score == snap->scores.end() ? Json(nullptr) : Json(score->second)},
              {"representatives", std::move(reps)}};
  std::lock_guard lock(mutex_);
  representative_cache_.emplace(key, out);
  return out;
}

std::optional<std::vector<unsigned char>> Hub::pattern_png(std::size_t run) const {
  std::shared_ptr<const Grid> g;
  {
    std::lock_guard lock(mutex_);
    if (run >= patterns_.size() || !patterns_[run]) return std::nullopt;
    g = patterns_[run];
  }
  return store::encode_png(*g);
}

Json Hub::diversity(const std::string& bc_name, int bins, const std::string& cls) {
  if (bins < 1) throw ConfigError("bins must be positive");
  const auto selector = analysis::BcSelector::parse(bc_name);
  if (!selector.kind) throw ConfigError("the service evaluates engineered descriptors only");
  std::optional<eval::PatternClass> only;
  if (cls != "all") only = eval::pattern_class_from_string(cls);
  if (!options_.projection_dir) throw NoRunError("no reference projections configured");
  const auto snap = snapshot();
  bc::BcProjection projection;
  {
    std::lock_guard lock(mutex_);
    auto it = projections_.find(bc_name);
    if (it == projections_.end()) {
      try {
        it = projections_.emplace(bc_name, analysis::load_reference(*options_.projection_dir, *selector.kind)).first;
      } catch (const std::exception& e) {
        throw NoRunError(e.what());
      }
    }
    projection = it->second;
  }
  const auto descriptors = analysis::analytic_descriptors(*snap->history, projection);
  std::vector<eval::PatternClass> classes;
  if (only) classes = analysis::classify_history(*snap->history);
  const auto curve = analysis::diversity_curve(descriptors, bins, classes, only);
  return {{"bc", bc_name}, {"bins", bins}, {"class", cls}, {"stage", snap->stage}, {"occupied", curve.occupied}};
}

void Hub::begin_feedback(const FeedbackRequest& request) {
  {
    std::lock_guard lock(mutex_);
    pending_ = request;
    pause_generation_ = resume_generation_;
  }
  Json e = request_json(request);
  e["type"] = "feedback_requested";
  emit(e);
}

void Hub::end_feedback() {
  std::lock_guard lock(mutex_);
  pending_.reset();
}

ScoreResult Hub::submit_score(const std::string& leaf, double score) {
  std::lock_guard lock(mutex_);
  const bool known = pending_ ? std::find(pending_->leaves.begin(), pending_->leaves.end(), leaf) != pending_->leaves.end()
                              : snapshot_->leaves.contains(leaf);
  if (!known) return ScoreResult::unknown_leaf;
  if (!(score >= 0.0) || !std::isfinite(score)) return ScoreResult::negative;
  submitted_[leaf] = score;
  return ScoreResult::accepted;
}

bool Hub::resume() {
  {
    std::lock_guard lock(mutex_);
    if (!pending_) return false;
    ++resume_generation_;
  }
  feedback_cv_.notify_all();
  return true;
}

std::optional<InterestScores> Hub::await_feedback(const FeedbackRequest& request, const Explorer& explorer) {
  publish(explorer);
  bool announced;
  {
    std::lock_guard lock(mutex_);
    announced = pending_ && pending_->stage == request.stage && pending_->split_node == request.split_node;
  }
  if (!announced) begin_feedback(request);
  std::unique_lock lock(mutex_);
  const auto released = [&] { return resume_generation_ != pause_generation_ || stopping_.load(); };
  if (options_.feedback_timeout_s < 0)
    feedback_cv_.wait(lock, released);
  else
    feedback_cv_.wait_for(lock, std::chrono::duration<double>(options_.feedback_timeout_s), released);
  pending_.reset();
  InterestScores submitted;
  std::swap(submitted, submitted_);
  std::erase_if(submitted, [&](const auto& kv) {
    return std::find(request.leaves.begin(), request.leaves.end(), kv.first) == request.leaves.end();
  });
  lock.unlock();
  emit({{"type", "resumed"}, {"stage", request.stage}, {"applied", submitted}});
  if (submitted.empty()) return std::nullopt;
  InterestScores merged = request.current;
  for (const auto& [k, v] : submitted) merged[k] = v;
  return merged;
}

void Hub::shutdown() {
  stopping_ = true;
  feedback_cv_.notify_all();
  std::lock_guard lock(mutex_);
  for (auto& s : subscribers_) s->close();
  subscribers_.clear();
}

void HubSink::on_record(const Record& record) { hub_.record_completed(record); }

void HubSink::on_stage_trained(const StageReport& report) {
  Json losses = Json::object();
  Json skipped = Json::array();
  for (std::size_t i = 0; i < report.trained.size(); ++i) {
    const auto& r = report.reports[i];
    if (r.skipped) skipped.push_back(report.trained[i]);
    if (!r.epoch_losses.empty()) losses[report.trained[i]] = r.epoch_losses.back();
  }
  hub_.emit({{"type", "stage_trained"},
             {"stage", report.stage},
             {"runs_done", report.runs_done},
             {"trained", report.trained},
             {"skipped", skipped},
             {"losses", losses}});
}

void HubSink::on_split(const StageReport& report) {
  if (!report.split || !report.split->split) return;
  hub_.emit({{"type", "split_occurred"},
             {"stage", report.stage},
             {"parent", report.split_node},
             {"children", {report.split->left, report.split->right}}});
}

void HubSink::on_feedback_requested(const FeedbackRequest& request) { hub_.begin_feedback(request); }

void HubSink::on_stage_end(const Explorer& explorer, const StageReport&) {
  hub_.end_feedback();
  hub_.publish(explorer);
}

}  // namespace holmes::service
