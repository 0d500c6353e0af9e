#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "holmes/engine.hpp"
#include "holmes/serialization.hpp"

namespace holmes::service {

using serial::Json;

/// Immutable view of a run published at stage boundaries.
struct Snapshot {
  int stage = 0;
  std::size_t runs_done = 0;
  std::shared_ptr<const History> history;
  Json tree;
  std::set<std::string> nodes;
  std::set<std::string> leaves;
  InterestScores scores;
};

/// Bounded message queue of one event-stream client. Overflow drops the
/// client instead of blocking the publisher.
class Subscriber {
 public:
  explicit Subscriber(std::size_t capacity) : capacity_(capacity) {}

  /// False once the subscriber has been dropped or closed.
  bool push(std::string message);
  std::optional<std::string> pop(std::chrono::milliseconds wait);
  bool dropped() const;
  bool closed() const;
  void close();

 private:
  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<std::string> queue_;
  std::size_t capacity_;
  bool dropped_ = false;
  bool closed_ = false;
};

struct HubOptions {
  std::uint64_t seed = 0;                  ///< representative-set draws
  int representative_candidates = 750;
  std::size_t subscriber_capacity = 1024;
  double feedback_timeout_s = -1.0;        ///< negative waits for resume
  std::optional<std::filesystem::path> projection_dir;
};

enum class ScoreResult { accepted, negative, unknown_leaf };

/// Shared state between the exploration thread and request handlers.
class Hub {
 public:
  explicit Hub(HubOptions options = {});

  /// Replaces the snapshot from a live explorer or from loaded state.
  void publish(const Explorer& explorer);
  void publish(int stage, const History& history, const HolmesTree* tree, const InterestScores& scores);

  void record_completed(const Record& record);
  void emit(const Json& event);

  std::shared_ptr<const Snapshot> snapshot() const;
  Json status() const;
  Json tree() const;
  bool paused() const;
  std::size_t runs_done() const { return runs_done_.load(); }

  /// Leaf summary with representative image refs; nullopt when `leaf` is not a leaf.
  std::optional<Json> representatives(const std::string& leaf, std::size_t n);
  std::optional<std::vector<unsigned char>> pattern_png(std::size_t run) const;

  /// Cumulative binning curve over the snapshot history. Throws ConfigError
  /// for a malformed request and NoRunError when no projection is available.
  Json diversity(const std::string& bc, int bins, const std::string& cls);

  /// Marks a feedback pause as pending and announces it.
  void begin_feedback(const FeedbackRequest& request);
  /// Clears a pause no one waited on.
  void end_feedback();

  ScoreResult submit_score(const std::string& leaf, double score);
  /// Releases a pending feedback pause; false when nothing was pending.
  bool resume();

  /// Blocks the exploration thread until resume, timeout or shutdown.
  /// Returns the scores submitted since the last pause merged over the
  /// current ones, or nullopt when none were submitted.
  std::optional<InterestScores> await_feedback(const FeedbackRequest& request, const Explorer& explorer);

  void shutdown();
  bool stopping() const { return stopping_.load(); }

  /// New event-stream client; its first message is the current snapshot.
  std::shared_ptr<Subscriber> subscribe();

 private:
  Json status_locked() const;
  Json snapshot_event_locked() const;
  void publish_locked(std::shared_ptr<const Snapshot> snap);

  HubOptions options_;
  mutable std::mutex mutex_;
  std::condition_variable feedback_cv_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::vector<std::shared_ptr<const Grid>> patterns_;
  std::atomic<std::size_t> runs_done_{0};
  std::optional<FeedbackRequest> pending_;
  std::uint64_t resume_generation_ = 0;
  std::uint64_t pause_generation_ = 0;
  InterestScores submitted_;
  std::vector<std::shared_ptr<Subscriber>> subscribers_;
  std::map<std::tuple<int, std::string, std::size_t>, Json> representative_cache_;
  std::map<std::string, bc::BcProjection> projections_;
  std::atomic<bool> stopping_{false};
};

/// Forwards engine progress into the hub.
class HubSink : public ExplorationSink {
 public:
  explicit HubSink(Hub& hub) : hub_(hub) {}
  void on_record(const Record& record) override;
  void on_stage_trained(const StageReport& report) override;
  void on_split(const StageReport& report) override;
  void on_feedback_requested(const FeedbackRequest& request) override;
  void on_stage_end(const Explorer& explorer, const StageReport& report) override;

 private:
  Hub& hub_;
};

/// Feedback supplied through the service's score and resume endpoints.
class HubFeedback : public FeedbackSource {
 public:
  explicit HubFeedback(Hub& hub) : hub_(hub) {}
  std::optional<InterestScores> request(const FeedbackRequest& request, const Explorer& explorer) override {
    return hub_.await_feedback(request, explorer);
  }

 private:
  Hub& hub_;
};

}  // namespace holmes::service
