#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "holmes/engine.hpp"
#include "holmes/serialization.hpp"

namespace holmes::store {

namespace fs = std::filesystem;

/// Little-endian f32 row-major pattern blob, 4 * H * W bytes.
void write_pattern(const Grid& g, const fs::path& file);
Grid read_pattern(const fs::path& file, GridShape shape);

/// 8-bit grayscale PNG with value round(255 a).
void write_png(const Grid& g, const fs::path& file);
std::vector<std::uint8_t> encode_png(const Grid& g);
Grid read_png(const fs::path& file);

/// SHA-256 (hex) over every record's serialized line and pattern bytes, in run order.
std::string history_digest(const History& history);

std::string pattern_name(std::size_t run_index);

/// Append-only writer for one run directory.
class RunStore {
 public:
  /// Starts a fresh run; fails if the directory already holds records.
  static RunStore create(const fs::path& dir, const ExplorationConfig& config);
  /// Reopens a run for continuation: drops records and files past the last
  /// committed stage.
  static RunStore reopen(const fs::path& dir, std::size_t committed_runs, int committed_stage);

  RunStore(RunStore&&) noexcept;
  RunStore& operator=(RunStore&&) noexcept;
  ~RunStore();

  const fs::path& dir() const { return dir_; }

  /// Pattern blob first, then the history line.
  void append_record(const Record& record);
  /// Re-embedding deltas, module blobs, tree table, then the engine marker.
  void commit_stage(const Explorer& explorer, const StageReport& report);
  void append_event(const serial::Json& event);
  void flush();

 private:
  explicit RunStore(fs::path dir);
  void open_streams();

  fs::path dir_;
  std::ofstream records_;
  std::ofstream events_;
  std::map<std::string, std::string> frozen_refs_;
};

/// Persists everything an Explorer produces.
class StoreSink : public ExplorationSink {
 public:
  explicit StoreSink(RunStore& store) : store_(store) {}
  void on_record(const Record& record) override;
  void on_stage_trained(const StageReport& report) override;
  void on_split(const StageReport& report) override;
  void on_feedback_requested(const FeedbackRequest& request) override;
  void on_stage_end(const Explorer& explorer, const StageReport& report) override;

 private:
  RunStore& store_;
};

struct LoadedRun {
  ExplorationConfig config;
  EngineState state;             ///< at the last committed stage
  std::size_t uncommitted = 0;   ///< complete records past that stage
  std::vector<Record> tail;      ///< those records, for read-only inspection
  std::map<int, fs::path> tree_checkpoints;
};

/// Reconstructs the state at the last committed stage. Throws NoRunError
/// when the directory holds no run and IntegrityError when checkpoints and
/// records disagree.
LoadedRun load_run(const fs::path& dir);

/// Loads the tree saved at a given stage.
HolmesTree load_tree(const fs::path& dir, int stage);

void export_png(const fs::path& dir, std::size_t run_index, const fs::path& out);

}  // namespace holmes::store
