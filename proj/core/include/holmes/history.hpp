#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "holmes/grid.hpp"
#include "holmes/params.hpp"

namespace holmes {

/// Relative path of a run's pattern blob inside the run directory.
std::string pattern_ref_for(std::size_t run_index);

/// One exploration run: parameters, final pattern, routing path and the
/// embedding of the pattern at every node on the path.
struct Record {
  std::uint64_t run_index = 0;
  SystemParams theta;
  std::string pattern_ref;
  std::shared_ptr<const Grid> pattern;
  std::vector<std::string> path;
  std::map<std::string, std::vector<double>> emb;
  std::string goal_node;  ///< leaf whose goal space produced the run; empty for random runs
  bool faulted = false;  ///< rollout hit a numerical fault; pattern is the zero grid

  const std::string& leaf() const { return path.back(); }
};

/// The explicit memory of the exploration: append-only records plus a
/// per-node membership index.
class History {
 public:
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Record& operator[](std::size_t i) const { return records_[i]; }
  Record& operator[](std::size_t i) { return records_[i]; }
  std::span<const Record> records() const { return records_; }

  /// run_index must equal size().
  void append(Record record);

  /// Indices of records whose path visits `node`, in run order.
  const std::vector<std::size_t>& members(const std::string& node) const;
  std::size_t population(const std::string& node) const { return members(node).size(); }

  /// Extends a record's path by one node; used when a split reprojects history.
  void extend_path(std::size_t index, const std::string& node, std::vector<double> embedding);

  /// Replaces the embedding of a record at a node already on its path.
  void set_embedding(std::size_t index, const std::string& node, std::vector<double> embedding);

 private:
  std::vector<Record> records_;
  std::map<std::string, std::vector<std::size_t>> members_;
};

}  // namespace holmes
