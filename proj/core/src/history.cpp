#include "holmes/history.hpp"

#include <algorithm>

#include "holmes/errors.hpp"

namespace holmes {

std::string pattern_ref_for(std::size_t run_index) {
  std::string digits = std::to_string(run_index);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return "patterns/" + digits + ".f32";
}

void History::append(Record record) {
  if (record.run_index != records_.size())
    throw ValidationError("record run_index " + std::to_string(record.run_index) + " does not follow history length " +
                          std::to_string(records_.size()));
  if (record.path.empty()) throw ValidationError("record has an empty path");
  for (const auto& id : record.path) {
    if (!record.emb.contains(id)) throw ValidationError("record lacks an embedding for node " + id);
    members_[id].push_back(records_.size());
  }
  records_.push_back(std::move(record));
}

const std::vector<std::size_t>& History::members(const std::string& node) const {
  static const std::vector<std::size_t> none;
  const auto it = members_.find(node);
  return it == members_.end() ? none : it->second;
}

void History::extend_path(std::size_t index, const std::string& node, std::vector<double> embedding) {
  Record& r = records_.at(index);
  r.path.push_back(node);
  r.emb[node] = std::move(embedding);
  auto& m = members_[node];
  const auto at = std::lower_bound(m.begin(), m.end(), index);
  if (at != m.end() && *at == index) throw ValidationError("record already routed through node " + node);
  m.insert(at, index);
}

void History::set_embedding(std::size_t index, const std::string& node, std::vector<double> embedding) {
  Record& r = records_.at(index);
  const auto it = r.emb.find(node);
  if (it == r.emb.end()) throw ValidationError("record has no embedding at node " + node);
  it->second = std::move(embedding);
}

}  // namespace holmes
