#include "holmes/analysis.hpp"

#include "holmes/errors.hpp"

namespace holmes::analysis {

namespace {

constexpr bc::FeatureKind kKinds[] = {bc::FeatureKind::spectrum, bc::FeatureKind::elliptical,
                                      bc::FeatureKind::statistics};

fs::path projection_file(const fs::path& dir, bc::FeatureKind kind) {
  return dir / ("bc_" + std::string(bc::to_string(kind)) + ".proj");
}

}  // namespace

std::vector<Grid> reference_patterns(const ExplorationConfig& base, std::size_t count, std::uint64_t seed) {
  ExplorationConfig c = base;
  c.goal_space = GoalSpaceKind::random;
  c.guided = false;
  c.projection_dir.clear();
  c.n_total = count;
  c.n_init = count;
  c.train_every = count;
  c.seed = seed;
  Explorer explorer(c);
  explorer.run();
  std::vector<Grid> out;
  out.reserve(count);
  for (const Record& r : explorer.history().records()) out.push_back(*r.pattern);
  return out;
}

std::map<bc::FeatureKind, bc::BcProjection> fit_reference(std::span<const Grid> patterns,
                                                          const std::optional<fs::path>& out_dir) {
  std::map<bc::FeatureKind, bc::BcProjection> out;
  if (out_dir) fs::create_directories(*out_dir);
  for (const auto kind : kKinds) {
    std::vector<bc::FeatureVector> fvs;
    fvs.reserve(patterns.size());
    for (const Grid& g : patterns) fvs.push_back(bc::compute_features(kind, g));
    auto p = bc::fit_projection(fvs);
    if (out_dir) bc::save_projection(p, projection_file(*out_dir, kind));
    out.emplace(kind, std::move(p));
  }
  return out;
}

bc::BcProjection load_reference(const fs::path& dir, bc::FeatureKind kind) {
  return bc::load_projection(projection_file(dir, kind));
}

BcSelector BcSelector::parse(const std::string& s) {
  BcSelector sel;
  if (s.rfind("leaf:", 0) == 0) {
    sel.node = s.substr(5);
    if (sel.node.empty() || sel.node.find_first_not_of("01") != std::string::npos || sel.node[0] != '0')
      throw ConfigError("malformed node id in '" + s + "'");
  } else {
    sel.kind = bc::feature_kind_from_string(s);
  }
  return sel;
}

std::string BcSelector::to_string() const { return kind ? std::string(bc::to_string(*kind)) : "leaf:" + node; }

std::vector<std::vector<double>> analytic_descriptors(const History& history, const bc::BcProjection& projection) {
  std::vector<std::vector<double>> out;
  out.reserve(history.size());
  for (const Record& r : history.records())
    out.push_back(bc::project(projection, bc::compute_features(projection.kind, *r.pattern)));
  return out;
}

std::vector<std::vector<double>> node_embeddings(const HolmesTree& tree, const std::string& node,
                                                 std::span<const std::shared_ptr<const Grid>> patterns) {
  if (!tree.contains(node)) throw ConfigError("unknown node " + node);
  std::vector<std::vector<double>> out;
  out.reserve(patterns.size());
  for (const auto& g : patterns) out.push_back(tree.embed(node, *g));
  return out;
}

std::vector<std::vector<double>> normalize_embeddings(std::span<const std::vector<double>> embeddings) {
  std::vector<bc::FeatureVector> fvs;
  fvs.reserve(embeddings.size());
  for (const auto& e : embeddings) fvs.push_back({bc::FeatureKind::statistics, e});
  const auto p = bc::fit_projection(fvs);
  std::vector<std::vector<double>> out;
  out.reserve(fvs.size());
  for (const auto& fv : fvs) out.push_back(bc::project(p, fv));
  return out;
}

DiversityCurve diversity_curve(std::span<const std::vector<double>> descriptors, int bins,
                               std::span<const eval::PatternClass> classes, std::optional<eval::PatternClass> only) {
  if (only && classes.size() != descriptors.size()) throw ConfigError("class filter needs one class per descriptor");
  eval::BinGrid grid(bins);
  DiversityCurve curve;
  curve.occupied.reserve(descriptors.size());
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (!only || classes[i] == *only) grid.add(descriptors[i]);
    curve.occupied.push_back(grid.occupied());
  }
  return curve;
}

std::vector<eval::PatternClass> classify_history(const History& history, const eval::ClassifierConfig& config) {
  std::vector<eval::PatternClass> out;
  out.reserve(history.size());
  for (const Record& r : history.records()) out.push_back(eval::classify_pattern(*r.pattern, config));
  return out;
}

std::vector<std::shared_ptr<const Grid>> history_patterns(const History& history) {
  std::vector<std::shared_ptr<const Grid>> out;
  out.reserve(history.size());
  for (const Record& r : history.records()) out.push_back(r.pattern);
  return out;
}

std::vector<std::vector<double>> cka_matrix(const HolmesTree& tree, std::span<const std::string> nodes,
                                            std::span<const std::shared_ptr<const Grid>> stimuli) {
  std::vector<std::vector<std::vector<double>>> responses;
  for (const auto& n : nodes) responses.push_back(node_embeddings(tree, n, stimuli));
  std::vector<std::vector<double>> m(nodes.size(), std::vector<double>(nodes.size(), 1.0));
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j) m[i][j] = m[j][i] = eval::cka(responses[i], responses[j]);
  return m;
}

Divergence representation_divergence(const HolmesTree& latest, const HolmesTree& previous,
                                     std::span<const std::shared_ptr<const Grid>> stimuli) {
  Divergence d;
  for (const auto& leaf : latest.leaves())
    if (previous.contains(leaf)) d.leaves.push_back(leaf);
  if (d.leaves.size() < 2) throw ConfigError("representation divergence needs two leaves present in both trees");
  std::vector<std::vector<std::vector<double>>> now;
  for (const auto& leaf : d.leaves) now.push_back(node_embeddings(latest, leaf, stimuli));
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < now.size(); ++i)
    for (std::size_t j = i + 1; j < now.size(); ++j) {
      d.between += eval::cka(now[i], now[j]);
      ++pairs;
    }
  d.between /= static_cast<double>(pairs);
  for (std::size_t i = 0; i < d.leaves.size(); ++i) {
    d.self_per_leaf.push_back(eval::cka(now[i], node_embeddings(previous, d.leaves[i], stimuli)));
    d.self += d.self_per_leaf.back();
  }
  d.self /= static_cast<double>(d.leaves.size());
  return d;
}

}  // namespace holmes::analysis
