#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "holmes/bc.hpp"
#include "holmes/engine.hpp"
#include "holmes/eval.hpp"
#include "holmes/history.hpp"
#include "holmes/tree.hpp"

namespace holmes::analysis {

namespace fs = std::filesystem;

/// Final patterns of `count` random-exploration rollouts under the grid and
/// step settings of `base`.
std::vector<Grid> reference_patterns(const ExplorationConfig& base, std::size_t count, std::uint64_t seed);

/// Fits one projection per engineered descriptor; writes bc_<kind>.proj into
/// `out_dir` when given.
std::map<bc::FeatureKind, bc::BcProjection> fit_reference(std::span<const Grid> patterns,
                                                          const std::optional<fs::path>& out_dir = std::nullopt);

bc::BcProjection load_reference(const fs::path& dir, bc::FeatureKind kind);

/// Behavioral characterization used for evaluation: an engineered
/// descriptor or the embedding space of one tree node.
struct BcSelector {
  std::optional<bc::FeatureKind> kind;
  std::string node;

  static BcSelector parse(const std::string& s);
  std::string to_string() const;
};

/// Descriptors of every history record in an engineered space.
std::vector<std::vector<double>> analytic_descriptors(const History& history, const bc::BcProjection& projection);

/// Encodings of the given patterns by `node`'s module, whatever their route.
std::vector<std::vector<double>> node_embeddings(const HolmesTree& tree, const std::string& node,
                                                 std::span<const std::shared_ptr<const Grid>> patterns);

/// Projects embeddings to 8 normalized dimensions with a PCA fitted on the
/// embeddings themselves.
std::vector<std::vector<double>> normalize_embeddings(std::span<const std::vector<double>> embeddings);

/// Cumulative occupied bins after each run; runs excluded by the class
/// filter leave the count unchanged.
struct DiversityCurve {
  std::vector<std::size_t> occupied;
  std::size_t final() const { return occupied.empty() ? 0 : occupied.back(); }
};

DiversityCurve diversity_curve(std::span<const std::vector<double>> descriptors, int bins,
                               std::span<const eval::PatternClass> classes = {},
                               std::optional<eval::PatternClass> only = std::nullopt);

std::vector<eval::PatternClass> classify_history(const History& history, const eval::ClassifierConfig& config = {});

std::vector<std::shared_ptr<const Grid>> history_patterns(const History& history);

/// Pairwise CKA of the given nodes' responses to a common stimulus set.
std::vector<std::vector<double>> cka_matrix(const HolmesTree& tree, std::span<const std::string> nodes,
                                            std::span<const std::shared_ptr<const Grid>> stimuli);

/// Mean pairwise CKA between distinct leaves versus mean CKA of each leaf
/// with itself one stage earlier, over leaves present in both trees.
struct Divergence {
  std::vector<std::string> leaves;
  double between = 0.0;
  double self = 0.0;
  std::vector<double> self_per_leaf;
};

Divergence representation_divergence(const HolmesTree& latest, const HolmesTree& previous,
                                     std::span<const std::shared_ptr<const Grid>> stimuli);

}  // namespace holmes::analysis
