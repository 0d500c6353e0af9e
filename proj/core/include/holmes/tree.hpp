#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "holmes/embedding.hpp"
#include "holmes/history.hpp"

namespace holmes {

/// Two K-means centroids in the parent's latent space. Fixed once fitted.
struct Boundary {
  std::vector<double> left;
  std::vector<double> right;

  /// 0 for left, 1 for right; equidistant points go left.
  int side(std::span<const double> r) const;
};

struct KMeansResult {
  Boundary boundary;
  std::vector<int> labels;
  double inertia = 0.0;
  std::vector<double> restart_inertia;
};

/// Lloyd's algorithm with k = 2 and `restarts` distinct point-pair seeds;
/// the lowest-inertia solution is kept. Throws DegeneracyError when all
/// points coincide.
KMeansResult fit_boundary(std::span<const std::vector<double>> points, Rng& rng, int restarts = 10);

struct SplitPolicy {
  double plateau_eps = 20.0;
  int plateau_window = 50;
  std::size_t min_population = 500;
  int min_epochs = 200;
  std::size_t min_explored = 2000;
  int max_splits = 11;
};

struct TreeNode {
  std::string id;
  std::unique_ptr<EmbeddingModule> module;
  std::optional<Boundary> boundary;
  bool split_ineligible = false;

  bool leaf() const { return !boundary.has_value(); }
};

/// One step of a routing path.
struct RouteStep {
  std::string node;
  std::vector<double> embedding;
};

/// Outcome of a split request.
struct SplitOutcome {
  bool split = false;
  std::string reason;  ///< why a split was refused or aborted
  std::string left, right;
};

/// Dynamic binary hierarchy of embedding modules. Node ids are bit strings:
/// the root is "0" and the children of p are p + "0" and p + "1".
class HolmesTree {
 public:
  HolmesTree(nn::Architecture arch, Rng& init_rng);
  HolmesTree(HolmesTree&&) noexcept = default;
  HolmesTree& operator=(HolmesTree&&) noexcept = default;

  static constexpr const char* kRoot = "0";

  const nn::Architecture& architecture() const { return arch_; }
  bool contains(const std::string& id) const { return nodes_.contains(id); }
  const TreeNode& node(const std::string& id) const;
  TreeNode& node(const std::string& id);
  std::vector<std::string> node_ids() const;
  std::vector<std::string> leaves() const;
  int splits() const { return splits_; }

  /// Modules from the root down to the parent of `id`.
  std::vector<const EmbeddingModule*> ancestors(const std::string& id) const;

  /// Embedding of a grid at one node, evaluating the ancestor chain.
  std::vector<double> embed(const std::string& id, const Grid& o) const;

  /// Descends from the root to a leaf, encoding at every node.
  std::vector<RouteStep> route(const Grid& o) const;

  /// Plateau, population, epoch, exploration and split-budget conditions.
  bool check_saturation(const std::string& id, const SplitPolicy& policy, std::size_t population,
                        std::size_t total_explored) const;

  /// Freezes the node, fits its boundary on `embeddings` and creates two
  /// connected children. A degenerate boundary marks the node ineligible.
  SplitOutcome split_node(const std::string& id, std::span<const std::vector<double>> embeddings,
                          const SplitPolicy& policy, Rng& rng);

  /// Insert a restored node; used by checkpoint loading.
  void restore_node(TreeNode node);
  void restore_splits(int splits) { splits_ = splits; }

 private:
  HolmesTree() = default;
  friend HolmesTree read_tree(std::istream&, const std::function<std::unique_ptr<EmbeddingModule>(const std::string&)>&);

  nn::Architecture arch_;
  std::map<std::string, TreeNode> nodes_;
  int splits_ = 0;
};

/// Routes every record that ends at the freshly split node through its
/// boundary, using the stored parent embedding, and appends the child
/// embedding. Records already extended are left untouched.
void reproject(const HolmesTree& tree, const std::string& id, History& history);

/// Node table: ids, flags, boundary centroids (f64) and module references.
void write_tree(const HolmesTree& tree, std::ostream& os, const std::map<std::string, std::string>& module_refs);
HolmesTree read_tree(std::istream& is,
                     const std::function<std::unique_ptr<EmbeddingModule>(const std::string&)>& load_module_ref);

}  // namespace holmes
