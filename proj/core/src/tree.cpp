#include "holmes/tree.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "holmes/binary_io.hpp"
#include "holmes/errors.hpp"

namespace holmes {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

struct Lloyd {
  std::vector<double> c0, c1;
  std::vector<int> labels;
  double inertia = 0.0;
};

Lloyd run_lloyd(std::span<const std::vector<double>> pts, std::vector<double> c0, std::vector<double> c1) {
  const std::size_t n = pts.size(), d = pts[0].size();
  Lloyd out;
  out.labels.assign(n, -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int l = squared_distance(pts[i], c1) < squared_distance(pts[i], c0) ? 1 : 0;
      if (l != out.labels[i]) {
        out.labels[i] = l;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> s0(d, 0.0), s1(d, 0.0);
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = out.labels[i] ? s1 : s0;
      ++(out.labels[i] ? n1 : n0);
      for (std::size_t k = 0; k < d; ++k) s[k] += pts[i][k];
    }
    // An emptied cluster keeps its previous centroid.
    if (n0) for (std::size_t k = 0; k < d; ++k) c0[k] = s0[k] / static_cast<double>(n0);
    if (n1) for (std::size_t k = 0; k < d; ++k) c1[k] = s1[k] / static_cast<double>(n1);
  }
  for (std::size_t i = 0; i < n; ++i) out.inertia += squared_distance(pts[i], out.labels[i] ? c1 : c0);
  out.c0 = std::move(c0);
  out.c1 = std::move(c1);
  return out;
}

}  // namespace

int Boundary::side(std::span<const double> r) const {
  return squared_distance(r, right) < squared_distance(r, left) ? 1 : 0;
}

KMeansResult fit_boundary(std::span<const std::vector<double>> points, Rng& rng, int restarts) {
  if (points.size() < 2) throw DegeneracyError("k-means needs at least two points");
  const std::size_t n = points.size();
  bool distinct = false;
  for (std::size_t i = 1; i < n && !distinct; ++i) distinct = points[i] != points[0];
  if (!distinct) throw DegeneracyError("all embeddings in the node are identical");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    std::size_t a = 0, b = 0;
    do {
      a = rng.index(n);
      b = rng.index(n);
    } while (points[a] == points[b]);
    Lloyd l = run_lloyd(points, points[a], points[b]);
    best.restart_inertia.push_back(l.inertia);
    if (l.inertia < best.inertia) {
      best.inertia = l.inertia;
      best.boundary = {std::move(l.c0), std::move(l.c1)};
      best.labels = std::move(l.labels);
    }
  }
  return best;
}

HolmesTree::HolmesTree(nn::Architecture arch, Rng& init_rng) : arch_(arch) {
  TreeNode root;
  root.id = kRoot;
  root.module = std::make_unique<EmbeddingModule>(arch, false, init_rng);
  nodes_.emplace(root.id, std::move(root));
}

const TreeNode& HolmesTree::node(const std::string& id) const {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw ConfigError("unknown tree node " + id);
  return it->second;
}

TreeNode& HolmesTree::node(const std::string& id) {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw ConfigError("unknown tree node " + id);
  return it->second;
}

std::vector<std::string> HolmesTree::node_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, n] : nodes_) out.push_back(id);
  return out;
}

std::vector<std::string> HolmesTree::leaves() const {
  std::vector<std::string> out;
  for (const auto& [id, n] : nodes_)
    if (n.leaf()) out.push_back(id);
  return out;
}

std::vector<const EmbeddingModule*> HolmesTree::ancestors(const std::string& id) const {
  node(id);
  std::vector<const EmbeddingModule*> chain;
  for (std::size_t len = 1; len < id.size(); ++len) chain.push_back(node(id.substr(0, len)).module.get());
  return chain;
}

std::vector<double> HolmesTree::embed(const std::string& id, const Grid& o) const {
  const auto chain = ancestors(id);
  const auto trace = ancestor_trace(chain, o);
  return node(id).module->encode(o, trace.empty() ? nullptr : &trace);
}

std::vector<RouteStep> HolmesTree::route(const Grid& o) const {
  std::vector<RouteStep> path;
  nn::Trace<float> trace;
  std::string id = kRoot;
  while (true) {
    const TreeNode& n = node(id);
    nn::Trace<float> next;
    auto r = n.module->encode(o, trace.empty() ? nullptr : &trace, n.leaf() ? nullptr : &next);
    path.push_back({id, r});
    if (n.leaf()) break;
    id += n.boundary->side(r) ? "1" : "0";
    trace = std::move(next);
  }
  return path;
}

bool HolmesTree::check_saturation(const std::string& id, const SplitPolicy& policy, std::size_t population,
                                  std::size_t total_explored) const {
  const TreeNode& n = node(id);
  if (!n.leaf() || n.split_ineligible) return false;
  if (splits_ >= policy.max_splits) return false;
  const auto& hist = n.module->loss_history();
  const auto window = static_cast<std::size_t>(policy.plateau_window);
  if (window == 0 || hist.size() < window) return false;
  const double mean = std::accumulate(hist.end() - static_cast<std::ptrdiff_t>(window), hist.end(), 0.0) /
                      static_cast<double>(window);
  return mean < policy.plateau_eps && population >= policy.min_population &&
         n.module->train_epochs() >= policy.min_epochs && total_explored >= policy.min_explored;
}

SplitOutcome HolmesTree::split_node(const std::string& id, std::span<const std::vector<double>> embeddings,
                                    const SplitPolicy& policy, Rng& rng) {
  TreeNode& n = node(id);
  SplitOutcome out;
  if (!n.leaf()) {
    out.reason = "node " + id + " is not a leaf";
    return out;
  }
  if (splits_ >= policy.max_splits) {
    out.reason = "split budget of " + std::to_string(policy.max_splits) + " exhausted";
    return out;
  }
  if (n.split_ineligible) {
    out.reason = "node " + id + " is split-ineligible";
    return out;
  }
  KMeansResult km;
  try {
    km = fit_boundary(embeddings, rng);
  } catch (const DegeneracyError& e) {
    n.split_ineligible = true;
    out.reason = std::string("degenerate boundary: ") + e.what();
    return out;
  }
  n.module->freeze();
  n.boundary = std::move(km.boundary);
  out.left = id + "0";
  out.right = id + "1";
  for (const auto& child_id : {out.left, out.right}) {
    TreeNode child;
    child.id = child_id;
    child.module = std::make_unique<EmbeddingModule>(arch_, true, rng);
    nodes_.emplace(child_id, std::move(child));
  }
  ++splits_;
  out.split = true;
  return out;
}

void HolmesTree::restore_node(TreeNode n) {
  const std::string id = n.id;
  nodes_.insert_or_assign(id, std::move(n));
}

void reproject(const HolmesTree& tree, const std::string& id, History& history) {
  const TreeNode& parent = tree.node(id);
  if (parent.leaf()) throw ConfigError("node " + id + " has no boundary to reproject through");
  const auto members = history.members(id);  // copy: extend_path grows the children's lists
  for (std::size_t idx : members) {
    const Record& r = history[idx];
    if (r.path.back() != id) continue;
    const std::string child = id + (parent.boundary->side(r.emb.at(id)) ? "1" : "0");
    history.extend_path(idx, child, tree.embed(child, *r.pattern));
  }
}

void write_tree(const HolmesTree& tree, std::ostream& os, const std::map<std::string, std::string>& module_refs) {
  io::write_magic(os, "HTRE");
  io::write_u32(os, 1);
  const auto& a = tree.architecture();
  for (int v : {a.grid, a.channels, a.hidden, a.latent}) io::write_u32(os, static_cast<std::uint32_t>(v));
  io::write_u32(os, static_cast<std::uint32_t>(tree.splits()));
  const auto ids = tree.node_ids();
  io::write_u32(os, static_cast<std::uint32_t>(ids.size()));
  for (const auto& id : ids) {
    const TreeNode& n = tree.node(id);
    io::write_string(os, id);
    io::write_u32(os, n.module->frozen() ? 1 : 0);
    io::write_u32(os, n.split_ineligible ? 1 : 0);
    const auto ref = module_refs.find(id);
    if (ref == module_refs.end()) throw ConfigError("no module reference for node " + id);
    io::write_string(os, ref->second);
    io::write_u32(os, n.boundary ? 1 : 0);
    if (n.boundary) {
      io::write_u32(os, static_cast<std::uint32_t>(n.boundary->left.size()));
      for (double v : n.boundary->left) io::write_f64(os, v);
      for (double v : n.boundary->right) io::write_f64(os, v);
    }
  }
  if (!os) throw IntegrityError("failed writing tree checkpoint");
}

HolmesTree read_tree(std::istream& is,
                     const std::function<std::unique_ptr<EmbeddingModule>(const std::string&)>& load_module_ref) {
  io::expect_magic(is, "HTRE");
  if (io::read_u32(is) != 1) throw ValidationError("unsupported tree checkpoint version");
  HolmesTree tree;
  tree.arch_.grid = static_cast<int>(io::read_u32(is));
  tree.arch_.channels = static_cast<int>(io::read_u32(is));
  tree.arch_.hidden = static_cast<int>(io::read_u32(is));
  tree.arch_.latent = static_cast<int>(io::read_u32(is));
  tree.splits_ = static_cast<int>(io::read_u32(is));
  const std::uint32_t count = io::read_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    TreeNode n;
    n.id = io::read_string(is);
    const bool frozen = io::read_u32(is) != 0;
    n.split_ineligible = io::read_u32(is) != 0;
    n.module = load_module_ref(io::read_string(is));
    if (!n.module || !(n.module->architecture() == tree.arch_))
      throw IntegrityError("module of node " + n.id + " does not match the tree architecture");
    if (n.module->frozen() != frozen) throw IntegrityError("freeze flag mismatch at node " + n.id);
    if (io::read_u32(is) != 0) {
      Boundary b;
      b.left.resize(io::read_u32(is));
      b.right.resize(b.left.size());
      for (double& v : b.left) v = io::read_f64(is);
      for (double& v : b.right) v = io::read_f64(is);
      n.boundary = std::move(b);
    }
    tree.nodes_.emplace(n.id, std::move(n));
  }
  if (!tree.nodes_.contains(HolmesTree::kRoot)) throw IntegrityError("tree checkpoint has no root");
  for (const auto& [id, n] : tree.nodes_) {
    const bool has_children = tree.nodes_.contains(id + "0") && tree.nodes_.contains(id + "1");
    if (has_children != !n.leaf()) throw IntegrityError("node " + id + " has inconsistent children");
  }
  return tree;
}

}  // namespace holmes
