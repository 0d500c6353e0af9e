#include "holmes/cppn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "holmes/errors.hpp"

namespace holmes::cppn {

namespace {

constexpr std::array<std::string_view, kActivationCount> kNames{"identity", "sine", "gaussian",
                                                                "sigmoid", "tanh", "absolute"};

bool is_input(int id) { return id == kInputX || id == kInputY || id == kInputD; }

Activation random_activation(Rng& rng) {
  return static_cast<Activation>(rng.index(kActivationCount));
}

}  // namespace

std::string_view to_string(Activation a) { return kNames[static_cast<std::size_t>(a)]; }

Activation activation_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == s) return static_cast<Activation>(i);
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

double apply(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::sine: return std::sin(x);
    case Activation::gaussian: return std::exp(-x * x);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::tanh: return std::tanh(x);
    case Activation::absolute: return std::abs(x);
  }
  return x;
}

const Node* Genome::find(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

int Genome::next_node_id() const {
  int next = kFirstHidden;
  for (const auto& n : nodes) next = std::max(next, n.id + 1);
  return next;
}

std::vector<int> topological_order(const Genome& g) {
  std::unordered_map<int, int> indegree;
  std::unordered_map<int, std::vector<int>> out;
  for (const auto& n : g.nodes) indegree[n.id] = 0;
  for (const auto& c : g.connections) {
    if (!indegree.count(c.src) || !indegree.count(c.dst))
      throw ValidationError("connection references an unknown node");
    ++indegree[c.dst];
    out[c.src].push_back(c.dst);
  }
  // Min-heap on id keeps the order deterministic.
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push(id);
  std::vector<int> order;
  while (!ready.empty()) {
    const int id = ready.top();
    ready.pop();
    order.push_back(id);
    for (int dst : out[id])
      if (--indegree[dst] == 0) ready.push(dst);
  }
  if (order.size() != g.nodes.size()) throw ValidationError("genome connection graph is cyclic");
  return order;
}

void validate(const Genome& g) {
  std::unordered_set<int> ids;
  for (const auto& n : g.nodes) {
    if (!ids.insert(n.id).second) throw ValidationError("duplicate node id");
    if (!std::isfinite(n.bias)) throw ValidationError("non-finite bias");
  }
  for (int required : {kInputX, kInputY, kInputD, kOutput})
    if (!ids.count(required)) throw ValidationError("genome is missing an input or output node");
  for (const auto& c : g.connections) {
    if (!std::isfinite(c.weight)) throw ValidationError("non-finite connection weight");
    if (is_input(c.dst)) throw ValidationError("connection into an input node");
    if (c.src == kOutput) throw ValidationError("connection out of the output node");
  }
  topological_order(g);
}

bool creates_cycle(const Genome& g, int src, int dst) {
  if (src == dst) return true;
  // A cycle appears iff src is reachable from dst.
  std::unordered_map<int, std::vector<int>> out;
  for (const auto& c : g.connections) out[c.src].push_back(c.dst);
  std::vector<int> stack{dst};
  std::unordered_set<int> seen{dst};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (id == src) return true;
    for (int next : out[id])
      if (seen.insert(next).second) stack.push_back(next);
  }
  return false;
}

Grid render_init_state(const Genome& g, GridShape shape, const RenderOptions& options) {
  validate(g);
  const std::vector<int> order = topological_order(g);
  std::unordered_map<int, std::size_t> slot;
  for (std::size_t i = 0; i < order.size(); ++i) slot[order[i]] = i;

  struct Incoming {
    std::size_t src;
    double weight;
  };
  std::vector<std::vector<Incoming>> incoming(order.size());
  for (const auto& c : g.connections)
    if (c.enabled) incoming[slot[c.dst]].push_back({slot[c.src], c.weight});
  std::vector<const Node*> node_at(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) node_at[i] = g.find(order[i]);

  Grid out(shape);
  std::vector<double> value(order.size(), 0.0);
  const double cy = 0.5 * (shape.height - 1);
  const double cx = 0.5 * (shape.width - 1);
  const double mask_radius = options.mask_fraction * std::min(shape.height, shape.width);
  for (int row = 0; row < shape.height; ++row) {
    for (int col = 0; col < shape.width; ++col) {
      if (options.mask_fraction > 0.0) {
        const double ry = row - cy, rx = col - cx;
        if (std::sqrt(ry * ry + rx * rx) > mask_radius) continue;
      }
      const double y = shape.height > 1 ? -1.0 + 2.0 * row / (shape.height - 1) : 0.0;
      const double x = shape.width > 1 ? -1.0 + 2.0 * col / (shape.width - 1) : 0.0;
      const double d = std::numbers::sqrt2 * std::sqrt(x * x + y * y) - 1.0;
      double result = 0.5;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const int id = order[i];
        if (id == kInputX) { value[i] = x; continue; }
        if (id == kInputY) { value[i] = y; continue; }
        if (id == kInputD) { value[i] = d; continue; }
        double s = node_at[i]->bias;
        for (const auto& in : incoming[i]) s += in.weight * value[in.src];
        if (id == kOutput) {
          result = 0.5 * (std::tanh(s) + 1.0);
          value[i] = result;
        } else {
          value[i] = apply(node_at[i]->act, s);
        }
      }
      out.at(row, col) = result;
    }
  }
  return out;
}

Genome random_genome(Rng& rng, const GenomeSampling& sampling) {
  Genome g;
  const int hidden = static_cast<int>(rng.integer(sampling.min_hidden, sampling.max_hidden));
  for (int id : {kInputX, kInputY, kInputD}) g.nodes.push_back({id, Activation::identity, 0.0});
  g.nodes.push_back({kOutput, Activation::identity, rng.uniform(-sampling.bias_range, sampling.bias_range)});
  std::vector<int> layer_order{kInputX, kInputY, kInputD};
  for (int h = 0; h < hidden; ++h) {
    const int id = kFirstHidden + h;
    const Activation act = random_activation(rng);
    g.nodes.push_back({id, act, rng.uniform(-sampling.bias_range, sampling.bias_range)});
    layer_order.push_back(id);
  }
  layer_order.push_back(kOutput);
  for (std::size_t j = 3; j < layer_order.size(); ++j)
    for (std::size_t i = 0; i < j; ++i)
      g.connections.push_back({layer_order[i], layer_order[j],
                               rng.uniform(-sampling.weight_range, sampling.weight_range), true});
  return g;
}

Genome mutate_genome(const Genome& parent, Rng& rng, const MutationRates& rates) {
  Genome g = parent;

  for (auto& c : g.connections)
    if (rng.bernoulli(rates.weight_jitter_prob)) c.weight += rng.normal(0.0, rates.weight_jitter_sigma);
  for (auto& n : g.nodes)
    if (!is_input(n.id) && rng.bernoulli(rates.weight_jitter_prob))
      n.bias += rng.normal(0.0, rates.weight_jitter_sigma);

  for (auto& n : g.nodes) {
    if (n.id < kFirstHidden || !rng.bernoulli(rates.activation_swap_prob)) continue;
    // Draw among the other activations.
    const auto current = static_cast<std::uint64_t>(n.act);
    std::uint64_t pick = rng.index(kActivationCount - 1);
    if (pick >= current) ++pick;
    n.act = static_cast<Activation>(pick);
  }

  if (rng.bernoulli(rates.add_node_prob)) {
    std::vector<std::size_t> enabled;
    for (std::size_t i = 0; i < g.connections.size(); ++i)
      if (g.connections[i].enabled) enabled.push_back(i);
    if (!enabled.empty()) {
      Connection& split = g.connections[enabled[rng.index(enabled.size())]];
      split.enabled = false;
      const int id = g.next_node_id();
      const Connection old = split;
      g.nodes.push_back({id, random_activation(rng), 0.0});
      g.connections.push_back({old.src, id, 1.0, true});
      g.connections.push_back({id, old.dst, old.weight, true});
    }
  }

  if (rng.bernoulli(rates.add_connection_prob)) {
    for (int attempt = 0; attempt < rates.max_connection_attempts; ++attempt) {
      const Node& s = g.nodes[rng.index(g.nodes.size())];
      const Node& d = g.nodes[rng.index(g.nodes.size())];
      if (s.id == kOutput || is_input(d.id) || s.id == d.id) continue;
      const bool exists = std::any_of(g.connections.begin(), g.connections.end(),
                                      [&](const Connection& c) { return c.src == s.id && c.dst == d.id; });
      if (exists || creates_cycle(g, s.id, d.id)) continue;
      g.connections.push_back({s.id, d.id, rng.uniform(-3.0, 3.0), true});
      break;
    }
  }
  return g;
}

}  // namespace holmes::cppn
