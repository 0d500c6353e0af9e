#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "holmes/grid.hpp"
#include "holmes/rng.hpp"

namespace holmes::cppn {

enum class Activation { identity, sine, gaussian, sigmoid, tanh, absolute };

inline constexpr int kActivationCount = 6;

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);
double apply(Activation a, double x);

struct Node {
  int id = 0;
  Activation act = Activation::identity;
  double bias = 0.0;
  friend bool operator==(const Node&, const Node&) = default;
};

struct Connection {
  int src = 0;
  int dst = 0;
  double weight = 0.0;
  bool enabled = true;
  friend bool operator==(const Connection&, const Connection&) = default;
};

/// Fixed node ids: three inputs (x, y, d) and one output.
inline constexpr int kInputX = 0;
inline constexpr int kInputY = 1;
inline constexpr int kInputD = 2;
inline constexpr int kOutput = 3;
inline constexpr int kFirstHidden = 4;

/// Feed-forward compositional pattern-producing network.
///
/// Inputs are the cell coordinates x, y in [-1, 1] and the normalized
/// distance to the grid center d in [-1, 1]. The output node sums its inputs
/// plus bias and is squashed to [0, 1] with (tanh + 1) / 2.
struct Genome {
  std::vector<Node> nodes;
  std::vector<Connection> connections;

  const Node* find(int id) const;
  int next_node_id() const;
  friend bool operator==(const Genome&, const Genome&) = default;
};

/// Checks node ids, finite weights and acyclicity. Throws ValidationError.
void validate(const Genome& g);

/// Topological evaluation order over all nodes. Throws ValidationError on cycles.
std::vector<int> topological_order(const Genome& g);

/// True when the enabled-or-disabled connection graph stays acyclic after adding src -> dst.
bool creates_cycle(const Genome& g, int src, int dst);

struct RenderOptions {
  /// Radius of the centered support disc as a fraction of min(height, width);
  /// cells outside are set to 0. Zero or negative disables masking.
  double mask_fraction = 0.25;
};

/// Evaluate the network at every cell. Pure function of (genome, shape, options).
Grid render_init_state(const Genome& g, GridShape shape, const RenderOptions& options = {});

struct GenomeSampling {
  int min_hidden = 1;
  int max_hidden = 4;
  double weight_range = 3.0;  ///< weights ~ U[-w, w]
  double bias_range = 1.0;    ///< non-input biases ~ U[-b, b]
};

/// Minimal fully feed-forward genome: every node connects to every later
/// node in the order inputs, hidden..., output.
Genome random_genome(Rng& rng, const GenomeSampling& sampling = {});

struct MutationRates {
  double weight_jitter_prob = 0.8;   ///< per connection (and per non-input bias)
  double weight_jitter_sigma = 0.5;
  double add_node_prob = 0.1;
  double add_connection_prob = 0.15;
  double activation_swap_prob = 0.1;  ///< per hidden node
  int max_connection_attempts = 20;

  static MutationRates none() { return {0.0, 0.5, 0.0, 0.0, 0.0, 20}; }
};

/// Returns a mutated copy; the result is always acyclic.
Genome mutate_genome(const Genome& g, Rng& rng, const MutationRates& rates = {});

}  // namespace holmes::cppn
