#pragma once

#include <array>
#include <cstdint>

#include "holmes/cppn.hpp"
#include "holmes/lenia.hpp"
#include "holmes/rng.hpp"

namespace holmes {

/// The full controllable parameter vector of one run.
struct SystemParams {
  lenia::UpdateRuleParams rule;
  cppn::Genome genome;
  std::uint64_t run_seed = 0;
  friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

struct Interval {
  double lo;
  double hi;
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

/// Sampling box and Gaussian mutation scales for the update rule.
struct ParameterSpace {
  Interval R{2.0, 20.0};
  Interval T{1.0, 20.0};
  Interval mu{0.0, 1.0};
  Interval sigma{0.001, 0.3};
  Interval beta{0.0, 1.0};

  double sigma_R = 0.5;
  double sigma_T = 0.5;
  double sigma_mu = 0.1;
  double sigma_sigma = 0.05;
  double sigma_beta = 0.1;

  cppn::GenomeSampling genome_sampling;
  cppn::MutationRates genome_mutation;
  bool mutate_genome = true;

  /// Caps R so the kernel support 2R + 1 fits in the grid.
  static ParameterSpace for_grid(GridShape shape);

  bool contains(const lenia::UpdateRuleParams& p) const;
};

/// Uniform draw of the update rule in the box plus a random genome.
SystemParams sample_random(const ParameterSpace& space, Rng& rng);

/// theta = clamp(theta_hat + N(0, sigma_M)) per field, genome mutated.
SystemParams mutate_parameters(const SystemParams& theta_hat, const ParameterSpace& space, Rng& rng);

}  // namespace holmes
