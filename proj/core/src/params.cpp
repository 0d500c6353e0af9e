#include "holmes/params.hpp"

#include <algorithm>

namespace holmes {

ParameterSpace ParameterSpace::for_grid(GridShape shape) {
  ParameterSpace space;
  const double max_radius = 0.5 * (std::min(shape.height, shape.width) - 1);
  space.R.hi = std::min(space.R.hi, max_radius);
  return space;
}

bool ParameterSpace::contains(const lenia::UpdateRuleParams& p) const {
  auto in = [](const Interval& i, double v) { return v >= i.lo && v <= i.hi; };
  return in(R, p.R) && in(T, p.T) && in(mu, p.mu) && in(sigma, p.sigma) &&
         std::all_of(p.beta.begin(), p.beta.end(), [&](double b) { return in(beta, b); });
}

SystemParams sample_random(const ParameterSpace& space, Rng& rng) {
  SystemParams theta;
  theta.run_seed = rng.next_u64();
  Rng local(theta.run_seed);
  auto& r = theta.rule;
  r.R = local.uniform(space.R.lo, space.R.hi);
  r.T = local.uniform(space.T.lo, space.T.hi);
  r.mu = local.uniform(space.mu.lo, space.mu.hi);
  r.sigma = local.uniform(space.sigma.lo, space.sigma.hi);
  for (double& b : r.beta) b = local.uniform(space.beta.lo, space.beta.hi);
  theta.genome = cppn::random_genome(local, space.genome_sampling);
  return theta;
}

SystemParams mutate_parameters(const SystemParams& theta_hat, const ParameterSpace& space, Rng& rng) {
  SystemParams theta = theta_hat;
  theta.run_seed = rng.next_u64();
  Rng local(theta.run_seed);
  auto& r = theta.rule;
  r.R = space.R.clamp(r.R + local.normal(0.0, space.sigma_R));
  r.T = space.T.clamp(r.T + local.normal(0.0, space.sigma_T));
  r.mu = space.mu.clamp(r.mu + local.normal(0.0, space.sigma_mu));
  r.sigma = space.sigma.clamp(r.sigma + local.normal(0.0, space.sigma_sigma));
  for (double& b : r.beta) b = space.beta.clamp(b + local.normal(0.0, space.sigma_beta));
  if (space.mutate_genome) theta.genome = cppn::mutate_genome(theta_hat.genome, local, space.genome_mutation);
  return theta;
}

}  // namespace holmes
