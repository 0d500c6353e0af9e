#include <gtest/gtest.h>

#include <cmath>

#include "holmes/errors.hpp"
#include "holmes/lenia.hpp"
#include "holmes/rng.hpp"

namespace {

using holmes::Grid;
using holmes::GridShape;
using holmes::Rng;
using namespace holmes::lenia;

Grid random_grid(GridShape shape, Rng& rng) {
  Grid g(shape);
  for (double& v : g.data()) v = rng.uniform();
  return g;
}

// Scalar reference: kernel evaluated per cell, direct circular convolution.
Grid direct_step(const Grid& a, const UpdateRuleParams& p) {
  const int h = a.height(), w = a.width();
  std::vector<double> k(a.size(), 0.0);
  double total = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dy = std::min(y, h - y), dx = std::min(x, w - x);
      const double r = std::sqrt(dy * dy + dx * dx) / p.R;
      double v = 0.0;
      if (r < 1.0) {
        const double br = 3.0 * r;
        const int idx = static_cast<int>(std::floor(br));
        const double q = br - idx;
        const double core = (q <= 0.0 || q >= 1.0) ? 0.0 : std::exp(4.0 - 1.0 / (q * (1.0 - q)));
        v = p.beta[idx] * core;
      }
      k[y * w + x] = v;
      total += v;
    }
  Grid out(a.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double u = 0.0;
      for (int ky = 0; ky < h; ++ky)
        for (int kx = 0; kx < w; ++kx) u += k[ky * w + kx] / total * a.wrapped(y - ky, x - kx);
      const double g = 2.0 * std::exp(-(u - p.mu) * (u - p.mu) / (2.0 * p.sigma * p.sigma)) - 1.0;
      out.at(y, x) = std::clamp(a.at(y, x) + g / p.T, 0.0, 1.0);
    }
  return out;
}

double max_abs_diff(const Grid& a, const Grid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

TEST(KernelCore, PeakAtHalf) {
  EXPECT_DOUBLE_EQ(kernel_core(0.5), 1.0);
  EXPECT_EQ(kernel_core(0.0), 0.0);
  EXPECT_EQ(kernel_core(1.0), 0.0);
}

TEST(Kernel, UnitSumAndSupport) {
  Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    UpdateRuleParams p;
    p.R = rng.uniform(2.0, 20.0);
    p.beta = {rng.uniform(), rng.uniform(), rng.uniform()};
    if (p.beta[0] + p.beta[1] + p.beta[2] < 1e-3) continue;
    const KernelSpec k = build_kernel(p, {64, 64});
    double s = 0.0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const double v = k.values[y * 64 + x];
        EXPECT_GE(v, 0.0);
        s += v;
        const double dy = std::min(y, 64 - y), dx = std::min(x, 64 - x);
        if (std::sqrt(dy * dy + dx * dx) >= p.R) EXPECT_EQ(v, 0.0);
      }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Kernel, SingleRingSuppressesOuterRings) {
  UpdateRuleParams p;
  p.R = 13.0;
  p.beta = {1.0, 0.0, 0.0};
  const KernelSpec k = build_kernel(p, {64, 64});
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double dy = std::min(y, 64 - y), dx = std::min(x, 64 - x);
      const double r = std::sqrt(dy * dy + dx * dx) / p.R;
      if (r >= 1.0 / 3.0) EXPECT_EQ(k.values[y * 64 + x], 0.0) << y << "," << x;
    }
}

TEST(Kernel, IdenticalRingsForUniformBeta) {
  const std::array<double, 3> beta{1.0, 1.0, 1.0};
  for (double q : {0.1, 0.3, 0.5, 0.8})
    for (int ring = 0; ring < 3; ++ring)
      EXPECT_NEAR(kernel_shell((ring + q) / 3.0, beta), kernel_core(q), 1e-12);
}

TEST(Kernel, GridTooSmallIsConfigError) {
  UpdateRuleParams p;
  p.R = 10.0;
  EXPECT_THROW(build_kernel(p, {20, 64}), holmes::ConfigError);
}

TEST(Growth, Fixtures) {
  const double mu = 0.3, sigma = 0.05;
  EXPECT_DOUBLE_EQ(growth(mu, mu, sigma), 1.0);
  const double d = sigma * std::sqrt(2.0 * std::log(2.0));
  EXPECT_NEAR(growth(mu + d, mu, sigma), 0.0, 1e-12);
  EXPECT_NEAR(growth(mu - d, mu, sigma), 0.0, 1e-12);
  EXPECT_LT(growth(mu + 10 * sigma, mu, sigma), -1.0 + 1e-10);
}

TEST(Step, ZeroGridIsFixedPoint) {
  UpdateRuleParams p;
  p.R = 5;
  p.mu = 0.3;
  p.sigma = 0.05;
  ASSERT_LT(growth(0.0, p.mu, p.sigma), 0.0);
  const Grid zero({32, 32});
  EXPECT_EQ(step(zero, build_kernel(p, zero.shape()), p), zero);
  EXPECT_EQ(rollout(zero, p, 20).final, zero);
}

TEST(Step, ConstantGridStaysConstant) {
  UpdateRuleParams p;
  p.R = 6;
  p.T = 4;
  p.mu = 0.4;
  p.sigma = 0.1;
  for (double a : {0.1, 0.35, 0.5, 0.9}) {
    const Grid g({32, 32}, a);
    const Grid out = step(g, build_kernel(p, g.shape()), p);
    EXPECT_LT(out.max() - out.min(), 1e-9);
    EXPECT_NEAR(out.at(0, 0), std::clamp(a + growth(a, p.mu, p.sigma) / p.T, 0.0, 1.0), 1e-9);
  }
}

TEST(Step, MatchesDirectConvolution) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    UpdateRuleParams p;
    p.R = rng.uniform(2.0, 15.0);
    p.T = rng.uniform(1.0, 20.0);
    p.mu = rng.uniform(0.0, 1.0);
    p.sigma = rng.uniform(0.001, 0.3);
    p.beta = {rng.uniform(), rng.uniform(), rng.uniform()};
    const Grid a = random_grid({32, 32}, rng);
    EXPECT_LT(max_abs_diff(step(a, build_kernel(p, a.shape()), p), direct_step(a, p)), 1e-6);
  }
}

TEST(Step, NonSquareGridMatchesDirect) {
  Rng rng(5);
  UpdateRuleParams p;
  p.R = 6.5;
  p.mu = 0.2;
  p.sigma = 0.06;
  const Grid a = random_grid({24, 40}, rng);
  EXPECT_LT(max_abs_diff(step(a, build_kernel(p, a.shape()), p), direct_step(a, p)), 1e-6);
}

TEST(Step, ShiftEquivariant) {
  Rng rng(8);
  UpdateRuleParams p;
  p.R = 7;
  p.mu = 0.25;
  p.sigma = 0.04;
  const Grid a = random_grid({48, 48}, rng);
  Simulator sim(a.shape());
  sim.set_rule(p);
  const Grid lhs = sim.step(roll(a, 5, -9));
  const Grid rhs = roll(sim.step(a), 5, -9);
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-6);
}

TEST(Rollout, OneStepEqualsStep) {
  Rng rng(2);
  UpdateRuleParams p;
  p.R = 5;
  const Grid a = random_grid({32, 32}, rng);
  EXPECT_EQ(rollout(a, p, 1).final, step(a, build_kernel(p, a.shape()), p));
}

TEST(Rollout, DeterministicAndInRange) {
  Rng rng(4);
  UpdateRuleParams p;
  p.R = 8;
  p.T = 5;
  p.mu = 0.2;
  p.sigma = 0.03;
  const Grid a = random_grid({64, 64}, rng);
  const Rollout r1 = rollout(a, p, 30, 10);
  const Rollout r2 = rollout(a, p, 30, 10);
  EXPECT_EQ(r1.final, r2.final);
  EXPECT_EQ(r1.frames.size(), 2u);  // steps 10 and 20; the final state is kept separately
  for (const Grid& f : r1.frames) {
    EXPECT_GE(f.min(), 0.0);
    EXPECT_LE(f.max(), 1.0);
  }
}

TEST(Step, NaNRaisesNumericalFault) {
  UpdateRuleParams p;
  p.R = 4;
  Grid a({16, 16}, 0.5);
  a.at(3, 3) = std::nan("");
  Simulator sim(a.shape());
  sim.set_rule(p);
  try {
    sim.step(a, 7);
    FAIL() << "expected NumericalFault";
  } catch (const holmes::NumericalFault& e) {
    EXPECT_EQ(e.step(), 7);
  }
}

}  // namespace
