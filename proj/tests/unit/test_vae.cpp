#include <gtest/gtest.h>

#include <cmath>

#include "holmes/errors.hpp"
#include "holmes/nn/vae.hpp"
#include "holmes/rng.hpp"

namespace {

using holmes::Rng;
using namespace holmes::nn;

template <typename S>
std::vector<S> random_image(int side, Rng& rng) {
  std::vector<S> img(static_cast<std::size_t>(side) * side);
  for (auto& v : img) v = static_cast<S>(rng.uniform());
  return img;
}

TEST(Architecture, ParameterCountAt256) {
  VaeModel<float> m({.grid = 256}, false);
  EXPECT_EQ(m.architecture().stages(), 6);
  EXPECT_EQ(m.parameter_count(), 86225u);
  VaeModel<float> child({.grid = 256}, true);
  EXPECT_EQ(child.parameter_count(), 86225u + 272 + 4160 + 272 + 2);
}

TEST(Architecture, StageCountFollowsGrid) {
  EXPECT_EQ(Architecture{.grid = 128}.stages(), 5);
  EXPECT_EQ(Architecture{.grid = 16}.stages(), 2);
  EXPECT_THROW(VaeModel<float>({.grid = 100}, false), holmes::ConfigError);
  EXPECT_THROW(VaeModel<float>({.grid = 8}, false), holmes::ConfigError);
}

TEST(Architecture, TapsMatchAcrossEncoderAndDecoder) {
  for (int grid : {16, 32, 64, 128, 256}) {
    const Architecture a{.grid = grid};
    EXPECT_EQ(a.grid >> a.encoder_tap(), 4 << a.decoder_tap());
    EXPECT_GE(a.decoder_tap(), 1);
    EXPECT_LE(a.decoder_tap(), a.stages() - 1);
  }
}

TEST(Initialization, KaimingUniformBounds) {
  Rng rng(1);
  VaeModel<float> m({.grid = 32}, true);
  m.initialize(rng);
  for (const auto& b : m.blocks()) {
    const double bound = std::sqrt(6.0 / b.fan_in);
    double max_abs = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) max_abs = std::max(max_abs, std::abs(double(m.parameters()[b.offset + i])));
    if (b.bias) {
      EXPECT_EQ(max_abs, 0.0) << b.name;
    } else {
      EXPECT_LE(max_abs, bound) << b.name;
      if (b.size() >= 16) EXPECT_GT(max_abs, 0.5 * bound) << b.name;
    }
  }
}

TEST(Loss, KlZeroForStandardPosterior) {
  Rng rng(2);
  VaeModel<double> m({.grid = 16}, false);
  m.initialize(rng);
  const auto& w = m.block("encoder.head.weight");
  for (std::size_t i = 0; i < w.size(); ++i) m.parameters()[w.offset + i] = 0.0;
  const auto img = random_image<double>(16, rng);
  const std::vector<double> eps(16, 0.3);
  EXPECT_EQ(m.loss(img, eps, nullptr, false).kl, 0.0);
}

TEST(Loss, BceMinimumIsTargetEntropy) {
  for (double t : {0.05, 0.3, 0.5, 0.9}) {
    const double logit = std::log(t / (1.0 - t));
    const double entropy = -t * std::log(t) - (1.0 - t) * std::log(1.0 - t);
    EXPECT_NEAR(bce_with_logits(logit, t), entropy, 1e-12);
    EXPECT_GT(bce_with_logits(logit + 0.1, t), entropy);
    EXPECT_GT(bce_with_logits(logit - 0.1, t), entropy);
  }
  EXPECT_NEAR(bce_with_logits(800.0, 1.0), 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(bce_with_logits(-800.0, 1.0)));
}

TEST(Loss, KlNonNegative) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> m(16), lv(16);
    for (int k = 0; k < 16; ++k) {
      m[k] = rng.normal(0.0, 2.0);
      lv[k] = rng.normal(0.0, 2.0);
    }
    EXPECT_GE(gaussian_kl(m, lv), 0.0);
  }
}

TEST(Loss, ReconstructionIsSummedBce) {
  Rng rng(4);
  VaeModel<double> m({.grid = 16}, false);
  m.initialize(rng);
  const auto img = random_image<double>(16, rng);
  std::vector<double> eps(16);
  for (auto& e : eps) e = rng.normal();
  std::vector<double> logits;
  const auto terms = m.loss(img, eps, nullptr, false, 1.0, &logits);
  double ref = 0.0;
  for (std::size_t k = 0; k < img.size(); ++k) ref += bce_with_logits(logits[k], img[k]);
  EXPECT_NEAR(terms.reconstruction, ref, 1e-9);
  EXPECT_NEAR(terms.total, terms.reconstruction + terms.kl, 1e-12);
}

// Central differences on the double-precision model.
double max_relative_error(VaeModel<double>& m, const std::vector<double>& img, const std::vector<double>& eps,
                          const Trace<double>* parent, int samples, Rng& rng, std::vector<std::string>* visited) {
  m.zero_gradients();
  m.loss(img, eps, parent, true);
  const std::vector<double> analytic(m.gradients().begin(), m.gradients().end());
  double worst = 0.0;
  const double h = 1e-6;
  // Visit every block at least once, then random parameters.
  std::vector<std::size_t> indices;
  for (const auto& b : m.blocks()) indices.push_back(b.offset + rng.index(b.size()));
  while (static_cast<int>(indices.size()) < samples) indices.push_back(rng.index(m.parameter_count()));
  for (std::size_t idx : indices) {
    double& p = m.parameters()[idx];
    const double saved = p;
    p = saved + h;
    const double up = m.loss(img, eps, parent, false).total;
    p = saved - h;
    const double down = m.loss(img, eps, parent, false).total;
    p = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[idx]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[idx]) / denom);
    if (visited)
      for (const auto& b : m.blocks())
        if (idx >= b.offset && idx < b.offset + b.size()) visited->push_back(b.name);
  }
  return worst;
}

TEST(Gradient, RootModuleMatchesFiniteDifferences) {
  Rng rng(5);
  VaeModel<double> m({.grid = 16}, false);
  m.initialize(rng);
  const auto img = random_image<double>(16, rng);
  std::vector<double> eps(16);
  for (auto& e : eps) e = rng.normal();
  EXPECT_LT(max_relative_error(m, img, eps, nullptr, 200, rng, nullptr), 1e-4);
}

TEST(Gradient, ConnectedChildMatchesFiniteDifferences) {
  Rng rng(6);
  VaeModel<double> parent({.grid = 16}, false);
  parent.initialize(rng);
  VaeModel<double> child({.grid = 16}, true);
  child.initialize(rng);
  const auto img = random_image<double>(16, rng);
  Trace<double> trace;
  parent.encode(img, nullptr, &trace);
  std::vector<double> eps(16);
  for (auto& e : eps) e = rng.normal();
  std::vector<std::string> visited;
  EXPECT_LT(max_relative_error(child, img, eps, &trace, 200, rng, &visited), 1e-4);
  for (const char* name : {"connection.lf.weight", "connection.gfi.weight", "connection.lfi.weight",
                           "connection.recon.weight"})
    EXPECT_NE(std::find(visited.begin(), visited.end(), name), visited.end()) << name;
}

TEST(Gradient, ScaleIsLinear) {
  Rng rng(7);
  VaeModel<double> m({.grid = 16}, false);
  m.initialize(rng);
  const auto img = random_image<double>(16, rng);
  const std::vector<double> eps(16, 0.1);
  m.zero_gradients();
  m.loss(img, eps, nullptr, true, 1.0);
  const std::vector<double> g1(m.gradients().begin(), m.gradients().end());
  m.zero_gradients();
  m.loss(img, eps, nullptr, true, 0.25);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(m.gradients()[i], 0.25 * g1[i], 1e-12 + 1e-9 * std::abs(g1[i]));
}

TEST(Encode, DeterministicAndInputSensitive) {
  Rng rng(8);
  VaeModel<float> m({.grid = 32}, false);
  m.initialize(rng);
  std::vector<float> zero(32 * 32, 0.0f), hot(32 * 32, 0.0f);
  hot[32 * 16 + 16] = 1.0f;
  const auto a = m.encode(zero, nullptr);
  EXPECT_EQ(a, m.encode(zero, nullptr));
  const auto b = m.encode(hot, nullptr);
  double d = 0.0;
  for (int i = 0; i < 16; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_GT(d, 0.0);
}

TEST(Encode, TraceShapesAndChildRequiresParent) {
  Rng rng(9);
  VaeModel<float> parent({.grid = 64}, false), child({.grid = 64}, true);
  parent.initialize(rng);
  child.initialize(rng);
  const auto img = random_image<float>(64, rng);
  Trace<float> t;
  const auto mean = parent.encode(img, nullptr, &t);
  EXPECT_EQ(t.mean, mean);
  const int side = parent.architecture().tap_side();
  EXPECT_EQ(t.encoder_tap.size(), static_cast<std::size_t>(side * side * 16));
  EXPECT_EQ(t.decoder_tap.size(), t.encoder_tap.size());
  EXPECT_EQ(t.recon.size(), img.size());
  for (float v : t.recon) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_THROW(child.encode(img, nullptr), holmes::ConfigError);
  EXPECT_NO_THROW(child.encode(img, &t));
  // Decoding the parent mean reproduces the traced reconstruction.
  const auto logits = parent.decode(mean, nullptr);
  for (std::size_t k = 0; k < logits.size(); ++k) EXPECT_NEAR(1.0f / (1.0f + std::exp(-logits[k])), t.recon[k], 1e-6f);
}

TEST(Encode, WrongGridSize) {
  VaeModel<float> m({.grid = 32}, false);
  std::vector<float> img(16 * 16, 0.0f);
  EXPECT_THROW(m.encode(img, nullptr), holmes::ConfigError);
}

}  // namespace
