#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "holmes/embedding.hpp"
#include "holmes/errors.hpp"

namespace {

using namespace holmes;

Grid random_grid(int side, Rng& rng) {
  Grid g({side, side});
  for (double& v : g.data()) v = rng.uniform();
  return g;
}

// Smooth blob with a per-image center and radius, so the set has structure to learn.
Grid blob(int side, double cy, double cx, double radius) {
  Grid g({side, side});
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      g.at(y, x) = std::exp(-d2 / (2.0 * radius * radius));
    }
  return g;
}

std::vector<Grid> blob_set(int side, int count, Rng& rng) {
  std::vector<Grid> out;
  for (int i = 0; i < count; ++i)
    out.push_back(blob(side, rng.uniform(3.0, side - 4.0), rng.uniform(3.0, side - 4.0), rng.uniform(1.5, 4.0)));
  return out;
}

std::vector<TrainSample> samples_of(const std::vector<Grid>& grids, bool is_new = false) {
  std::vector<TrainSample> out;
  for (const auto& g : grids) out.push_back({&g, is_new});
  return out;
}

TEST(Augment, ZeroProbabilitiesIsIdentity) {
  Rng rng(1), data(2);
  const Grid g = random_grid(16, data);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(augment(g, rng, AugmentConfig::none()), g);
}

TEST(Augment, TranslationAndFlipsPreserveMass) {
  Rng rng(3), data(4);
  const Grid g = random_grid(32, data);
  AugmentConfig cfg;
  cfg.translate_prob = cfg.flip_h_prob = cfg.flip_v_prob = 1.0;
  std::vector<double> sorted_in = g.data();
  std::sort(sorted_in.begin(), sorted_in.end());
  for (int i = 0; i < 20; ++i) {
    const Grid a = augment(g, rng, cfg);
    std::vector<double> sorted_out = a.data();
    std::sort(sorted_out.begin(), sorted_out.end());
    EXPECT_EQ(sorted_out, sorted_in);
  }
}

TEST(Augment, DoubleFlipRestoresGrid) {
  Rng data(5);
  const Grid g = random_grid(16, data);
  EXPECT_EQ(flip_horizontal(flip_horizontal(g)), g);
  EXPECT_EQ(flip_vertical(flip_vertical(g)), g);
}

TEST(Augment, TranslationIsAnExactRoll) {
  Rng data(6);
  const Grid g = random_grid(16, data);
  AugmentConfig cfg = AugmentConfig::none();
  cfg.translate_prob = 1.0;
  Rng rng(7), mirror(7);
  const Grid a = augment(g, rng, cfg);
  ASSERT_TRUE(mirror.bernoulli(1.0));
  const int dy = static_cast<int>(mirror.integer(-8, 8));
  const int dx = static_cast<int>(mirror.integer(-8, 8));
  EXPECT_EQ(a, roll(g, dy, dx));
}

TEST(Augment, RotationAndZoomStayInRange) {
  Rng rng(8), data(9);
  const Grid g = random_grid(32, data);
  AugmentConfig cfg;
  cfg.rotate_prob = cfg.zoom_prob = 1.0;
  for (int i = 0; i < 5; ++i) {
    const Grid a = augment(g, rng, cfg);
    EXPECT_GE(a.min(), 0.0);
    EXPECT_LE(a.max(), 1.0);
  }
}

TEST(Adam, FirstStepMovesEachParameterByLearningRate) {
  std::vector<float> p{1.0f, -2.0f, 0.5f};
  const std::vector<float> g{0.3f, -4.0f, 1e-3f};
  Adam adam(p.size());
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adam.step(p, g, cfg);
  EXPECT_NEAR(p[0], 1.0f - 1e-3f, 1e-6);
  EXPECT_NEAR(p[1], -2.0f + 1e-3f, 1e-6);
  EXPECT_NEAR(p[2], 0.5f - 1e-3f, 2e-6);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, MatchesScalarReference) {
  std::vector<float> p{0.7f};
  Adam adam(1);
  const AdamConfig cfg;
  double ref = 0.7, m = 0.0, v = 0.0;
  for (int t = 1; t <= 50; ++t) {
    const double grad = std::sin(t) + 0.1 * ref;
    const std::vector<float> g{static_cast<float>(grad)};
    adam.step(p, g, cfg);
    const double gd = grad + cfg.weight_decay * ref;
    m = 0.9 * m + 0.1 * gd;
    v = 0.999 * v + 0.001 * gd * gd;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    ref -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
  }
  EXPECT_NEAR(p[0], ref, 1e-5);
}

TEST(ImportanceSampler, SplitsDrawsThirtySeventy) {
  std::vector<Grid> grids(100, Grid({16, 16}));
  std::vector<TrainSample> s;
  for (int i = 0; i < 100; ++i) s.push_back({&grids[i], i >= 90});
  Rng rng(1);
  const auto idx = importance_sample(s, 0.3, rng);
  ASSERT_EQ(idx.size(), 100u);
  const auto fresh = std::count_if(idx.begin(), idx.end(), [](std::size_t i) { return i >= 90; });
  EXPECT_EQ(fresh, 30);
}

TEST(ImportanceSampler, AllNewIsUniform) {
  std::vector<Grid> grids(4, Grid({16, 16}));
  const auto s = samples_of(grids, true);
  Rng rng(2);
  std::map<std::size_t, int> counts;
  for (int rep = 0; rep < 2500; ++rep)
    for (std::size_t i : importance_sample(s, 0.3, rng)) ++counts[i];
  double chi2 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) chi2 += std::pow(counts[i] - 2500.0, 2) / 2500.0;
  EXPECT_LT(chi2, 11.34);  // 3 dof, p = 0.01
}

TEST(ImportanceSampler, AllNewMatchesAllOld) {
  std::vector<Grid> grids(7, Grid({16, 16}));
  Rng a(3), b(3);
  EXPECT_EQ(importance_sample(samples_of(grids, true), 0.3, a), importance_sample(samples_of(grids, false), 0.3, b));
}

TEST(EmbeddingModule, ZeroAndOneHotGridsEmbedDifferently) {
  Rng init(1);
  EmbeddingModule m({.grid = 16}, false, init);
  Grid zero({16, 16}), hot({16, 16});
  hot.at(8, 8) = 1.0;
  const auto a = m.encode(zero, nullptr), b = m.encode(hot, nullptr);
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_GT(d, 0.0);
  EXPECT_EQ(a, m.encode(zero, nullptr));
}

TEST(TrainStage, ZeroEpochsLeavesParametersUnchanged) {
  Rng init(1), data(2), rng(3);
  EmbeddingModule m({.grid = 16}, false, init);
  const std::vector<float> before(m.model().parameters().begin(), m.model().parameters().end());
  const auto grids = blob_set(16, 8, data);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto report = train_stage(m, {}, samples_of(grids), cfg, rng);
  EXPECT_FALSE(report.skipped);
  const std::vector<float> after(m.model().parameters().begin(), m.model().parameters().end());
  EXPECT_EQ(before, after);
  EXPECT_EQ(m.train_epochs(), 0);
}

TEST(TrainStage, EmptyHistoryIsSkippedWithWarning) {
  Rng init(1), rng(2);
  EmbeddingModule m({.grid = 16}, false, init);
  const std::vector<float> before(m.model().parameters().begin(), m.model().parameters().end());
  const auto report = train_stage(m, {}, {}, TrainConfig{}, rng);
  EXPECT_TRUE(report.skipped);
  EXPECT_FALSE(report.warning.empty());
  EXPECT_EQ(std::vector<float>(m.model().parameters().begin(), m.model().parameters().end()), before);
}

TEST(TrainStage, FrozenModuleRefusesTraining) {
  Rng init(1), data(2), rng(3);
  EmbeddingModule m({.grid = 16}, false, init);
  m.freeze();
  const auto grids = blob_set(16, 4, data);
  EXPECT_THROW(train_stage(m, {}, samples_of(grids), TrainConfig{}, rng), ConfigError);
}

TEST(TrainStage, ReconstructionLossDecreasesOverTwoHundredEpochs) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Rng init(seed), data(seed + 100), rng(seed + 200);
    EmbeddingModule m({.grid = 16}, false, init);
    const auto grids = blob_set(16, 64, data);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 16;
    const auto report = train_stage(m, {}, samples_of(grids), cfg, rng);
    ASSERT_EQ(report.epoch_losses.size(), 200u);
    EXPECT_LT(report.epoch_losses.back(), report.epoch_losses.front()) << "seed " << seed;
    EXPECT_EQ(m.train_epochs(), 200);
    EXPECT_EQ(m.loss_history(), report.epoch_losses);
  }
}

TEST(TrainStage, FixedSeedGivesIdenticalLossHistory) {
  auto run = [] {
    Rng init(5), data(6), rng(7);
    EmbeddingModule m({.grid = 16}, false, init);
    const auto grids = blob_set(16, 20, data);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    train_stage(m, {}, samples_of(grids), cfg, rng);
    return m.loss_history();
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainStage, ChildTrainingLeavesFrozenParentBitStable) {
  Rng init(1), data(2), rng(3);
  EmbeddingModule parent({.grid = 16}, false, init);
  const auto grids = blob_set(16, 16, data);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  train_stage(parent, {}, samples_of(grids), cfg, rng);
  parent.freeze();
  std::vector<std::vector<double>> before;
  for (const auto& g : grids) before.push_back(parent.encode(g, nullptr));

  EmbeddingModule child({.grid = 16}, true, init);
  const EmbeddingModule* chain[] = {&parent};
  EXPECT_THROW(train_stage(child, {}, samples_of(grids), cfg, rng), ConfigError);
  train_stage(child, chain, samples_of(grids), cfg, rng);
  for (std::size_t i = 0; i < grids.size(); ++i) EXPECT_EQ(parent.encode(grids[i], nullptr), before[i]);
}

TEST(ModuleCheckpoint, RoundTripPreservesEverything) {
  Rng init(1), data(2), rng(3);
  EmbeddingModule m({.grid = 32}, true, init);
  EmbeddingModule parent({.grid = 32}, false, init);
  parent.freeze();
  const auto grids = blob_set(32, 6, data);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  const EmbeddingModule* chain[] = {&parent};
  train_stage(m, chain, samples_of(grids), cfg, rng);
  m.freeze();

  std::stringstream buf;
  save_module(m, buf);
  const auto back = load_module(buf);
  EXPECT_EQ(back->architecture(), m.architecture());
  EXPECT_TRUE(back->has_connections());
  EXPECT_TRUE(back->frozen());
  EXPECT_EQ(back->train_epochs(), 2);
  EXPECT_EQ(back->loss_history(), m.loss_history());
  EXPECT_TRUE(std::ranges::equal(back->model().parameters(), m.model().parameters()));
  EXPECT_EQ(back->optimizer().steps(), m.optimizer().steps());
  EXPECT_EQ(back->optimizer().first_moment(), m.optimizer().first_moment());
  EXPECT_EQ(back->optimizer().second_moment(), m.optimizer().second_moment());
  const auto trace = ancestor_trace(chain, grids[0]);
  EXPECT_EQ(back->encode(grids[0], &trace), m.encode(grids[0], &trace));
}

TEST(ModuleCheckpoint, CorruptMagicIsRejected) {
  std::stringstream buf("XXXXgarbage");
  EXPECT_THROW(load_module(buf), ValidationError);
}

}  // namespace
