#include <gtest/gtest.h>

#include <filesystem>

#include <unistd.h>

#include "holmes/analysis.hpp"
#include "holmes/errors.hpp"

namespace {

using namespace holmes;
namespace fs = std::filesystem;

ExplorationConfig small_config() {
  ExplorationConfig c;
  c.grid = 32;
  c.steps = 10;
  c.n_total = 30;
  c.n_init = 10;
  c.train_every = 10;
  c.train_epochs = 2;
  c.batch_size = 8;
  c.split = {1e9, 1, 5, 1, 10, 2};
  return c;
}

TEST(Selector, ParsesKindsAndLeaves) {
  EXPECT_EQ(analysis::BcSelector::parse("statistics").kind, bc::FeatureKind::statistics);
  const auto leaf = analysis::BcSelector::parse("leaf:010");
  EXPECT_FALSE(leaf.kind);
  EXPECT_EQ(leaf.node, "010");
  EXPECT_EQ(leaf.to_string(), "leaf:010");
  EXPECT_THROW(analysis::BcSelector::parse("leaf:12"), ConfigError);
  EXPECT_THROW(analysis::BcSelector::parse("leaf:"), ConfigError);
  EXPECT_THROW(analysis::BcSelector::parse("shape"), ConfigError);
}

TEST(Curve, MatchesBinningCurveAndFilters) {
  Rng rng(3);
  std::vector<std::vector<double>> d(300, std::vector<double>(8));
  for (auto& v : d)
    for (double& x : v) x = rng.uniform(-0.2, 1.2);
  const auto curve = analysis::diversity_curve(d, 3);
  EXPECT_EQ(curve.occupied, eval::binning_curve(d, 3));

  std::vector<eval::PatternClass> classes(d.size());
  std::vector<std::vector<double>> slp;
  for (std::size_t i = 0; i < d.size(); ++i) {
    classes[i] = i % 3 == 0 ? eval::PatternClass::SLP : eval::PatternClass::TLP;
    if (i % 3 == 0) slp.push_back(d[i]);
  }
  const auto filtered = analysis::diversity_curve(d, 3, classes, eval::PatternClass::SLP);
  ASSERT_EQ(filtered.occupied.size(), d.size());
  EXPECT_EQ(filtered.final(), eval::binning_diversity(slp, 3));
  for (std::size_t i = 1; i < d.size(); ++i) {
    EXPECT_GE(filtered.occupied[i], filtered.occupied[i - 1]);
    if (i % 3 != 0) EXPECT_EQ(filtered.occupied[i], filtered.occupied[i - 1]);
  }
}

TEST(Reference, FitsAndReloadsEveryDescriptor) {
  const fs::path dir = fs::temp_directory_path() / ("holmes_ref_" + std::to_string(::getpid()));
  auto c = small_config();
  c.steps = 5;
  const auto patterns = analysis::reference_patterns(c, 60, 11);
  ASSERT_EQ(patterns.size(), 60u);
  EXPECT_EQ(patterns, analysis::reference_patterns(c, 60, 11));
  const auto fitted = analysis::fit_reference(patterns, dir);
  for (const auto& [kind, p] : fitted) {
    const auto back = analysis::load_reference(dir, kind);
    EXPECT_EQ(back.kind, kind);
    EXPECT_EQ(back.mean, p.mean);
    EXPECT_EQ(back.z_min, p.z_min);
  }
  fs::remove_all(dir);
}

TEST(Embeddings, NormalizedToEightDims) {
  Rng rng(5);
  std::vector<std::vector<double>> e(100, std::vector<double>(16));
  for (auto& v : e)
    for (double& x : v) x = rng.normal();
  const auto n = analysis::normalize_embeddings(e);
  ASSERT_EQ(n.size(), 100u);
  for (const auto& v : n) EXPECT_EQ(v.size(), 8u);
}

TEST(Cka, MatrixIsSymmetricWithUnitDiagonal) {
  auto c = small_config();
  Explorer explorer(c);
  explorer.run();
  ASSERT_GE(explorer.leaves().size(), 2u);
  const auto stimuli = analysis::history_patterns(explorer.history());
  const auto nodes = explorer.tree()->node_ids();
  const auto m = analysis::cka_matrix(*explorer.tree(), nodes, stimuli);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    EXPECT_NEAR(m[i][i], 1.0, 1e-12);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      EXPECT_EQ(m[i][j], m[j][i]);
      EXPECT_GE(m[i][j], -1e-12);
      EXPECT_LE(m[i][j], 1.0 + 1e-9);
    }
  }
  const auto d = analysis::representation_divergence(*explorer.tree(), *explorer.tree(), stimuli);
  EXPECT_NEAR(d.self, 1.0, 1e-9);
  EXPECT_EQ(d.leaves.size(), explorer.leaves().size());
  EXPECT_THROW(analysis::node_embeddings(*explorer.tree(), "0111", stimuli), ConfigError);
}

}  // namespace
