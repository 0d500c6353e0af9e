#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "holmes/engine.hpp"
#include "holmes/errors.hpp"

namespace {

using namespace holmes;

Record point_record(std::size_t run, std::vector<double> e) {
  Record r;
  r.run_index = run;
  r.theta.run_seed = run;
  r.path = {"0"};
  r.emb["0"] = std::move(e);
  return r;
}

ExplorationConfig tiny_config(std::uint64_t seed) {
  ExplorationConfig c;
  c.grid = 16;
  c.steps = 10;
  c.n_total = 40;
  c.n_init = 10;
  c.train_every = 10;
  c.train_epochs = 2;
  c.batch_size = 8;
  c.seed = seed;
  c.split = {1e9, 1, 5, 1, 10, 2};
  return c;
}

TEST(SampleGoalSpace, SingleLeafAlwaysDrawn) {
  Rng rng(1);
  const std::vector<std::string> leaves{"0"};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_goal_space(leaves, {}, true, 1.0, rng), "0");
}

TEST(SampleGoalSpace, GuidedFollowsSoftmax) {
  Rng rng(2);
  const std::vector<std::string> leaves{"00", "01"};
  const InterestScores scores{{"00", std::log(2.0)}, {"01", 0.0}};
  int a = 0;
  for (int i = 0; i < 10000; ++i) a += sample_goal_space(leaves, scores, true, 1.0, rng) == "00";
  EXPECT_NEAR(a / 10000.0, 2.0 / 3.0, 0.02);
}

TEST(SampleGoalSpace, NonGuidedIsUniform) {
  Rng rng(3);
  const std::vector<std::string> leaves{"000", "001", "01", "1"};
  std::map<std::string, int> counts;
  for (int i = 0; i < 10000; ++i) ++counts[sample_goal_space(leaves, {{"000", 50.0}}, false, 1.0, rng)];
  double chi2 = 0.0;
  for (const auto& l : leaves) chi2 += std::pow(counts[l] - 2500.0, 2) / 2500.0;
  EXPECT_LT(chi2, 11.34);
}

TEST(SampleGoalSpace, EqualScoresMatchNonGuided) {
  const std::vector<std::string> leaves{"00", "01", "1"};
  const InterestScores equal{{"00", 3.0}, {"01", 3.0}, {"1", 3.0}};
  std::map<std::string, int> counts;
  Rng rng(4);
  for (int i = 0; i < 9000; ++i) ++counts[sample_goal_space(leaves, equal, true, 0.5, rng)];
  double chi2 = 0.0;
  for (const auto& l : leaves) chi2 += std::pow(counts[l] - 3000.0, 2) / 3000.0;
  EXPECT_LT(chi2, 9.21);  // 2 dof, p = 0.01
}

TEST(SampleGoal, SinglePointWithoutInflationReturnsThePoint) {
  History h;
  h.append(point_record(0, {0.3, -1.0, 2.0}));
  Rng rng(5);
  EXPECT_EQ(sample_goal(h, "0", 0.0, rng), (std::vector<double>{0.3, -1.0, 2.0}));
  const auto g = sample_goal(h, "0", 0.1, rng);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(std::abs(g[k] - h[0].emb.at("0")[k]), 0.1);
}

TEST(SampleGoal, UniformInsideTheEnvelope) {
  History h;
  h.append(point_record(0, std::vector<double>(16, 0.0)));
  h.append(point_record(1, std::vector<double>(16, 1.0)));
  Rng rng(6);
  std::vector<double> mean(16, 0.0);
  for (int i = 0; i < 10000; ++i) {
    const auto g = sample_goal(h, "0", 0.1, rng);
    for (std::size_t k = 0; k < 16; ++k) {
      ASSERT_GE(g[k], 0.0);
      ASSERT_LE(g[k], 1.0);
      mean[k] += g[k] / 10000.0;
    }
  }
  for (double m : mean) EXPECT_NEAR(m, 0.5, 0.02);
}

TEST(SampleGoal, EmptyLeafThrows) {
  History h;
  Rng rng(1);
  EXPECT_THROW(sample_goal(h, "01", 0.1, rng), ConfigError);
}

TEST(SelectParameters, ExactMatchAndLinearScanOracle) {
  Rng rng(7);
  History h;
  for (std::size_t i = 0; i < 100; ++i) {
    std::vector<double> e(16);
    for (double& v : e) v = rng.uniform(-1, 1);
    h.append(point_record(i, e));
  }
  EXPECT_EQ(select_parameters(h, "0", h[42].emb.at("0")), 42u);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> g(16);
    for (double& v : g) v = rng.uniform(-1, 1);
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < h.size(); ++i) {
      double d = 0;
      for (int k = 0; k < 16; ++k) d += std::pow(h[i].emb.at("0")[k] - g[k], 2);
      if (d < best_d) best_d = d, best = i;
    }
    EXPECT_EQ(select_parameters(h, "0", g), best);
  }
}

TEST(SelectParameters, TieGoesToEarliestRun) {
  History h;
  h.append(point_record(0, {1.0, 0.0}));
  h.append(point_record(1, {-1.0, 0.0}));
  h.append(point_record(2, {1.0, 0.0}));
  EXPECT_EQ(select_parameters(h, "0", std::vector<double>{0.0, 0.0}), 0u);
  EXPECT_EQ(select_parameters(h, "0", std::vector<double>{1.0, 0.0}), 0u);
}

TEST(ExplorationConfig, Validation) {
  auto c = tiny_config(1);
  c.n_init = 50;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(1);
  c.goal_space = GoalSpaceKind::statistics;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(goal_space_from_string("elliptical"), GoalSpaceKind::elliptical);
  EXPECT_THROW(goal_space_from_string("nope"), ConfigError);
}

TEST(Explorer, AllRandomWhenNInitEqualsNTotal) {
  auto c = tiny_config(2);
  c.n_init = c.n_total;
  Explorer e(c);
  e.run();
  ASSERT_EQ(e.history().size(), c.n_total);
  ParameterSpace space = ParameterSpace::for_grid(c.shape());
  for (const auto& r : e.history().records()) {
    EXPECT_TRUE(r.goal_node.empty());
    EXPECT_TRUE(space.contains(r.theta.rule));
  }
}

TEST(Explorer, GoalDirectedRunsStartAfterBootstrap) {
  Explorer e(tiny_config(3));
  e.run();
  for (const auto& r : e.history().records()) {
    EXPECT_EQ(r.goal_node.empty(), r.run_index < 10) << r.run_index;
    EXPECT_EQ(r.pattern->shape(), (GridShape{16, 16}));
    EXPECT_GE(r.pattern->min(), 0.0);
    EXPECT_LE(r.pattern->max(), 1.0);
  }
}

TEST(Explorer, SplitReplacesParentInGoalDraws) {
  Explorer e(tiny_config(4));
  e.run();
  const HolmesTree& tree = *e.tree();
  ASSERT_EQ(tree.splits(), 2);
  // Splits happen at stages 1 and 2, i.e. after runs 10 and 20.
  for (const auto& r : e.history().records()) {
    if (r.goal_node.empty()) continue;
    EXPECT_TRUE(tree.node(r.goal_node).module != nullptr);
    if (r.run_index >= 10) EXPECT_NE(r.goal_node, "0");
  }
  std::set<std::string> late;
  for (const auto& r : e.history().records())
    if (r.run_index >= 20) late.insert(r.goal_node);
  for (const auto& g : late) EXPECT_TRUE(tree.node(g).leaf()) << g;
}

TEST(Explorer, FixedSeedIsDeterministic) {
  auto run = [] {
    Explorer e(tiny_config(5));
    e.run();
    std::vector<std::vector<std::string>> paths;
    std::vector<std::vector<double>> leaf_emb;
    for (const auto& r : e.history().records()) {
      paths.push_back(r.path);
      leaf_emb.push_back(r.emb.at(r.leaf()));
    }
    return std::make_pair(paths, leaf_emb);
  };
  EXPECT_EQ(run(), run());
}

TEST(Explorer, LeafPopulationsPartitionTheHistory) {
  Explorer e(tiny_config(6));
  e.run();
  std::size_t total = 0;
  for (const auto& leaf : e.leaves()) total += e.history().population(leaf);
  EXPECT_EQ(total, e.history().size());
  for (const auto& r : e.history().records()) {
    const auto path = e.tree()->route(*r.pattern);
    EXPECT_EQ(path.back().node, r.leaf());
    for (const auto& step : path) EXPECT_EQ(step.embedding, r.emb.at(step.node));
  }
}

TEST(Explorer, ScriptedFeedbackAppliesAtSplitPauses) {
  auto c = tiny_config(7);
  c.guided = true;
  struct Counter : ExplorationSink {
    int requests = 0;
    void on_feedback_requested(const FeedbackRequest&) override { ++requests; }
  } sink;
  ScriptedFeedback feedback({{1, {{"00", 5.0}, {"01", 0.0}}}});
  Explorer e(c);
  e.run(&sink, &feedback);
  EXPECT_EQ(sink.requests, e.tree()->splits());
  EXPECT_TRUE(e.scores().contains("01") || e.scores().contains("010"));
}

TEST(Explorer, SimulatedUserScoresLeaves) {
  auto c = tiny_config(8);
  c.guided = true;
  SimulatedUser user(eval::PatternClass::SLP);
  Explorer e(c);
  e.run(nullptr, &user);
  double total = 0.0;
  for (const auto& [leaf, s] : e.scores()) {
    EXPECT_GE(s, 0.0);
    total += s;
  }
  EXPECT_GE(total, 0.0);
}

TEST(Explorer, FrozenEmbeddingsAreByteStable) {
  auto c = tiny_config(9);
  c.n_total = 30;
  c.split.max_splits = 1;
  Explorer e(c);
  e.run(nullptr, nullptr, 1);
  ASSERT_EQ(e.tree()->splits(), 1);
  std::vector<std::vector<double>> root;
  for (const auto& r : e.history().records()) root.push_back(r.emb.at("0"));
  e.run();
  for (std::size_t i = 0; i < root.size(); ++i) EXPECT_EQ(e.history()[i].emb.at("0"), root[i]);
}

}  // namespace
