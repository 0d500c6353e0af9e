#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "holmes/errors.hpp"
#include "holmes/store.hpp"

namespace {

using namespace holmes;
namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("holmes_store_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ExplorationConfig tiny_config(std::uint64_t seed) {
  ExplorationConfig c;
  c.grid = 16;
  c.steps = 10;
  c.n_total = 50;
  c.n_init = 10;
  c.train_every = 10;
  c.train_epochs = 2;
  c.batch_size = 8;
  c.seed = seed;
  c.guided = true;
  c.split = {1e9, 1, 5, 1, 10, 3};
  return c;
}

std::string run_to_end(const ExplorationConfig& c, const fs::path& dir) {
  auto store = store::RunStore::create(dir, c);
  store::StoreSink sink(store);
  ScriptedFeedback feedback({{1, {{"00", 2.0}, {"01", 0.5}}}, {3, {{"000", 1.0}}}});
  Explorer e(c);
  e.run(&sink, &feedback);
  return store::history_digest(e.history());
}

TEST(Patterns, BlobIsFourBytesPerCell) {
  TempDir tmp;
  Grid g({12, 20});
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = static_cast<double>(i % 7) / 7.0;
  store::write_pattern(g, tmp.path() / "p.f32");
  EXPECT_EQ(fs::file_size(tmp.path() / "p.f32"), 4u * 12 * 20);
  EXPECT_EQ(store::read_pattern(tmp.path() / "p.f32", {12, 20}), quantize_f32(g));
  EXPECT_THROW(store::read_pattern(tmp.path() / "p.f32", {12, 21}), IntegrityError);
}

TEST(Png, BlackWhiteAndRoundTrip) {
  TempDir tmp;
  store::write_png(Grid({8, 8}, 0.0), tmp.path() / "z.png");
  EXPECT_EQ(store::read_png(tmp.path() / "z.png").max(), 0.0);
  store::write_png(Grid({8, 8}, 1.0), tmp.path() / "o.png");
  EXPECT_EQ(store::read_png(tmp.path() / "o.png").min(), 1.0);
  Rng rng(1);
  Grid g({16, 24});
  for (double& v : g.data()) v = rng.uniform();
  store::write_png(g, tmp.path() / "g.png");
  const Grid back = store::read_png(tmp.path() / "g.png");
  ASSERT_EQ(back.shape(), g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LE(std::abs(back.data()[i] - g.data()[i]), 0.5 / 255 + 1e-12);
  const auto bytes = store::encode_png(g);
  ASSERT_GT(bytes.size(), 8u);
  EXPECT_EQ(bytes[1], 'P');
}

TEST(RunStore, HundredRecordsRoundTrip) {
  TempDir tmp;
  auto c = tiny_config(1);
  c.n_total = 100;
  c.n_init = 100;
  c.train_every = 100;
  c.guided = false;
  auto store = store::RunStore::create(tmp.path(), c);
  store::StoreSink sink(store);
  Explorer e(c);
  e.run(&sink);
  const auto loaded = store::load_run(tmp.path());
  EXPECT_EQ(serial::to_json(loaded.config), serial::to_json(c));
  ASSERT_EQ(loaded.state.history.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) {
    const Record& a = e.history()[i];
    const Record& b = loaded.state.history[i];
    EXPECT_EQ(a.run_index, b.run_index);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.pattern_ref, b.pattern_ref);
    EXPECT_EQ(a.path, b.path);
    EXPECT_EQ(a.emb, b.emb);
    EXPECT_EQ(*a.pattern, *b.pattern);
  }
}

TEST(RunStore, TornFinalLineLeavesPreviousRecords) {
  TempDir tmp;
  auto c = tiny_config(2);
  c.n_total = 25;
  c.train_every = 20;
  auto store = store::RunStore::create(tmp.path(), c);
  store::StoreSink sink(store);
  Explorer e(c);
  e.run(&sink, nullptr, 1);  // commits stage 1 at run 20
  for (int i = 0; i < 3; ++i) e.explore_once(&sink);
  store.flush();
  const fs::path records = tmp.path() / "history/records.jsonl";
  fs::resize_file(records, fs::file_size(records) - 10);
  const auto loaded = store::load_run(tmp.path());
  EXPECT_EQ(loaded.state.history.size(), 20u);
  EXPECT_EQ(loaded.uncommitted, 2u);
  EXPECT_EQ(loaded.state.stage, 1);
}

TEST(RunStore, EmptyDirectoryIsNoRun) {
  TempDir tmp;
  EXPECT_THROW(store::load_run(tmp.path()), NoRunError);
  EXPECT_THROW(store::load_run(tmp.path() / "missing"), NoRunError);
}

TEST(RunStore, CreateRefusesExistingRun) {
  TempDir tmp;
  auto c = tiny_config(3);
  c.n_total = c.n_init = c.train_every = 10;
  run_to_end(c, tmp.path());
  EXPECT_THROW(store::RunStore::create(tmp.path(), c), ConfigError);
}

TEST(RunStore, ResumeAtEveryStageMatchesUninterruptedRun) {
  TempDir full, cut;
  const auto c = tiny_config(4);
  const std::string expected = run_to_end(c, full.path());
  for (int stop = 1; stop <= 4; ++stop) {
    fs::remove_all(cut.path());
    {
      auto store = store::RunStore::create(cut.path(), c);
      store::StoreSink sink(store);
      ScriptedFeedback feedback({{1, {{"00", 2.0}, {"01", 0.5}}}, {3, {{"000", 1.0}}}});
      Explorer e(c);
      e.run(&sink, &feedback, stop);
      for (int i = 0; i < 4; ++i) e.explore_once(&sink);  // lost work past the boundary
    }
    auto loaded = store::load_run(cut.path());
    ASSERT_EQ(loaded.state.stage, stop);
    EXPECT_EQ(loaded.uncommitted, 4u);
    auto store = store::RunStore::reopen(cut.path(), loaded.state.history.size(), loaded.state.stage);
    store::StoreSink sink(store);
    ScriptedFeedback feedback({{1, {{"00", 2.0}, {"01", 0.5}}}, {3, {{"000", 1.0}}}});
    Explorer e(loaded.config, std::move(loaded.state));
    e.run(&sink, &feedback);
    EXPECT_EQ(store::history_digest(e.history()), expected) << "resumed after stage " << stop;
    const auto reloaded = store::load_run(cut.path());
    EXPECT_EQ(store::history_digest(reloaded.state.history), expected);
    EXPECT_EQ(reloaded.uncommitted, 0u);
  }
}

TEST(RunStore, FixedSeedGivesIdenticalDigests) {
  TempDir a, b;
  const auto c = tiny_config(5);
  EXPECT_EQ(run_to_end(c, a.path()), run_to_end(c, b.path()));
  auto other = c;
  other.seed = 6;
  fs::remove_all(b.path());
  EXPECT_NE(run_to_end(other, b.path()), run_to_end(c, a.path() / "again"));
}

TEST(RunStore, UnknownFilesAreIgnored) {
  TempDir tmp;
  auto c = tiny_config(7);
  c.n_total = 20;
  const std::string digest = run_to_end(c, tmp.path());
  std::ofstream(tmp.path() / "notes.txt") << "hello";
  std::ofstream(tmp.path() / "checkpoints" / "stray.bin") << "x";
  EXPECT_EQ(store::history_digest(store::load_run(tmp.path()).state.history), digest);
}

TEST(RunStore, MissingRecordsNameTheStage) {
  TempDir tmp;
  auto c = tiny_config(8);
  c.n_total = 20;
  run_to_end(c, tmp.path());
  const fs::path records = tmp.path() / "history/records.jsonl";
  std::ifstream is(records);
  std::string line, kept;
  for (int i = 0; i < 15 && std::getline(is, line); ++i) kept += line + "\n";
  is.close();
  std::ofstream(records, std::ios::trunc) << kept;
  try {
    store::load_run(tmp.path());
    FAIL() << "expected an integrity error";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("stage 2"), std::string::npos) << e.what();
  }
}

TEST(RunStore, ExportPng) {
  TempDir tmp;
  auto c = tiny_config(9);
  c.n_total = c.n_init = c.train_every = 10;
  run_to_end(c, tmp.path());
  store::export_png(tmp.path(), 3, tmp.path() / "three.png");
  const Grid img = store::read_png(tmp.path() / "three.png");
  const Grid pat = store::read_pattern(tmp.path() / "patterns/000003.f32", {16, 16});
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(img.data()[i] - pat.data()[i]), 0.5 / 255 + 1e-9);
  EXPECT_THROW(store::export_png(tmp.path(), 99, tmp.path() / "x.png"), ConfigError);
}

}  // namespace
