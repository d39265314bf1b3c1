#include "abench/task.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "abench/text.hpp"
#include "support.hpp"

namespace abench {
namespace {

namespace fs = std::filesystem;
using testing::error_of;
using testing::TempDir;

SyntheticTaskSpec spec(int classes, std::size_t train, std::size_t test, std::uint64_t seed,
                       double difficulty) {
  SyntheticTaskSpec s;
  s.class_count = classes;
  s.train_count = train;
  s.test_count = test;
  s.seed = seed;
  s.difficulty = difficulty;
  return s;
}

void write(const fs::path& p, const std::string& body) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << body;
}

TEST(SyntheticTask, RoundTripsThroughLoader) {
  TempDir tmp;
  const auto m = generate_synthetic_task(spec(4, 40, 40, 7, 0.0), tmp / "t");
  const Task task = load_task(tmp / "t");
  EXPECT_EQ(task.name, "synthetic_7");
  EXPECT_EQ(task.class_count, 4);
  EXPECT_EQ(task.train.size(), 40u);
  EXPECT_EQ(task.test.size(), 40u);
  EXPECT_EQ(task.test_labels.size(), 40u);
  EXPECT_TRUE(validate_task(task).empty());
  EXPECT_EQ(m.space_budget_bytes, 26ull << 30);
}

TEST(SyntheticTask, RoundTripOverParameterGrid) {
  TempDir tmp;
  int i = 0;
  for (int classes : {3, 7, 20, 120}) {
    for (double difficulty : {0.0, 0.5, 1.0}) {
      const auto dir = tmp / ("t" + std::to_string(i++));
      generate_synthetic_task(spec(classes, static_cast<std::size_t>(classes) + 3,
                                   static_cast<std::size_t>(classes) * 2 + 1, 100 + static_cast<std::uint64_t>(i), difficulty),
                              dir);
      const Task task = load_task(dir);
      EXPECT_TRUE(validate_task(task).empty()) << dir;
    }
  }
}

TEST(SyntheticTask, SeparableAtZeroDifficulty) {
  TempDir tmp;
  generate_synthetic_task(spec(4, 40, 40, 7, 0.0), tmp / "t");
  EXPECT_EQ(testing::nearest_centroid_balanced_accuracy(load_task(tmp / "t")), 1.0);
}

TEST(SyntheticTask, ChanceLevelAtFullDifficulty) {
  TempDir tmp;
  double total = 0.0;
  const int seeds = 8;
  for (int s = 0; s < seeds; ++s) {
    const auto dir = tmp / ("t" + std::to_string(s));
    generate_synthetic_task(spec(4, 40, 40, static_cast<std::uint64_t>(s), 1.0), dir);
    total += testing::nearest_centroid_balanced_accuracy(load_task(dir));
  }
  EXPECT_NEAR(total / seeds, 0.25, 0.15);
}

TEST(SyntheticTask, DeterministicForSeed) {
  TempDir tmp;
  generate_synthetic_task(spec(5, 30, 25, 42, 0.3), tmp / "a");
  generate_synthetic_task(spec(5, 30, 25, 42, 0.3), tmp / "b");
  for (const char* f : {"manifest.json", "train/data.csv", "test/data.csv", "solution/labels.csv"}) {
    EXPECT_EQ(text::read_file(tmp / "a" / f), text::read_file(tmp / "b" / f)) << f;
  }
  generate_synthetic_task(spec(5, 30, 25, 43, 0.3), tmp / "c");
  EXPECT_NE(text::read_file(tmp / "a" / "test/data.csv"), text::read_file(tmp / "c" / "test/data.csv"));
}

TEST(SyntheticTask, TestSplitIsBalanced) {
  TempDir tmp;
  generate_synthetic_task(spec(7, 30, 45, 1, 0.2), tmp / "t");
  std::map<int, int> counts;
  for (int l : load_task(tmp / "t").test_labels) ++counts[l];
  ASSERT_EQ(counts.size(), 7u);
  for (const auto& [label, n] : counts) {
    EXPECT_TRUE(n == 6 || n == 7) << label << ": " << n;
  }
}

TEST(SyntheticTask, RefusesToOverwrite) {
  TempDir tmp;
  write(tmp / "t" / "keep.txt", "x");
  EXPECT_NE(error_of([&] { generate_synthetic_task(spec(4, 8, 8, 1, 0.0), tmp / "t"); })
                .find("refusing to overwrite"),
            std::string::npos);
}

TEST(SyntheticTask, RejectsBadParameters) {
  TempDir tmp;
  EXPECT_FALSE(error_of([&] { generate_synthetic_task(spec(2, 8, 8, 1, 0.0), tmp / "a"); }).empty());
  EXPECT_FALSE(error_of([&] { generate_synthetic_task(spec(4, 3, 8, 1, 0.0), tmp / "b"); }).empty());
  EXPECT_FALSE(error_of([&] { generate_synthetic_task(spec(4, 8, 8, 1, 1.5), tmp / "c"); }).empty());
}

class HandWrittenTask : public ::testing::Test {
 protected:
  void SetUp() override {
    write_manifest(3, 3, 3);
    write(dir() / "train/data.csv", "0,1.0,2.0\n1,0.5\n2,3.0,1.0,4.0\n");
    write(dir() / "test/data.csv", "1.0,2.0\n0.1\n7,7,7\n");
    write(dir() / "solution/labels.csv", "2\n0\n1\n");
  }
  void write_manifest(int classes, int train, int test) {
    write(dir() / "manifest.json",
          "{\"name\": \"hand\", \"class_count\": " + std::to_string(classes) +
              ", \"train_count\": " + std::to_string(train) +
              ", \"test_count\": " + std::to_string(test) + ", \"time_budget_s\": 30}");
  }
  fs::path dir() const { return tmp_.path() / "task"; }
  TempDir tmp_;
};

TEST_F(HandWrittenTask, LoadsHeterogeneousLengths) {
  const Task t = load_task(dir());
  EXPECT_EQ(t.train[1].features.size(), 1u);
  EXPECT_EQ(t.train[2].features.size(), 3u);
  EXPECT_EQ(t.test[2].size(), 3u);
  EXPECT_EQ(t.time_budget_s, 30.0);
}

TEST_F(HandWrittenTask, MissingFile) {
  fs::remove(dir() / "solution/labels.csv");
  EXPECT_NE(error_of([&] { load_task(dir()); }).find("incomplete task"), std::string::npos);
}

TEST_F(HandWrittenTask, ManifestOnlyViewNeverNeedsLabels) {
  fs::remove(dir() / "solution/labels.csv");
  EXPECT_EQ(load_manifest(dir()).test_count, 3u);
}

TEST_F(HandWrittenTask, CountMismatch) {
  write_manifest(3, 4, 3);
  EXPECT_NE(error_of([&] { load_task(dir()); }).find("manifest/data disagreement"),
            std::string::npos);
}

TEST_F(HandWrittenTask, TwoClassesIsTooFew) {
  write_manifest(2, 3, 3);
  EXPECT_NE(error_of([&] { load_task(dir()); }).find("invalid class count"), std::string::npos);
}

TEST_F(HandWrittenTask, LabelOutOfRange) {
  write_manifest(10, 3, 3);
  write(dir() / "solution/labels.csv", "2\n10\n1\n");
  EXPECT_NE(error_of([&] { load_task(dir()); }).find("label out of range"), std::string::npos);
}

TEST_F(HandWrittenTask, MissingTestClass) {
  write(dir() / "solution/labels.csv", "2\n0\n0\n");
  EXPECT_EQ(error_of([&] { load_task(dir()); }), "class absent from test labels");
}

TEST_F(HandWrittenTask, IngestionViewHasNoLabels) {
  write_ingestion_view(load_manifest(dir()), tmp_.path() / "view");
  EXPECT_TRUE(fs::exists(tmp_.path() / "view/manifest.json"));
  EXPECT_TRUE(fs::exists(tmp_.path() / "view/test/data.csv"));
  EXPECT_FALSE(fs::exists(tmp_.path() / "view/solution"));
}

TEST(ValidateTask, Violations) {
  Task t;
  t.name = "v";
  t.class_count = 3;
  t.train = {{{1.0}, 0}};
  t.test = {{1.0}, {2.0}, {3.0}};
  t.test_labels = {0, 1, 2};
  EXPECT_TRUE(validate_task(t).empty());

  Task missing = t;
  missing.test_labels = {0, 1, 1};
  EXPECT_EQ(validate_task(missing), std::vector<std::string>{"class absent from test labels"});

  Task big = t;
  big.class_count = 600;
  EXPECT_EQ(validate_task(big), std::vector<std::string>{"invalid class count"});

  Task widest = t;
  widest.class_count = 499;
  widest.test.assign(499, {0.0});
  widest.test_labels.resize(499);
  for (int c = 0; c < 499; ++c) widest.test_labels[static_cast<std::size_t>(c)] = c;
  EXPECT_TRUE(validate_task(widest).empty());
  widest.class_count = 500;
  EXPECT_EQ(validate_task(widest), std::vector<std::string>{"invalid class count"});

  Task mismatch = t;
  mismatch.test.pop_back();
  EXPECT_EQ(validate_task(mismatch), std::vector<std::string>{"test sample/label count mismatch"});
}

}  // namespace
}  // namespace abench
