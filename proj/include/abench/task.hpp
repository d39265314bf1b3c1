#pragma once

// Classification tasks on disk and in memory.
//
// Directory layout:
//   manifest.json        name, class_count, train_count, test_count,
//                        time_budget_s, space_budget_bytes
//   train/data.csv       "<label>,<f0>,<f1>,..." one sample per line
//   test/data.csv        "<f0>,<f1>,..." one sample per line
//   solution/labels.csv  one label per line; never shown to solutions

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace abench {

class TaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMinClassCountExclusive = 2;
inline constexpr int kMaxClassCountExclusive = 500;
inline constexpr double kDefaultTimeBudgetS = 1800.0;
inline constexpr std::uint64_t kDefaultSpaceBudgetBytes = 26ull << 30;
inline constexpr const char* kBalancedAccuracy = "balanced_accuracy";

struct TaskManifest {
  std::string name;
  int class_count = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double time_budget_s = kDefaultTimeBudgetS;
  std::uint64_t space_budget_bytes = kDefaultSpaceBudgetBytes;

  std::filesystem::path root;

  std::filesystem::path manifest_path() const { return root / "manifest.json"; }
  std::filesystem::path train_path() const { return root / "train" / "data.csv"; }
  std::filesystem::path test_path() const { return root / "test" / "data.csv"; }
  std::filesystem::path labels_path() const {
    return root / "solution" / "labels.csv";
  }
};

struct LabeledSample {
  std::vector<double> features;
  int label = 0;
};

struct Task {
  std::string name;
  int class_count = 0;
  std::vector<LabeledSample> train;
  std::vector<std::vector<double>> test;  ///< unlabeled view
  std::vector<int> test_labels;           ///< hidden Y_te
  std::string scoring_fn = kBalancedAccuracy;
  double time_budget_s = kDefaultTimeBudgetS;
  std::uint64_t space_budget_bytes = kDefaultSpaceBudgetBytes;
};

/// Reads manifest.json and checks that the ingestion-visible files exist.
/// Never touches the hidden label file.
TaskManifest load_manifest(const std::filesystem::path& dir);

/// Loads a complete task including hidden labels (scoring side only).
/// Errors: "incomplete task", "manifest/data disagreement",
/// "invalid class count", "label out of range", plus any other violation
/// reported by validate_task.
Task load_task(const std::filesystem::path& dir);

/// Reads solution/labels.csv style files: one integer per line.
std::vector<int> read_labels(const std::filesystem::path& file);

/// Empty iff every Task invariant holds. Each entry names one invariant.
std::vector<std::string> validate_task(const Task& task);

struct SyntheticTaskSpec {
  int class_count = 4;
  std::size_t train_count = 40;
  std::size_t test_count = 40;
  std::uint64_t seed = 0;
  double difficulty = 0.0;  ///< 0 separable, 1 pure noise
  std::string name;         ///< defaults to "synthetic_<seed>"
  double time_budget_s = kDefaultTimeBudgetS;
  std::uint64_t space_budget_bytes = kDefaultSpaceBudgetBytes;
};

/// Writes a deterministic task directory at `out`. Samples of class c are
/// (1 - difficulty) * e_c plus uniform noise in [-0.2, 0.2] per coordinate,
/// so difficulty 0 is separable by a nearest-centroid rule.
TaskManifest generate_synthetic_task(const SyntheticTaskSpec& spec,
                                     const std::filesystem::path& out);

/// Copies the ingestion-visible part of a task (manifest, train, test) to
/// `view_dir`. The hidden label directory is not copied.
void write_ingestion_view(const TaskManifest& manifest,
                          const std::filesystem::path& view_dir);

}  // namespace abench
