#pragma once

// Scripted solutions that realize a prescribed learning trajectory through
// the wire protocol. They read the test labels from a side channel in their
// profile and are therefore only usable in test campaigns.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "abench/metric.hpp"

namespace abench {

struct ScheduledPrediction {
  double emit_at_s = 0.0;
  double target_acc = 0.0;
};

struct AgentFlags {
  bool finish_with_done = false;
  bool sleep_past_budget = false;
  bool skip_ready = false;
  std::optional<std::size_t> corrupt_file_at;
};

struct TrajectoryProfile {
  std::vector<ScheduledPrediction> schedule;
  AgentFlags flags;
  std::optional<std::filesystem::path> labels_path;

  /// Throws std::invalid_argument for non-increasing times or targets
  /// outside [0, 1].
  void validate() const;
};

/// Profile file: {"schedule": [[t_s, acc], ...], "flags": {...},
/// "labels_path": "..."}.
TrajectoryProfile profile_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const TrajectoryProfile& p);
TrajectoryProfile load_profile(const std::filesystem::path& file);
void save_profile(const TrajectoryProfile& p, const std::filesystem::path& file);

/// One-hot rows: for each class with n_c samples, the first round(target*n_c)
/// (in sample order) point at the true class and the rest at (c+1) mod C.
PredictionMatrix predictions_with_target_acc(std::span<const int> labels,
                                             std::size_t class_count, double target);

/// The balanced accuracy predictions_with_target_acc actually achieves:
/// mean over classes of round(target*n_c)/n_c.
double realizable_accuracy(std::span<const int> labels, std::size_t class_count,
                           double target);

struct AgentEnvironment {
  std::filesystem::path task_dir;
  std::filesystem::path output_dir;
  double time_budget_s = 0.0;
  std::size_t class_count = 0;
  std::size_t test_count = 0;

  /// Reads TASK_DIR, OUTPUT_DIR, TIME_BUDGET_S, CLASS_COUNT and TEST_COUNT.
  static AgentEnvironment from_process_env();
};

/// Plays the profile. Returns the process exit code.
int run_agent(const TrajectoryProfile& profile, const AgentEnvironment& env,
              bool virtual_clock);

}  // namespace abench
