#pragma once

// Runs every (participant, task) pair on a fixed-size worker pool and
// aggregates the per-task ALCs into an average-rank leaderboard.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "abench/ingestion.hpp"
#include "abench/metric.hpp"
#include "abench/sim_agent.hpp"

namespace abench {

class CampaignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Participant {
  std::string name;
  std::vector<std::string> solution_cmd;
  /// Scripted agent instead of a command; requires a test campaign.
  std::optional<TrajectoryProfile> agent_profile;
};

struct CampaignConfig {
  std::vector<std::filesystem::path> tasks;
  std::vector<Participant> participants;
  std::size_t workers = 1;
  double t0_s = 60.0;
  /// Overrides each manifest's time_budget_s when set.
  std::optional<double> time_budget_s;
  double init_grace_s = kDefaultInitGraceS;
  /// Test campaigns may use scripted agents and the virtual clock.
  bool test_mode = false;
  bool virtual_clock = false;
  /// Executable providing the `agent` subcommand for scripted participants.
  std::filesystem::path agent_exe;

  /// Throws CampaignError("config invalid: ...").
  void validate() const;
};

/// JSON with keys tasks, participants, workers, metric (t0_s, time_budget_s,
/// init_grace_s, virtual_clock) and test_mode. Relative task paths resolve
/// against the config file's directory.
CampaignConfig load_campaign_config(const std::filesystem::path& file);

struct PairResult {
  std::string participant;
  std::string task;
  double alc = 0.0;
  std::size_t attempts = 0;
  std::size_t n_predictions = 0;
  std::optional<TerminationReason> reason;
  std::optional<std::string> failure;
  std::filesystem::path artifacts;
};

struct Leaderboard {
  std::vector<std::string> participants;
  std::vector<std::string> tasks;
  RankTable ranks;
  /// Participant indices: ascending average rank, then mean ALC descending,
  /// then name.
  std::vector<std::size_t> order;
  std::vector<double> mean_alc;
  std::vector<PairResult> results;
};

Leaderboard build_leaderboard(std::vector<std::string> participants,
                              std::vector<std::string> tasks,
                              const std::vector<std::vector<double>>& alc_grid);

/// Writes leaderboard.csv and leaderboard.json into `out`.
void write_leaderboard(const Leaderboard& board, const std::filesystem::path& out);

/// Evaluates every pair exactly once (a pair that throws is retried once,
/// then recorded as ALC 0). Per-pair artifacts go to
/// out/runs/<participant>/<task>/.
Leaderboard run_campaign(const CampaignConfig& cfg, const std::filesystem::path& out);

}  // namespace abench
