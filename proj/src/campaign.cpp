#include "abench/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "abench/scoring.hpp"
#include "abench/task.hpp"
#include "abench/text.hpp"

namespace abench {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool safe_name(const std::string& s) {
  static const std::regex kSafe(R"([A-Za-z0-9_.\-]+)");
  return std::regex_match(s, kSafe) && s != "." && s != "..";
}

}  // namespace

void CampaignConfig::validate() const {
  auto fail = [](const std::string& why) { throw CampaignError("config invalid: " + why); };
  if (tasks.empty()) fail("no tasks");
  if (participants.empty()) fail("no participants");
  if (workers < 1) fail("workers must be >= 1");
  if (!(t0_s > 0.0)) fail("t0_s must be positive");
  if (time_budget_s && !(*time_budget_s > 0.0)) fail("time_budget_s must be positive");
  if (!(init_grace_s > 0.0)) fail("init_grace_s must be positive");
  if (virtual_clock && !test_mode) fail("virtual_clock requires test_mode");
  std::set<std::string> names;
  for (const auto& p : participants) {
    if (!safe_name(p.name)) fail("bad participant name '" + p.name + "'");
    if (!names.insert(p.name).second) fail("duplicate participant '" + p.name + "'");
    if (p.agent_profile) {
      if (!test_mode) fail("scripted agent '" + p.name + "' requires test_mode");
      if (agent_exe.empty()) fail("scripted agents need an agent executable");
    } else if (p.solution_cmd.empty()) {
      fail("participant '" + p.name + "' has no solution command");
    }
  }
}

CampaignConfig load_campaign_config(const fs::path& file) {
  CampaignConfig cfg;
  const fs::path base = fs::absolute(file).parent_path();
  try {
    const auto j = json::parse(text::read_file(file));
    for (const auto& t : j.at("tasks")) {
      fs::path p = t.get<std::string>();
      cfg.tasks.push_back(p.is_absolute() ? p : base / p);
    }
    for (const auto& pj : j.at("participants")) {
      Participant p;
      p.name = pj.at("name").get<std::string>();
      if (pj.contains("solution")) {
        const auto& s = pj.at("solution");
        if (s.is_string()) {
          p.solution_cmd = {"/bin/sh", "-c", s.get<std::string>()};
        } else {
          p.solution_cmd = s.get<std::vector<std::string>>();
        }
      }
      if (pj.contains("agent")) p.agent_profile = profile_from_json(pj.at("agent"));
      cfg.participants.push_back(std::move(p));
    }
    cfg.workers = j.value("workers", std::size_t{1});
    cfg.test_mode = j.value("test_mode", false);
    if (j.contains("metric")) {
      const auto& m = j.at("metric");
      cfg.t0_s = m.value("t0_s", cfg.t0_s);
      if (m.contains("time_budget_s")) cfg.time_budget_s = m.at("time_budget_s").get<double>();
      cfg.init_grace_s = m.value("init_grace_s", cfg.init_grace_s);
      cfg.virtual_clock = m.value("virtual_clock", false);
    }
  } catch (const json::exception& e) {
    throw CampaignError(std::string("config invalid: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CampaignError(std::string("config invalid: ") + e.what());
  }
  return cfg;
}

Leaderboard build_leaderboard(std::vector<std::string> participants,
                              std::vector<std::string> tasks,
                              const std::vector<std::vector<double>>& alc_grid) {
  Leaderboard board;
  board.ranks = average_rank(alc_grid);
  board.participants = std::move(participants);
  board.tasks = std::move(tasks);
  const std::size_t n = board.ranks.participants;
  board.mean_alc.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& row = alc_grid[p];
    board.mean_alc[p] =
        std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
  }
  board.order.resize(n);
  std::iota(board.order.begin(), board.order.end(), std::size_t{0});
  std::sort(board.order.begin(), board.order.end(), [&](std::size_t a, std::size_t b) {
    const auto& r = board.ranks.average_rank;
    if (r[a] != r[b]) return r[a] < r[b];
    if (board.mean_alc[a] != board.mean_alc[b]) return board.mean_alc[a] > board.mean_alc[b];
    return board.participants[a] < board.participants[b];
  });
  return board;
}

void write_leaderboard(const Leaderboard& board, const fs::path& out) {
  fs::create_directories(out);
  std::string csv = "participant";
  for (const auto& t : board.tasks) csv += "," + t;
  csv += ",average_rank\n";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t pos = 0; pos < board.order.size(); ++pos) {
    const std::size_t p = board.order[pos];
    csv += board.participants[p];
    nlohmann::ordered_json alcs = nlohmann::ordered_json::object();
    nlohmann::ordered_json ranks = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < board.tasks.size(); ++k) {
      csv += "," + text::format_double(board.ranks.alc[p][k]);
      alcs[board.tasks[k]] = board.ranks.alc[p][k];
      ranks[board.tasks[k]] = board.ranks.ranks[p][k];
    }
    csv += "," + text::format_double(board.ranks.average_rank[p]) + "\n";
    nlohmann::ordered_json row;
    row["position"] = pos + 1;
    row["participant"] = board.participants[p];
    row["alc"] = std::move(alcs);
    row["ranks"] = std::move(ranks);
    row["mean_alc"] = board.mean_alc[p];
    row["average_rank"] = board.ranks.average_rank[p];
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json j;
  j["tasks"] = board.tasks;
  j["leaderboard"] = std::move(rows);
  text::write_file_atomic(out / "leaderboard.csv", csv);
  text::write_file_atomic(out / "leaderboard.json", j.dump(2) + "\n");
}

namespace {

struct LoadedTask {
  fs::path dir;
  Task task;
  MetricConfig metric;
};

PairResult evaluate_pair(const CampaignConfig& cfg, const Participant& participant,
                         const LoadedTask& lt, const fs::path& pair_dir) {
  PairResult result;
  result.participant = participant.name;
  result.task = lt.task.name;
  result.artifacts = pair_dir;

  for (std::size_t attempt = 1; attempt <= 2; ++attempt) {
    result.attempts = attempt;
    try {
      fs::remove_all(pair_dir / "workspace");
      fs::remove_all(pair_dir / "events");
      fs::create_directories(pair_dir);

      SolutionRun run;
      run.task_dir = lt.dir;
      run.workspace = pair_dir / "workspace";
      run.events_dir = pair_dir / "events";
      run.time_budget_s = lt.metric.time_budget_s;
      run.init_grace_s = cfg.init_grace_s;
      run.virtual_clock = cfg.virtual_clock;
      if (participant.agent_profile) {
        TrajectoryProfile profile = *participant.agent_profile;
        profile.labels_path = fs::absolute(load_manifest(lt.dir).labels_path());
        const auto profile_file = pair_dir / "agent_profile.json";
        save_profile(profile, profile_file);
        run.solution_cmd = {cfg.agent_exe.string(), "agent", "--profile",
                            profile_file.string()};
        if (cfg.virtual_clock) run.solution_cmd.emplace_back("--virtual-clock");
      } else {
        run.solution_cmd = participant.solution_cmd;
      }

      const RunOutcome outcome = run_solution(run);
      const auto events = clip_events(outcome.events, lt.metric.time_budget_s);
      const ScoreLog log =
          score_run(events, lt.task.test_labels,
                    static_cast<std::size_t>(lt.task.class_count), lt.metric, lt.task.name);
      emit_artifacts(log, pair_dir / "score");
      result.alc = log.alc;
      result.n_predictions = log.records.size();
      result.reason = outcome.reason;
      result.failure.reset();
      return result;
    } catch (const std::exception& e) {
      spdlog::warn("{} on {}: attempt {} failed: {}", participant.name, lt.task.name,
                   attempt, e.what());
      result.failure = e.what();
    }
  }
  result.alc = 0.0;
  return result;
}

}  // namespace

Leaderboard run_campaign(const CampaignConfig& cfg, const fs::path& out) {
  cfg.validate();

  std::vector<LoadedTask> tasks;
  std::set<std::string> task_names;
  for (const auto& dir : cfg.tasks) {
    LoadedTask lt;
    lt.dir = fs::absolute(dir);
    try {
      lt.task = load_task(lt.dir);
    } catch (const TaskError& e) {
      throw CampaignError("config invalid: task " + dir.string() + ": " + e.what());
    }
    if (!task_names.insert(lt.task.name).second) {
      throw CampaignError("config invalid: duplicate task name '" + lt.task.name + "'");
    }
    if (!safe_name(lt.task.name)) {
      throw CampaignError("config invalid: bad task name '" + lt.task.name + "'");
    }
    lt.metric.t0_s = cfg.t0_s;
    lt.metric.time_budget_s = cfg.time_budget_s.value_or(lt.task.time_budget_s);
    tasks.push_back(std::move(lt));
  }

  const std::size_t n_participants = cfg.participants.size();
  const std::size_t n_tasks = tasks.size();
  const std::size_t n_pairs = n_participants * n_tasks;
  // One slot per pair; each slot has exactly one writer.
  std::vector<PairResult> results(n_pairs);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n_pairs; i = next++) {
      const auto& participant = cfg.participants[i / n_tasks];
      const auto& lt = tasks[i % n_tasks];
      results[i] = evaluate_pair(cfg, participant, lt,
                                 out / "runs" / participant.name / lt.task.name);
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(cfg.workers, n_pairs); ++w) pool.emplace_back(worker);
  }

  std::vector<std::vector<double>> grid(n_participants, std::vector<double>(n_tasks, 0.0));
  for (std::size_t i = 0; i < n_pairs; ++i) grid[i / n_tasks][i % n_tasks] = results[i].alc;

  std::vector<std::string> names;
  for (const auto& p : cfg.participants) names.push_back(p.name);
  std::vector<std::string> tnames;
  for (const auto& t : tasks) tnames.push_back(t.task.name);

  Leaderboard board = build_leaderboard(std::move(names), std::move(tnames), grid);
  board.results = std::move(results);
  write_leaderboard(board, out);

  nlohmann::ordered_json rj = nlohmann::ordered_json::array();
  for (const auto& r : board.results) {
    nlohmann::ordered_json j;
    j["participant"] = r.participant;
    j["task"] = r.task;
    j["alc"] = r.alc;
    j["n_predictions"] = r.n_predictions;
    j["attempts"] = r.attempts;
    j["termination"] = r.reason ? json(std::string(to_string(*r.reason))) : json(nullptr);
    j["failure"] = r.failure ? json(*r.failure) : json(nullptr);
    rj.push_back(std::move(j));
  }
  text::write_file_atomic(out / "results.json", rj.dump(2) + "\n");
  return board;
}

}  // namespace abench
