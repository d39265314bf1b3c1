// bench: command-line front end for the anytime-learning evaluation harness.
//
//   bench gen-task  --classes C --train N --test M --seed S --difficulty F --out DIR
//   bench run       --task D --solution CMD... --out DIR
//   bench score     --events DIR --labels FILE
//   bench campaign  --config FILE --workers N --out DIR
//   bench agent     --profile FILE [--virtual-clock]

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "abench/campaign.hpp"
#include "abench/ingestion.hpp"
#include "abench/scoring.hpp"
#include "abench/sim_agent.hpp"
#include "abench/task.hpp"

namespace fs = std::filesystem;
using namespace abench;

namespace {

fs::path self_exe() {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::path("bench") : p;
}

void print_score_summary(const ScoreLog& log) {
  nlohmann::ordered_json j;
  j["task"] = log.task;
  j["alc"] = log.alc;
  j["n_predictions"] = log.records.size();
  j["excluded"] = log.excluded.size();
  std::cout << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("bench"));
  if (const char* level = std::getenv("BENCH_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }

  CLI::App app{"Anytime-learning evaluation harness"};
  app.require_subcommand(1);

  // gen-task
  SyntheticTaskSpec gen;
  fs::path gen_out;
  auto* gen_cmd = app.add_subcommand("gen-task", "Write a synthetic classification task");
  gen_cmd->add_option("--classes", gen.class_count, "Class count C (2 < C < 500)")->required();
  gen_cmd->add_option("--train", gen.train_count, "Training samples")->required();
  gen_cmd->add_option("--test", gen.test_count, "Test samples")->required();
  gen_cmd->add_option("--seed", gen.seed, "RNG seed")->default_val(0);
  gen_cmd->add_option("--difficulty", gen.difficulty, "0 separable .. 1 pure noise")
      ->default_val(0.0)
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--name", gen.name, "Task name");
  gen_cmd->add_option("--time-budget", gen.time_budget_s, "Budget recorded in the manifest")
      ->default_val(kDefaultTimeBudgetS);
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();

  // run
  fs::path run_task;
  fs::path run_out;
  std::vector<std::string> run_cmd;
  std::vector<std::string> run_tail;
  std::optional<double> run_budget;
  double run_grace = kDefaultInitGraceS;
  double run_t0 = 60.0;
  bool run_virtual = false;
  auto* run_sub = app.add_subcommand("run", "Run one solution on one task and score it");
  run_sub->add_option("--task", run_task, "Task directory")->required()->check(CLI::ExistingDirectory);
  // --solution is consumed before parsing; registered here for --help.
  std::vector<std::string> help_only;
  run_sub->add_option("--solution", help_only, "Solution command line (rest of the arguments)");
  run_sub->add_option("args", run_tail, "Solution command after --");
  run_sub->add_option("--time-budget", run_budget, "Seconds (defaults to the manifest)");
  run_sub->add_option("--init-grace", run_grace, "Initialization allowance in seconds")
      ->default_val(kDefaultInitGraceS);
  run_sub->add_option("--t0", run_t0, "Reference time of the log transform")->default_val(60.0);
  run_sub->add_option("--out", run_out, "Output directory")->required();
  run_sub->add_flag("--virtual-clock", run_virtual,
                    "Use declared prediction times (scripted agents only)");

  // score
  fs::path score_events;
  fs::path score_labels;
  std::optional<fs::path> score_out;
  std::optional<double> score_budget;
  double score_t0 = 60.0;
  auto* score_sub = app.add_subcommand("score", "Score a persisted event directory");
  score_sub->add_option("--events", score_events, "Event directory")->required()->check(CLI::ExistingDirectory);
  score_sub->add_option("--labels", score_labels, "Hidden label file")->required()->check(CLI::ExistingFile);
  score_sub->add_option("--time-budget", score_budget, "Seconds (defaults to the event log)");
  score_sub->add_option("--t0", score_t0, "Reference time")->default_val(60.0);
  score_sub->add_option("--out", score_out, "Artifact directory (defaults to --events)");

  // campaign
  fs::path campaign_config;
  fs::path campaign_out;
  std::optional<std::size_t> campaign_workers;
  auto* campaign_sub = app.add_subcommand("campaign", "Evaluate participants on several tasks");
  campaign_sub->add_option("--config", campaign_config, "Campaign JSON")->required()->check(CLI::ExistingFile);
  campaign_sub->add_option("--workers", campaign_workers, "Parallel workers");
  campaign_sub->add_option("--out", campaign_out, "Output directory")->required();

  // agent
  fs::path agent_profile;
  bool agent_virtual = false;
  auto* agent_sub = app.add_subcommand("agent", "Play a scripted trajectory as a solution");
  agent_sub->add_option("--profile", agent_profile, "Profile JSON")->required()->check(CLI::ExistingFile);
  agent_sub->add_flag("--virtual-clock", agent_virtual, "Declare times instead of sleeping");

  // Everything after `run ... --solution` is the solution's own command line,
  // including tokens that look like options.
  std::vector<std::string> raw(argv, argv + argc);
  if (raw.size() > 1 && raw[1] == "run") {
    auto it = std::find(raw.begin() + 2, raw.end(), "--solution");
    if (it != raw.end()) {
      run_cmd.assign(it + 1, raw.end());
      raw.erase(it, raw.end());
    }
  }
  std::vector<char*> args;
  for (auto& a : raw) args.push_back(a.data());
  CLI11_PARSE(app, static_cast<int>(args.size()), args.data());

  try {
    if (*gen_cmd) {
      const auto m = generate_synthetic_task(gen, gen_out);
      fmt::print("{}: {} classes, {} train, {} test -> {}\n", m.name, m.class_count,
                 m.train_count, m.test_count, gen_out.string());
      return 0;
    }

    if (*run_sub) {
      run_cmd.insert(run_cmd.end(), run_tail.begin(), run_tail.end());
      if (run_cmd.empty()) throw CLI::ValidationError("--solution", "command required");
      const Task task = load_task(run_task);
      SolutionRun run;
      run.solution_cmd = run_cmd;
      run.task_dir = run_task;
      run.workspace = run_out / "workspace";
      run.events_dir = run_out / "events";
      run.time_budget_s = run_budget.value_or(task.time_budget_s);
      run.init_grace_s = run_grace;
      run.virtual_clock = run_virtual;
      const RunOutcome outcome = run_solution(run, [](const PredictionEvent& ev) {
        spdlog::info("prediction {} at {:.3f}s", ev.sequence_no, ev.timestamp_s);
      });
      spdlog::info("run ended: {} ({} events, {} skipped)", to_string(outcome.reason),
                   outcome.events.size(), outcome.skipped_files);
      for (const auto& e : outcome.protocol_errors) spdlog::warn("protocol: {}", e);
      const MetricConfig cfg{run.time_budget_s, run_t0};
      const auto events = clip_events(outcome.events, cfg.time_budget_s);
      const ScoreLog log = score_run(events, task.test_labels,
                                     static_cast<std::size_t>(task.class_count), cfg, task.name);
      emit_artifacts(log, run_out);
      print_score_summary(log);
      return 0;
    }

    if (*score_sub) {
      const EventLog events = load_event_log(score_events);
      const auto labels = read_labels(score_labels);
      const MetricConfig cfg{score_budget.value_or(events.meta.time_budget_s), score_t0};
      const auto clipped = clip_events(events.events, cfg.time_budget_s);
      const ScoreLog log = score_run(clipped, labels,
                                     static_cast<std::size_t>(events.meta.class_count), cfg,
                                     events.meta.task);
      emit_artifacts(log, score_out.value_or(score_events));
      print_score_summary(log);
      return 0;
    }

    if (*campaign_sub) {
      CampaignConfig cfg = load_campaign_config(campaign_config);
      if (campaign_workers) cfg.workers = *campaign_workers;
      cfg.agent_exe = self_exe();
      const Leaderboard board = run_campaign(cfg, campaign_out);
      for (std::size_t pos = 0; pos < board.order.size(); ++pos) {
        const auto p = board.order[pos];
        fmt::print("{:>3}  {:<24} avg rank {:.3f}  mean ALC {:.4f}\n", pos + 1,
                   board.participants[p], board.ranks.average_rank[p], board.mean_alc[p]);
      }
      return 0;
    }

    if (*agent_sub) {
      return run_agent(load_profile(agent_profile), AgentEnvironment::from_process_env(),
                       agent_virtual);
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
