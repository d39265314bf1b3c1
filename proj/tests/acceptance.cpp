// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "abench/campaign.hpp"
#include "abench/ingestion.hpp"
#include "abench/metric.hpp"
#include "abench/scoring.hpp"
#include "abench/sim_agent.hpp"
#include "abench/task.hpp"
#include "abench/text.hpp"
#include "agent_fixture.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace abench;
using testing::TempDir;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const MetricConfig kCfg{1800.0, 60.0};

Verdict metric_exactness() {
  constexpr int kCurves = 1000;
  constexpr double kTol = 1e-6;
  constexpr double kLimitS = 30.0;
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  const auto start = Clock::now();
  for (int i = 0; i < kCurves; ++i) {
    const auto curve = testing::random_curve(rng, 50, kCfg.time_budget_s);
    worst = std::max(worst, std::abs(alc(curve, kCfg) - alc_numeric_oracle(curve, kCfg, 1'000'000)));
  }
  const double elapsed = seconds_since(start);
  return {worst < kTol && elapsed < kLimitS,
          fmt::format("{} curves, max |alc - oracle| = {:.3e} (tol {:.0e}), {:.1f} s (limit {:.0f} s)",
                      kCurves, worst, kTol, elapsed, kLimitS)};
}

Verdict analytic_anchors() {
  constexpr double kTol = 1e-12;
  const double constant = alc(LearningCurve({{0.0, 1.0}}), kCfg);
  const double at60 = alc(LearningCurve({{60.0, 1.0}}), kCfg);
  const double expected60 = 1.0 - std::log(2.0) / std::log(31.0);
  const double e1 = std::abs(constant - 1.0);
  const double e2 = std::abs(at60 - expected60);
  return {e1 < kTol && e2 < kTol,
          fmt::format("constant-1 err {:.1e}, (60 s, 1.0) err {:.1e} (tol {:.0e})", e1, e2, kTol)};
}

Verdict balanced_accuracy_oracle() {
  constexpr int kSets = 500;
  std::mt19937_64 rng(7);
  int mismatches = 0;
  for (int trial = 0; trial < kSets; ++trial) {
    const int classes = std::uniform_int_distribution<int>(2, 10)(rng);
    const int n = std::uniform_int_distribution<int>(classes, 200)(rng);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] =
          i < classes ? i : std::uniform_int_distribution<int>(0, classes - 1)(rng);
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    // Coarse scores so that ties in the argmax actually occur.
    std::uniform_int_distribution<int> level(0, 4);
    PredictionMatrix pred(static_cast<std::size_t>(n), static_cast<std::size_t>(classes));
    std::vector<std::vector<double>> raw(static_cast<std::size_t>(n));
    for (std::size_t r = 0; r < pred.rows(); ++r) {
      for (std::size_t c = 0; c < pred.cols(); ++c) {
        pred(r, c) = 0.25 * level(rng);
        raw[r].push_back(pred(r, c));
      }
    }
    const auto cm = confusion_from_scores(pred, labels, static_cast<std::size_t>(classes));
    if (balanced_accuracy(cm) != testing::brute_force_balanced_accuracy(raw, labels, classes)) {
      ++mismatches;
    }
  }
  return {mismatches == 0, fmt::format("{} sets, {} mismatches (exact equality)", kSets, mismatches)};
}

Verdict early_weighting() {
  constexpr int kGrid = 100;
  int violations = 0;
  double previous = alc(LearningCurve({{0.0, 1.0}}), kCfg);
  for (int i = 1; i < kGrid; ++i) {
    const double t = kCfg.time_budget_s * i / (kGrid - 1);
    const double v = alc(LearningCurve({{t, 1.0}}), kCfg);
    if (!(v < previous)) ++violations;
    previous = v;
  }
  return {violations == 0,
          fmt::format("{} grid points on [0, {}], {} non-decreasing steps", kGrid,
                      kCfg.time_budget_s, violations)};
}

Verdict end_to_end_dominance() {
  constexpr int kRuns = 10;
  constexpr double kLimitS = 120.0;
  TempDir tmp;
  CampaignConfig cfg;
  for (std::uint64_t k = 0; k < 5; ++k) {
    cfg.tasks.push_back(testing::small_task(tmp / fmt::format("task{}", k), 4, 10, 100 + k));
  }
  cfg.test_mode = true;
  cfg.virtual_clock = true;
  cfg.init_grace_s = 60.0;
  cfg.agent_exe = testing::kBenchExe;
  auto participant = [](std::string name, std::vector<ScheduledPrediction> s) {
    Participant p;
    p.name = std::move(name);
    p.agent_profile = testing::profile_of(std::move(s));
    return p;
  };
  // Listed worst first so that the leaderboard has to reorder them.
  cfg.participants = {participant("low", {{30.0, 0.2}, {300.0, 0.4}, {900.0, 0.6}}),
                      participant("mid", {{20.0, 0.4}, {200.0, 0.6}, {600.0, 0.8}}),
                      participant("high", {{10.0, 0.6}, {100.0, 0.8}, {300.0, 1.0}})};
  const std::vector<std::string> expected{"high", "mid", "low"};

  int in_order = 0;
  bool identical = true;
  std::string reference;
  const auto start = Clock::now();
  for (int run = 0; run < kRuns; ++run) {
    cfg.workers = run % 2 == 0 ? 1 : 4;
    const auto out = tmp / fmt::format("out{}", run);
    const auto board = run_campaign(cfg, out);
    std::vector<std::string> got;
    for (auto p : board.order) got.push_back(board.participants[p]);
    if (got == expected) ++in_order;
    const auto csv = text::read_file(out / "leaderboard.csv");
    if (run == 0) reference = csv;
    identical = identical && csv == reference;
  }
  const double elapsed = seconds_since(start);
  return {in_order == kRuns && identical && elapsed < kLimitS,
          fmt::format("{}/{} runs in trajectory order, workers 1 vs 4 {}, {:.1f} s (limit {:.0f} s)",
                      in_order, kRuns, identical ? "identical" : "DIFFER", elapsed, kLimitS)};
}

Verdict budget_enforcement() {
  constexpr double kBudget = 5.0;
  constexpr double kMaxLatency = 1.0;
  TempDir tmp;
  const auto task_dir = testing::small_task(tmp / "task", 4, 10);
  const Task task = load_task(task_dir);

  // Wall clock: two predictions before the budget, a third scheduled after it.
  SolutionRun run;
  run.solution_cmd = testing::agent_command(
      testing::profile_of({{0.5, 0.5}, {1.5, 0.7}, {7.0, 1.0}}, {.sleep_past_budget = true}),
      task_dir, tmp / "wall.json");
  run.task_dir = task_dir;
  run.workspace = tmp / "wall";
  run.time_budget_s = kBudget;
  run.init_grace_s = 30.0;
  const auto outcome = run_solution(run);
  const double latency = outcome.kill_latency_s.value_or(INFINITY);
  bool pre_budget = outcome.events.size() == 2;
  for (const auto& e : outcome.events) pre_budget = pre_budget && e.timestamp_s <= kBudget;
  const auto wall_log = score_run(clip_events(outcome.events, kBudget), task.test_labels,
                                  task.class_count, MetricConfig{kBudget, 60.0});
  pre_budget = pre_budget && wall_log.records.size() == 2;

  // Virtual clock: declared stamps at, and just after, the budget.
  SolutionRun vrun = run;
  vrun.solution_cmd = testing::agent_command(
      testing::profile_of({{1.0, 0.5}, {kCfg.time_budget_s, 0.7}, {kCfg.time_budget_s + 0.5, 1.0}}),
      task_dir, tmp / "virtual.json", true);
  vrun.workspace = tmp / "virtual";
  vrun.time_budget_s = kCfg.time_budget_s;
  vrun.virtual_clock = true;
  const auto voutcome = run_solution(vrun);
  const auto clipped = clip_events(voutcome.events, kCfg.time_budget_s);
  const auto vlog = score_run(clipped, task.test_labels, task.class_count, kCfg);
  const bool late_excluded = voutcome.events.size() == 3 && clipped.size() == 2 &&
                             vlog.curve.size() == 2 && vlog.curve.max_score() == 0.7;

  return {outcome.reason == TerminationReason::budget_exhausted && latency <= kMaxLatency &&
              pre_budget && late_excluded,
          fmt::format("termination {}, kill latency {:.3f} s (limit {:.1f} s), {} pre-budget "
                      "predictions scored, {} of {} virtual events kept",
                      to_string(outcome.reason), latency, kMaxLatency, wall_log.records.size(),
                      clipped.size(), voutcome.events.size())};
}

int run_bench(const std::vector<std::string>& args) {
  std::string cmd = "'" + testing::kBenchExe.string() + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

Verdict replay_determinism() {
  TempDir tmp;
  const auto task_dir = testing::small_task(tmp / "task", 5, 8);
  auto cmd = testing::agent_command(
      testing::profile_of({{3.0, 0.25}, {45.0, 0.5}, {45.5, 0.625}, {700.0, 0.875}}), task_dir,
      tmp / "profile.json", true);
  std::vector<std::string> run_args{"run", "--task", task_dir.string(), "--out",
                                    (tmp / "run").string(), "--virtual-clock", "--time-budget",
                                    "1800", "--"};
  run_args.insert(run_args.end(), cmd.begin(), cmd.end());
  if (run_bench(run_args) != 0) return {false, "bench run failed"};
  const auto labels = (task_dir / "solution" / "labels.csv").string();
  for (const char* out : {"a", "b"}) {
    if (run_bench({"score", "--events", (tmp / "run" / "events").string(), "--labels", labels,
                   "--out", (tmp / out).string()}) != 0) {
      return {false, "bench score failed"};
    }
  }
  int differing = 0;
  for (const char* f : {"scores.jsonl", "curve.csv", "alc.json"}) {
    if (text::read_file(tmp / "a" / f) != text::read_file(tmp / "b" / f)) ++differing;
  }
  const auto n = text::read_lines(tmp / "a" / "scores.jsonl").size();
  return {differing == 0 && n == 4,
          fmt::format("{} scored events replayed twice, {} of 3 artifacts differ", n, differing)};
}

Verdict rank_aggregation() {
  struct Case {
    std::vector<std::vector<double>> grid;
    std::vector<std::vector<double>> ranks;
    std::vector<double> average;
  };
  // Ranks worked out by hand: tied values share the mean of the positions
  // they occupy.
  const std::vector<Case> cases{
      {{{0.8, 0.5}, {0.8, 0.3}, {0.2, 0.9}},
       {{1.5, 2.0}, {1.5, 3.0}, {3.0, 1.0}},
       {1.75, 2.25, 2.0}},
      {{{0.5, 0.1, 0.7}, {0.5, 0.2, 0.7}, {0.5, 0.3, 0.7}},
       {{2.0, 3.0, 2.0}, {2.0, 2.0, 2.0}, {2.0, 1.0, 2.0}},
       {7.0 / 3.0, 2.0, 5.0 / 3.0}},
      {{{0.1, 0.9, 0.4}, {0.9, 0.1, 0.4}, {0.5, 0.5, 0.0}},
       {{3.0, 1.0, 1.5}, {1.0, 3.0, 1.5}, {2.0, 2.0, 3.0}},
       {5.5 / 3.0, 5.5 / 3.0, 7.0 / 3.0}},
      {{{0.0, 1.0}, {0.0, 0.0}, {1.0, 0.0}},
       {{2.5, 1.0}, {2.5, 2.5}, {1.0, 2.5}},
       {1.75, 2.5, 1.75}},
  };
  int failures = 0;
  int checked_columns = 0;
  for (const auto& c : cases) {
    const auto table = average_rank(c.grid);
    if (table.ranks != c.ranks || table.average_rank != c.average) ++failures;
    for (std::size_t k = 0; k < c.grid.front().size(); ++k) {
      std::vector<double> column;
      for (const auto& row : c.grid) column.push_back(row[k]);
      double sum = 0.0;
      for (std::size_t p = 0; p < column.size(); ++p) {
        if (table.ranks[p][k] != testing::counted_fractional_rank(column, p)) ++failures;
        sum += table.ranks[p][k];
      }
      if (sum != 6.0) ++failures;
      ++checked_columns;
    }
  }
  return {failures == 0, fmt::format("{} grids, {} task columns, {} mismatches; rank sums = P(P+1)/2 = 6",
                                     cases.size(), checked_columns, failures)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::off);
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"metric exactness", metric_exactness},
      {"analytic anchors", analytic_anchors},
      {"balanced accuracy oracle", balanced_accuracy_oracle},
      {"early weighting", early_weighting},
      {"end-to-end dominance", end_to_end_dominance},
      {"budget enforcement", budget_enforcement},
      {"replay determinism", replay_determinism},
      {"rank aggregation", rank_aggregation},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    fmt::print("{} {}: {}\n", v.pass ? "PASS" : "FAIL", name, v.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
             criteria.size());
  return failed == 0 ? 0 : 1;
}
