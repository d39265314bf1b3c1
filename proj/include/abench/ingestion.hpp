#pragma once

// Ingestion side of an evaluation: launches a solution process against a
// task, enforces the initialization grace period and the time budget, and
// collects timestamped predictions published through the file protocol.
//
// Wire protocol. The solution receives TASK_DIR (ingestion view of the task,
// without labels), OUTPUT_DIR, TIME_BUDGET_S, CLASS_COUNT and TEST_COUNT.
// Inside OUTPUT_DIR it writes:
//   ready.marker         empty; starts the budget clock
//   pred_<k>.predict     TEST_COUNT lines of CLASS_COUNT space-separated
//                        floats, published by renaming from a *.tmp name
//   done.marker          requests early termination
// Under a virtual clock the solution also writes pred_<k>.time, holding the
// declared timestamp, before publishing pred_<k>.predict.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "abench/metric.hpp"

namespace abench {

inline constexpr const char* kReadyMarker = "ready.marker";
inline constexpr const char* kDoneMarker = "done.marker";
inline constexpr double kDefaultInitGraceS = 1200.0;

enum class TerminationReason {
  done_flag,
  budget_exhausted,
  process_exit,
  init_timeout,
  protocol_error,
};

std::string_view to_string(TerminationReason r);

/// The solution command could not be started at all.
class SpawnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PredictionEvent {
  std::size_t sequence_no = 0;
  double timestamp_s = 0.0;  ///< seconds since the clock origin
  PredictionMatrix matrix;
  std::string file;  ///< published file name, e.g. "pred_3.predict"
};

struct SolutionRun {
  std::vector<std::string> solution_cmd;
  std::filesystem::path task_dir;
  std::filesystem::path workspace;  ///< must be absent or empty
  double init_grace_s = kDefaultInitGraceS;
  double time_budget_s = 1800.0;
  /// Trust pred_<k>.time instead of wall time. Test campaigns only.
  bool virtual_clock = false;
  /// When set, every accepted prediction is copied here as it arrives.
  std::optional<std::filesystem::path> events_dir;
  std::chrono::milliseconds poll_interval{5};
};

struct RunOutcome {
  std::vector<PredictionEvent> events;
  TerminationReason reason = TerminationReason::process_exit;
  std::vector<std::string> protocol_errors;
  std::size_t skipped_files = 0;
  /// Delay between budget expiry and the child being reaped.
  std::optional<double> kill_latency_s;
  std::optional<int> exit_code;
  std::uint64_t peak_rss_bytes = 0;
  bool space_budget_exceeded = false;
};

/// One newly visible prediction file.
struct PublishedPrediction {
  std::size_t sequence_no = 0;
  double timestamp_s = 0.0;
  std::filesystem::path path;
};

/// Polling watcher over a prediction directory. Only files matching
/// pred_<k>.predict are reported, so unrenamed temporaries are invisible.
/// Each poll returns the new files in sequence order stamped with `now_s`.
class PredictionWatcher {
 public:
  explicit PredictionWatcher(std::filesystem::path dir);

  std::vector<PublishedPrediction> poll(double now_s);

  /// Sequence gaps and out-of-order publications seen so far.
  const std::vector<std::string>& protocol_errors() const { return errors_; }
  std::size_t next_expected() const { return next_; }

 private:
  std::filesystem::path dir_;
  std::size_t next_ = 0;
  std::set<std::size_t> seen_;
  std::vector<std::string> errors_;
};

/// Parses a prediction file. With expected dimensions, any deviation is a
/// ProtocolError; without, the first line fixes the column count and the
/// file must be rectangular.
PredictionMatrix parse_prediction_file(
    const std::filesystem::path& file,
    std::optional<std::size_t> expected_rows = std::nullopt,
    std::optional<std::size_t> expected_cols = std::nullopt);

std::string format_prediction_matrix(const PredictionMatrix& m);

/// Runs one solution to completion. `on_event` is invoked for every accepted
/// prediction in delivery order.
RunOutcome run_solution(
    const SolutionRun& run,
    const std::function<void(const PredictionEvent&)>& on_event = {});

/// Drops events stamped strictly after the budget; an event exactly at the
/// budget is retained.
std::vector<PredictionEvent> clip_events(std::vector<PredictionEvent> events,
                                         double time_budget_s);

// Persisted event directories: meta.json, events.jsonl and a copy of every
// accepted prediction file.

struct EventLogMeta {
  std::string task;
  int class_count = 0;
  std::size_t test_count = 0;
  double time_budget_s = 0.0;
};

struct EventLog {
  EventLogMeta meta;
  std::vector<PredictionEvent> events;
};

void write_event_log_meta(const std::filesystem::path& dir,
                          const EventLogMeta& meta);
/// Copies the prediction file and appends its index record.
void append_event(const std::filesystem::path& dir, const PredictionEvent& event,
                  const std::filesystem::path& source_file);
/// Events whose file no longer parses are kept with an empty matrix so the
/// scorer can flag them.
EventLog load_event_log(const std::filesystem::path& dir);

}  // namespace abench
