#pragma once

// Scoring side: turns prediction events into a learning curve and its ALC,
// and writes the curve artifacts.

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "abench/ingestion.hpp"
#include "abench/metric.hpp"

namespace abench {

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScoreRecord {
  std::size_t sequence_no = 0;
  double timestamp_s = 0.0;
  double balanced_acc = 0.0;
};

struct ExcludedEvent {
  std::size_t sequence_no = 0;
  std::string reason;
};

struct ScoreLog {
  std::string task;
  MetricConfig config;
  std::vector<ScoreRecord> records;  ///< ordered by timestamp
  std::vector<ExcludedEvent> excluded;
  LearningCurve curve;
  double alc = 0.0;
};

/// Step curve induced by a record sequence. Records sharing a timestamp
/// collapse to the last one, which is the most recent prediction.
LearningCurve curve_from_records(std::span<const ScoreRecord> records);

/// Scores every event; events whose matrix cannot be scored are excluded
/// and listed in ScoreLog::excluded. Events must already be clipped.
ScoreLog score_run(std::span<const PredictionEvent> events,
                   std::span<const int> labels, std::size_t class_count,
                   const MetricConfig& cfg, std::string task_name = {});

/// Writes scores.jsonl, curve.csv, alc.json and curve.svg into `out` and
/// returns their paths. Throws ScoringError("artifact write failure").
std::vector<std::filesystem::path> emit_artifacts(const ScoreLog& log,
                                                  const std::filesystem::path& out);

/// Parses a curve.csv written by emit_artifacts.
LearningCurve read_curve_csv(const std::filesystem::path& file);

}  // namespace abench
