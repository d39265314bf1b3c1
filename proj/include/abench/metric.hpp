#pragma once

// Anytime-learning metrics: balanced accuracy, the logarithmic time
// transformation, area under the learning curve (ALC) and average-rank
// aggregation across tasks.
//
// Everything in this header is a pure function of its arguments and may be
// called concurrently from any number of evaluation workers.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace abench {

/// Thrown for any precondition violation in metric computation.
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricConfig {
  double time_budget_s = 1800.0;  ///< T
  double t0_s = 60.0;             ///< reference time of the log transform

  /// Throws MetricError unless both fields are finite and positive.
  void validate() const;
};

struct CurvePoint {
  double t_s = 0.0;
  double score = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Right-continuous step function: zero before the first point, then the
/// score of the most recent point. Timestamps strictly increase.
class LearningCurve {
 public:
  LearningCurve() = default;
  /// Throws MetricError if timestamps are negative, non-finite or not
  /// strictly increasing, or if a score lies outside [0, 1].
  explicit LearningCurve(std::vector<CurvePoint> points);

  const std::vector<CurvePoint>& points() const { return points_; }
  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }

  /// s(t) of the induced step function.
  double value_at(double t_s) const;
  double max_score() const;

 private:
  std::vector<CurvePoint> points_;
};

/// Row-major C×C grid; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t class_count);

  std::size_t class_count() const { return class_count_; }
  std::uint64_t at(std::size_t true_class, std::size_t predicted) const {
    return counts_[true_class * class_count_ + predicted];
  }
  std::uint64_t& at(std::size_t true_class, std::size_t predicted) {
    return counts_[true_class * class_count_ + predicted];
  }
  std::uint64_t row_sum(std::size_t true_class) const;

  /// Builds a matrix from nested rows; all rows must have the same length.
  static ConfusionMatrix from_rows(
      const std::vector<std::vector<std::uint64_t>>& rows);

 private:
  std::size_t class_count_;
  std::vector<std::uint64_t> counts_;
};

/// Test-count × class-count score rows emitted by a solution at one instant.
class PredictionMatrix {
 public:
  PredictionMatrix() = default;
  PredictionMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) {
    return {values_.data() + r * cols_, cols_};
  }
  double& operator()(std::size_t r, std::size_t c) {
    return values_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }

  friend bool operator==(const PredictionMatrix&,
                         const PredictionMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Mean per-class recall. Throws "class absent from test labels" when a row
/// of the matrix is empty.
double balanced_accuracy(const ConfusionMatrix& cm);

/// Argmax decoding of each score row (lowest class index wins ties).
ConfusionMatrix confusion_from_scores(const PredictionMatrix& pred,
                                      std::span<const int> labels,
                                      std::size_t class_count);

/// log(1 + t/t0) / log(1 + T/t0); defined on the closed interval [0, T].
double time_transform(double t_s, const MetricConfig& cfg);

/// Exact area under the step curve against the transformed time axis.
/// Points beyond T must be clipped by the caller.
double alc(const LearningCurve& curve, const MetricConfig& cfg);

/// Quadrature of (1/log(1+T/t0)) ∫ s(t)/(t+t0) dt using `grid_points`
/// Simpson nodes in total. Only intended as a test oracle for alc().
double alc_numeric_oracle(const LearningCurve& curve, const MetricConfig& cfg,
                          std::size_t grid_points);

struct RankTable {
  std::size_t participants = 0;
  std::size_t tasks = 0;
  std::vector<std::vector<double>> alc;    ///< participants × tasks
  std::vector<std::vector<double>> ranks;  ///< participants × tasks
  std::vector<double> average_rank;        ///< per participant
  /// Participant indices sorted by ascending average rank (stable).
  std::vector<std::size_t> order;
};

/// Fractional ranking per task (rank 1 = highest ALC, ties share the mean
/// position) averaged over tasks.
RankTable average_rank(const std::vector<std::vector<double>>& alc_grid);

}  // namespace abench
