#pragma once

// Test-only helpers and independent oracles. Nothing here calls into the
// code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "abench/metric.hpp"
#include "abench/task.hpp"

namespace abench::testing {

#ifndef ABENCH_BENCH_EXE
#error "ABENCH_BENCH_EXE must point at the bench executable"
#endif
inline const std::filesystem::path kBenchExe = ABENCH_BENCH_EXE;

class TempDir {
 public:
  TempDir() {
    std::string templ =
        (std::filesystem::temp_directory_path() / "abench-test-XXXXXX").string();
    path_ = ::mkdtemp(templ.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Runs `fn` and returns the exception message, or "" if nothing was thrown.
inline std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

/// Per-sample loop: decode each row by scanning for the first maximum, then
/// average the per-class hit fractions.
inline double brute_force_balanced_accuracy(const std::vector<std::vector<double>>& scores,
                                            const std::vector<int>& labels, int classes) {
  double total = 0.0;
  for (int c = 0; c < classes; ++c) {
    int seen = 0;
    int hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      ++seen;
      int best = 0;
      for (int k = 1; k < classes; ++k) {
        if (scores[i][static_cast<std::size_t>(k)] > scores[i][static_cast<std::size_t>(best)]) best = k;
      }
      if (best == c) ++hit;
    }
    total += static_cast<double>(hit) / seen;
  }
  return total / classes;
}

/// Nearest-centroid classifier trained on task.train, scored on the hidden
/// labels with a direct per-class count.
inline double nearest_centroid_balanced_accuracy(const Task& task) {
  const auto C = static_cast<std::size_t>(task.class_count);
  const std::size_t dim = task.train.front().features.size();
  std::vector<std::vector<double>> centroid(C, std::vector<double>(dim, 0.0));
  std::vector<double> count(C, 0.0);
  for (const auto& s : task.train) {
    for (std::size_t d = 0; d < dim; ++d) centroid[static_cast<std::size_t>(s.label)][d] += s.features[d];
    count[static_cast<std::size_t>(s.label)] += 1.0;
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (auto& v : centroid[c]) v /= count[c];
  }
  std::vector<double> hits(C, 0.0), seen(C, 0.0);
  for (std::size_t i = 0; i < task.test.size(); ++i) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < C; ++c) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = task.test[i][d] - centroid[c][d];
        d2 += diff * diff;
      }
      if (d2 < best_d) {
        best_d = d2;
        best = c;
      }
    }
    const auto truth = static_cast<std::size_t>(task.test_labels[i]);
    seen[truth] += 1.0;
    if (best == truth) hits[truth] += 1.0;
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) sum += hits[c] / seen[c];
  return sum / static_cast<double>(C);
}

/// Fractional rank from counting: 1 + #strictly better + (#ties - 1) / 2.
inline double counted_fractional_rank(const std::vector<double>& column, std::size_t who) {
  double better = 0.0;
  double ties = 0.0;
  for (double v : column) {
    if (v > column[who]) better += 1.0;
    if (v == column[who]) ties += 1.0;
  }
  return 1.0 + better + (ties - 1.0) / 2.0;
}

/// Random valid curve with up to `max_points` points in [0, budget].
inline LearningCurve random_curve(std::mt19937_64& rng, std::size_t max_points, double budget) {
  std::uniform_int_distribution<std::size_t> n_dist(0, max_points);
  std::uniform_real_distribution<double> t_dist(0.0, budget);
  std::uniform_real_distribution<double> s_dist(0.0, 1.0);
  const std::size_t n = n_dist(rng);
  std::vector<double> times;
  while (times.size() < n) {
    times.push_back(t_dist(rng));
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
  }
  std::vector<CurvePoint> pts;
  for (double t : times) pts.push_back({t, s_dist(rng)});
  return LearningCurve(std::move(pts));
}

}  // namespace abench::testing
