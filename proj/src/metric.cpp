#include "abench/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace abench {

void MetricConfig::validate() const {
  if (!std::isfinite(time_budget_s) || time_budget_s <= 0.0) {
    throw MetricError("time budget must be positive");
  }
  if (!std::isfinite(t0_s) || t0_s <= 0.0) {
    throw MetricError("reference time t0 must be positive");
  }
}

LearningCurve::LearningCurve(std::vector<CurvePoint> points)
    : points_(std::move(points)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!std::isfinite(p.t_s) || p.t_s < 0.0) {
      throw MetricError("invalid curve timestamp");
    }
    if (!(p.score >= 0.0 && p.score <= 1.0)) {
      throw MetricError("curve score outside [0,1]");
    }
    if (i > 0 && !(points_[i - 1].t_s < p.t_s)) {
      throw MetricError("curve timestamps not strictly increasing");
    }
  }
}

double LearningCurve::value_at(double t_s) const {
  auto it = std::upper_bound(
      points_.begin(), points_.end(), t_s,
      [](double t, const CurvePoint& p) { return t < p.t_s; });
  if (it == points_.begin()) return 0.0;
  return std::prev(it)->score;
}

double LearningCurve::max_score() const {
  double m = 0.0;
  for (const auto& p : points_) m = std::max(m, p.score);
  return m;
}

ConfusionMatrix::ConfusionMatrix(std::size_t class_count)
    : class_count_(class_count), counts_(class_count * class_count, 0) {
  if (class_count < 2) throw MetricError("confusion matrix needs C >= 2");
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t true_class) const {
  auto first = counts_.begin() + static_cast<std::ptrdiff_t>(true_class * class_count_);
  return std::accumulate(first, first + static_cast<std::ptrdiff_t>(class_count_),
                         std::uint64_t{0});
}

ConfusionMatrix ConfusionMatrix::from_rows(
    const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix cm(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) {
      throw MetricError("confusion matrix must be square");
    }
    for (std::size_t c = 0; c < rows.size(); ++c) cm.at(r, c) = rows[r][c];
  }
  return cm;
}

double balanced_accuracy(const ConfusionMatrix& cm) {
  const std::size_t n = cm.class_count();
  double recall_sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const auto total = cm.row_sum(c);
    if (total == 0) throw MetricError("class absent from test labels");
    recall_sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(total);
  }
  return recall_sum / static_cast<double>(n);
}

ConfusionMatrix confusion_from_scores(const PredictionMatrix& pred,
                                      std::span<const int> labels,
                                      std::size_t class_count) {
  if (pred.rows() != labels.size()) {
    throw MetricError("prediction/label count mismatch");
  }
  if (pred.cols() != class_count) throw MetricError("malformed prediction row");
  ConfusionMatrix cm(class_count);
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    const auto row = pred.row(i);
    std::size_t best = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!std::isfinite(row[c])) throw MetricError("non-finite score");
      if (row[c] > row[best]) best = c;
    }
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
      throw MetricError("label out of range");
    }
    ++cm.at(static_cast<std::size_t>(label), best);
  }
  return cm;
}

double time_transform(double t_s, const MetricConfig& cfg) {
  cfg.validate();
  if (!(t_s >= 0.0 && t_s <= cfg.time_budget_s)) {
    throw MetricError("timestamp outside budget");
  }
  if (t_s == cfg.time_budget_s) return 1.0;
  return std::log1p(t_s / cfg.t0_s) / std::log1p(cfg.time_budget_s / cfg.t0_s);
}

double alc(const LearningCurve& curve, const MetricConfig& cfg) {
  cfg.validate();
  const auto& pts = curve.points();
  if (pts.empty()) return 0.0;
  if (pts.back().t_s > cfg.time_budget_s) throw MetricError("unclipped curve");

  double area = 0.0;
  double left = time_transform(pts.front().t_s, cfg);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double right = i + 1 < pts.size()
                             ? time_transform(pts[i + 1].t_s, cfg)
                             : 1.0;
    area += pts[i].score * (right - left);
    left = right;
  }
  return area;
}

double alc_numeric_oracle(const LearningCurve& curve, const MetricConfig& cfg,
                          std::size_t grid_points) {
  cfg.validate();
  const double budget = cfg.time_budget_s;
  const double t0 = cfg.t0_s;

  // s(t) is smooth between breakpoints, so each piece gets its own Simpson
  // panel set and the jumps never fall inside a panel.
  std::vector<double> cuts{0.0};
  for (const auto& p : curve.points()) {
    if (p.t_s > budget) throw MetricError("unclipped curve");
    if (p.t_s > cuts.back()) cuts.push_back(p.t_s);
  }
  if (budget > cuts.back()) cuts.push_back(budget);

  const auto weight = [t0](double t) { return 1.0 / (t + t0); };
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k];
    const double b = cuts[k + 1];
    const double s = curve.value_at(0.5 * (a + b));
    if (s == 0.0) continue;
    auto panels = static_cast<std::size_t>(
        std::ceil(static_cast<double>(grid_points) * (b - a) / budget));
    panels = std::max<std::size_t>(2, panels + (panels % 2));
    const double h = (b - a) / static_cast<double>(panels);
    double sum = weight(a) + weight(b);
    for (std::size_t j = 1; j < panels; ++j) {
      sum += (j % 2 == 1 ? 4.0 : 2.0) * weight(a + h * static_cast<double>(j));
    }
    integral += s * sum * h / 3.0;
  }
  return integral / std::log(1.0 + budget / t0);
}

RankTable average_rank(const std::vector<std::vector<double>>& alc_grid) {
  RankTable table;
  table.participants = alc_grid.size();
  if (table.participants == 0) throw MetricError("no participants");
  table.tasks = alc_grid.front().size();
  if (table.tasks == 0) throw MetricError("no tasks");
  for (const auto& row : alc_grid) {
    if (row.size() != table.tasks) throw MetricError("ragged ALC grid");
    for (double v : row) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw MetricError("invalid score");
      }
    }
  }
  table.alc = alc_grid;
  table.ranks.assign(table.participants, std::vector<double>(table.tasks, 0.0));

  std::vector<std::size_t> idx(table.participants);
  for (std::size_t k = 0; k < table.tasks; ++k) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return alc_grid[a][k] > alc_grid[b][k];
    });
    for (std::size_t first = 0; first < idx.size();) {
      std::size_t last = first + 1;
      while (last < idx.size() &&
             alc_grid[idx[last]][k] == alc_grid[idx[first]][k]) {
        ++last;
      }
      // Positions first+1 .. last share their mean.
      const double shared = 0.5 * static_cast<double>(first + 1 + last);
      for (std::size_t j = first; j < last; ++j) table.ranks[idx[j]][k] = shared;
      first = last;
    }
  }

  table.average_rank.resize(table.participants);
  for (std::size_t p = 0; p < table.participants; ++p) {
    const auto& r = table.ranks[p];
    table.average_rank[p] =
        std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(table.tasks);
  }
  table.order.resize(table.participants);
  std::iota(table.order.begin(), table.order.end(), std::size_t{0});
  std::stable_sort(table.order.begin(), table.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return table.average_rank[a] < table.average_rank[b];
                   });
  return table;
}

}  // namespace abench
