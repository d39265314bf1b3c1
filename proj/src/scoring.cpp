#include "abench/scoring.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "abench/text.hpp"

namespace abench {
namespace fs = std::filesystem;

LearningCurve curve_from_records(std::span<const ScoreRecord> records) {
  std::vector<CurvePoint> points;
  points.reserve(records.size());
  for (const auto& r : records) {
    if (!points.empty() && points.back().t_s == r.timestamp_s) {
      points.back().score = r.balanced_acc;
    } else {
      points.push_back({r.timestamp_s, r.balanced_acc});
    }
  }
  return LearningCurve(std::move(points));
}

ScoreLog score_run(std::span<const PredictionEvent> events,
                   std::span<const int> labels, std::size_t class_count,
                   const MetricConfig& cfg, std::string task_name) {
  cfg.validate();
  ScoreLog log;
  log.task = std::move(task_name);
  log.config = cfg;
  for (const auto& ev : events) {
    if (ev.matrix.rows() != labels.size() || ev.matrix.cols() != class_count) {
      log.excluded.push_back(
          {ev.sequence_no, fmt::format("shape {}x{}, expected {}x{}", ev.matrix.rows(),
                                       ev.matrix.cols(), labels.size(), class_count)});
      continue;
    }
    try {
      const auto cm = confusion_from_scores(ev.matrix, labels, class_count);
      log.records.push_back({ev.sequence_no, ev.timestamp_s, balanced_accuracy(cm)});
    } catch (const MetricError& e) {
      log.excluded.push_back({ev.sequence_no, e.what()});
    }
  }
  for (const auto& x : log.excluded) {
    spdlog::warn("{}: event {} excluded: {}", log.task, x.sequence_no, x.reason);
  }
  std::stable_sort(log.records.begin(), log.records.end(),
                   [](const ScoreRecord& a, const ScoreRecord& b) {
                     return a.timestamp_s < b.timestamp_s;
                   });
  log.curve = curve_from_records(log.records);
  log.alc = alc(log.curve, cfg);
  return log;
}

namespace {

std::string render_svg(const ScoreLog& log) {
  constexpr double kWidth = 640, kHeight = 360;
  constexpr double kLeft = 56, kRight = 16, kTop = 32, kBottom = 48;
  constexpr double plot_w = kWidth - kLeft - kRight;
  constexpr double plot_h = kHeight - kTop - kBottom;
  const auto& cfg = log.config;
  auto x = [&](double t) { return kLeft + plot_w * time_transform(t, cfg); };
  auto y = [&](double s) { return kTop + plot_h * (1.0 - s); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"11\">\n",
      kWidth, kHeight, kWidth, kHeight);
  svg += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n",
                     kWidth, kHeight);
  svg += fmt::format(
      "<text x=\"{:.1f}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{} "
      "ALC = {:.4f}</text>\n",
      kWidth / 2, log.task.empty() ? std::string("learning curve") : log.task, log.alc);

  // Horizontal grid and score labels.
  for (int i = 0; i <= 4; ++i) {
    const double s = i / 4.0;
    svg += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#ddd\"/>\n"
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.2f}</text>\n",
        kLeft, y(s), kLeft + plot_w, y(s), kLeft - 6, y(s) + 4, s);
  }
  // Time ticks on the transformed axis.
  const double ticks[] = {0, 1, 5, 10, 30, 60, 120, 300, 600, 1200, 1800, 3600, 7200};
  for (double t : ticks) {
    if (t > cfg.time_budget_s) break;
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#ddd\"/>\n"
        "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\">{4}</text>\n",
        x(t), kTop, kTop + plot_h, kTop + plot_h + 14, text::format_double(t));
  }
  svg += fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">time (s), "
      "log(1 + t/{}) / log(1 + {}/{})</text>\n",
      kLeft + plot_w / 2, kHeight - 10, text::format_double(cfg.t0_s),
      text::format_double(cfg.time_budget_s), text::format_double(cfg.t0_s));

  // Step path: zero until the first prediction, then hold each score.
  std::string path = fmt::format("M {:.2f} {:.2f}", x(0), y(0));
  for (const auto& p : log.curve.points()) {
    path += fmt::format(" H {:.2f} V {:.2f}", x(p.t_s), y(p.score));
  }
  path += fmt::format(" H {:.2f}", x(cfg.time_budget_s));
  svg += fmt::format(
      "<path d=\"{} V {:.2f} Z\" fill=\"#4a90d9\" fill-opacity=\"0.25\" stroke=\"none\"/>\n",
      path, y(0));
  svg += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\"/>\n",
                     path);
  svg += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
      "stroke=\"black\"/>\n</svg>\n",
      kLeft, kTop, plot_w, plot_h);
  return svg;
}

}  // namespace

std::vector<fs::path> emit_artifacts(const ScoreLog& log, const fs::path& out) {
  std::string scores;
  for (const auto& r : log.records) {
    nlohmann::ordered_json j;
    j["seq"] = r.sequence_no;
    j["t_s"] = r.timestamp_s;
    j["balanced_acc"] = r.balanced_acc;
    scores += j.dump() + "\n";
  }

  std::string curve = "t_s,score\n";
  for (const auto& p : log.curve.points()) {
    curve += text::format_double(p.t_s) + "," + text::format_double(p.score) + "\n";
  }

  nlohmann::ordered_json summary;
  summary["alc"] = log.alc;
  summary["time_budget_s"] = log.config.time_budget_s;
  summary["t0_s"] = log.config.t0_s;
  summary["n_predictions"] = log.records.size();

  const std::vector<std::pair<fs::path, std::string>> files{
      {out / "scores.jsonl", std::move(scores)},
      {out / "curve.csv", std::move(curve)},
      {out / "alc.json", summary.dump(2) + "\n"},
      {out / "curve.svg", render_svg(log)},
  };
  std::vector<fs::path> written;
  try {
    fs::create_directories(out);
    for (const auto& [path, body] : files) {
      text::write_file_atomic(path, body);
      written.push_back(path);
    }
  } catch (const std::exception& e) {
    throw ScoringError(std::string("artifact write failure: ") + e.what());
  }
  return written;
}

LearningCurve read_curve_csv(const fs::path& file) {
  const auto lines = text::read_lines(file);
  if (lines.empty() || lines.front() != "t_s,score") {
    throw ScoringError("curve.csv: missing header");
  }
  std::vector<CurvePoint> points;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = text::split(lines[i], ',');
    auto t = fields.size() == 2 ? text::parse_double(fields[0]) : std::nullopt;
    auto s = fields.size() == 2 ? text::parse_double(fields[1]) : std::nullopt;
    if (!t || !s) throw ScoringError(fmt::format("curve.csv line {} malformed", i + 1));
    points.push_back({*t, *s});
  }
  return LearningCurve(std::move(points));
}

}  // namespace abench
