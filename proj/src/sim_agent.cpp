#include "abench/sim_agent.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "abench/ingestion.hpp"
#include "abench/task.hpp"
#include "abench/text.hpp"

namespace abench {
namespace fs = std::filesystem;
using nlohmann::json;

void TrajectoryProfile::validate() const {
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& s = schedule[i];
    if (!std::isfinite(s.emit_at_s) || s.emit_at_s < 0.0) {
      throw std::invalid_argument("schedule time must be finite and >= 0");
    }
    if (i > 0 && !(schedule[i - 1].emit_at_s < s.emit_at_s)) {
      throw std::invalid_argument("schedule times must strictly increase");
    }
    if (!(s.target_acc >= 0.0 && s.target_acc <= 1.0)) {
      throw std::invalid_argument("schedule targets must lie in [0,1]");
    }
  }
}

TrajectoryProfile profile_from_json(const json& j) {
  TrajectoryProfile p;
  for (const auto& step : j.at("schedule")) {
    if (!step.is_array() || step.size() != 2) {
      throw std::invalid_argument("schedule entries must be [t_s, acc]");
    }
    p.schedule.push_back({step[0].get<double>(), step[1].get<double>()});
  }
  if (j.contains("flags")) {
    const auto& f = j.at("flags");
    p.flags.finish_with_done = f.value("finish_with_done", false);
    p.flags.sleep_past_budget = f.value("sleep_past_budget", false);
    p.flags.skip_ready = f.value("skip_ready", false);
    if (f.contains("corrupt_file_at") && !f.at("corrupt_file_at").is_null()) {
      p.flags.corrupt_file_at = f.at("corrupt_file_at").get<std::size_t>();
    }
  }
  if (j.contains("labels_path") && !j.at("labels_path").is_null()) {
    p.labels_path = j.at("labels_path").get<std::string>();
  }
  p.validate();
  return p;
}

json profile_to_json(const TrajectoryProfile& p) {
  json schedule = json::array();
  for (const auto& s : p.schedule) schedule.push_back({s.emit_at_s, s.target_acc});
  json flags = {
      {"finish_with_done", p.flags.finish_with_done},
      {"sleep_past_budget", p.flags.sleep_past_budget},
      {"skip_ready", p.flags.skip_ready},
  };
  if (p.flags.corrupt_file_at) flags["corrupt_file_at"] = *p.flags.corrupt_file_at;
  json j = {{"schedule", schedule}, {"flags", flags}};
  if (p.labels_path) j["labels_path"] = p.labels_path->string();
  return j;
}

TrajectoryProfile load_profile(const fs::path& file) {
  try {
    return profile_from_json(json::parse(text::read_file(file)));
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed profile " + file.string() + ": " + e.what());
  }
}

void save_profile(const TrajectoryProfile& p, const fs::path& file) {
  text::write_file_atomic(file, profile_to_json(p).dump(2) + "\n");
}

namespace {

std::vector<std::size_t> class_sizes(std::span<const int> labels, std::size_t classes) {
  std::vector<std::size_t> n(classes, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw std::invalid_argument("label out of range");
    }
    ++n[static_cast<std::size_t>(l)];
  }
  return n;
}

std::size_t correct_quota(double target, std::size_t n) {
  return static_cast<std::size_t>(std::lround(target * static_cast<double>(n)));
}

}  // namespace

PredictionMatrix predictions_with_target_acc(std::span<const int> labels,
                                             std::size_t class_count, double target) {
  const auto sizes = class_sizes(labels, class_count);
  std::vector<std::size_t> quota(class_count);
  for (std::size_t c = 0; c < class_count; ++c) quota[c] = correct_quota(target, sizes[c]);

  PredictionMatrix m(labels.size(), class_count);
  std::vector<std::size_t> used(class_count, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    const bool hit = used[c]++ < quota[c];
    m(i, hit ? c : (c + 1) % class_count) = 1.0;
  }
  return m;
}

double realizable_accuracy(std::span<const int> labels, std::size_t class_count,
                           double target) {
  const auto sizes = class_sizes(labels, class_count);
  double sum = 0.0;
  for (std::size_t n : sizes) {
    if (n == 0) throw std::invalid_argument("class absent from test labels");
    sum += static_cast<double>(correct_quota(target, n)) / static_cast<double>(n);
  }
  return sum / static_cast<double>(class_count);
}

AgentEnvironment AgentEnvironment::from_process_env() {
  auto get = [](const char* key) {
    const char* v = std::getenv(key);
    if (v == nullptr) throw std::runtime_error(fmt::format("{} not set", key));
    return std::string(v);
  };
  AgentEnvironment env;
  env.task_dir = get("TASK_DIR");
  env.output_dir = get("OUTPUT_DIR");
  auto budget = text::parse_double(get("TIME_BUDGET_S"));
  auto classes = text::parse_int(get("CLASS_COUNT"));
  auto tests = text::parse_int(get("TEST_COUNT"));
  if (!budget || !classes || !tests || *classes < 2 || *tests < 0) {
    throw std::runtime_error("malformed wire-protocol environment");
  }
  env.time_budget_s = *budget;
  env.class_count = static_cast<std::size_t>(*classes);
  env.test_count = static_cast<std::size_t>(*tests);
  return env;
}

int run_agent(const TrajectoryProfile& profile, const AgentEnvironment& env,
              bool virtual_clock) {
  using namespace std::chrono;
  profile.validate();
  if (!profile.labels_path) {
    spdlog::error("agent profile has no labels_path; scripted agents need test labels");
    return 2;
  }
  const auto labels = read_labels(*profile.labels_path);
  if (labels.size() != env.test_count) {
    spdlog::error("labels file has {} rows, TEST_COUNT is {}", labels.size(), env.test_count);
    return 2;
  }

  auto hang = [] {
    // Only the harness ends this.
    while (true) std::this_thread::sleep_for(hours(1));
  };

  if (profile.flags.skip_ready) hang();
  std::ofstream(env.output_dir / kReadyMarker).close();
  const auto origin = steady_clock::now();

  for (std::size_t k = 0; k < profile.schedule.size(); ++k) {
    const auto& step = profile.schedule[k];
    if (!virtual_clock) {
      std::this_thread::sleep_until(
          origin + duration_cast<steady_clock::duration>(duration<double>(step.emit_at_s)));
    }
    const auto final_path = env.output_dir / fmt::format("pred_{}.predict", k);
    if (virtual_clock) {
      auto time_path = final_path;
      time_path.replace_extension(".time");
      text::write_file_atomic(time_path, text::format_double(step.emit_at_s) + "\n");
    }
    const std::string body =
        profile.flags.corrupt_file_at == k
            ? std::string("corrupt\n")
            : format_prediction_matrix(
                  predictions_with_target_acc(labels, env.class_count, step.target_acc));
    text::write_file_atomic(final_path, body);
  }

  if (profile.flags.sleep_past_budget) hang();
  if (profile.flags.finish_with_done) std::ofstream(env.output_dir / kDoneMarker).close();
  return 0;
}

}  // namespace abench
