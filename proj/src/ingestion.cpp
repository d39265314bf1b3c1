#include "abench/ingestion.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "abench/task.hpp"
#include "abench/text.hpp"

extern char** environ;

namespace abench {
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using nlohmann::json;

std::string_view to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::done_flag: return "done_flag";
    case TerminationReason::budget_exhausted: return "budget_exhausted";
    case TerminationReason::process_exit: return "process_exit";
    case TerminationReason::init_timeout: return "init_timeout";
    case TerminationReason::protocol_error: return "protocol_error";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Watcher

PredictionWatcher::PredictionWatcher(fs::path dir) : dir_(std::move(dir)) {}

std::vector<PublishedPrediction> PredictionWatcher::poll(double now_s) {
  static const std::regex kName(R"(pred_(\d+)\.predict)");
  std::vector<std::size_t> fresh;
  std::error_code ec;
  for (fs::directory_iterator it(dir_, ec), end; !ec && it != end; it.increment(ec)) {
    const auto name = it->path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, kName)) continue;
    const auto k = static_cast<std::size_t>(std::stoull(m[1].str()));
    if (!seen_.contains(k)) fresh.push_back(k);
  }
  std::sort(fresh.begin(), fresh.end());

  std::vector<PublishedPrediction> out;
  for (std::size_t k : fresh) {
    seen_.insert(k);
    if (k < next_) {
      errors_.push_back(fmt::format("pred_{} published after pred_{}", k, next_ - 1));
      continue;
    }
    if (k > next_) {
      errors_.push_back(fmt::format("sequence gap: expected pred_{}, got pred_{}",
                                    next_, k));
    }
    next_ = k + 1;
    out.push_back({k, now_s, dir_ / fmt::format("pred_{}.predict", k)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction file format

PredictionMatrix parse_prediction_file(const fs::path& file,
                                       std::optional<std::size_t> expected_rows,
                                       std::optional<std::size_t> expected_cols) {
  std::vector<std::string> lines;
  try {
    lines = text::read_lines(file);
  } catch (const std::exception& e) {
    throw ProtocolError(e.what());
  }
  if (expected_rows && lines.size() != *expected_rows) {
    throw ProtocolError(fmt::format("{}: {} lines, expected {}",
                                    file.filename().string(), lines.size(),
                                    *expected_rows));
  }
  std::size_t cols = expected_cols.value_or(
      lines.empty() ? 0 : text::split_ws(lines.front()).size());
  PredictionMatrix m(lines.size(), cols);
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto fields = text::split_ws(lines[r]);
    if (fields.size() != cols) {
      throw ProtocolError(fmt::format("{} line {}: {} values, expected {}",
                                      file.filename().string(), r + 1,
                                      fields.size(), cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      auto v = text::parse_double(fields[c]);
      if (!v) {
        throw ProtocolError(fmt::format("{} line {}: bad value '{}'",
                                        file.filename().string(), r + 1,
                                        std::string(fields[c])));
      }
      m(r, c) = *v;
    }
  }
  return m;
}

std::string format_prediction_matrix(const PredictionMatrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ' ';
      out += text::format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Child process handling

namespace {

class ChildProcess {
 public:
  ChildProcess(const std::vector<std::string>& argv,
               const std::vector<std::string>& env, const fs::path& cwd,
               const fs::path& log_file) {
    if (argv.empty()) throw SpawnError("empty solution command");
    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    std::vector<char*> cenv;
    for (const auto& e : env) cenv.push_back(const_cast<char*>(e.c_str()));
    cenv.push_back(nullptr);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(&actions, 1, log_file.c_str(),
                                     O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_adddup2(&actions, 1, 2);
    posix_spawn_file_actions_addchdir_np(&actions, cwd.c_str());

    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    sigset_t none;
    sigset_t all;
    sigemptyset(&none);
    sigfillset(&all);
    posix_spawnattr_setsigmask(&attr, &none);
    posix_spawnattr_setsigdefault(&attr, &all);
    posix_spawnattr_setpgroup(&attr, 0);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGMASK |
                                         POSIX_SPAWN_SETSIGDEF);

    const int rc = posix_spawnp(&pid_, cargv[0], &actions, &attr, cargv.data(),
                                cenv.data());
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    if (rc != 0) {
      throw SpawnError(fmt::format("cannot start '{}': {}", argv[0], std::strerror(rc)));
    }
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    if (!reaped_) kill_and_reap();
    kill_group();
  }

  pid_t pid() const { return pid_; }
  bool reaped() const { return reaped_; }
  std::optional<int> exit_code() const { return exit_code_; }

  /// Non-blocking; true once the direct child has exited.
  bool try_reap() {
    if (reaped_) return true;
    int status = 0;
    const pid_t r = waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      record(status);
      return true;
    }
    return false;
  }

  void kill_and_reap() {
    kill_group();
    if (reaped_) return;
    int status = 0;
    while (waitpid(pid_, &status, 0) == -1 && errno == EINTR) {
    }
    record(status);
  }

  /// Kills whatever is left of the process group, including grandchildren.
  void kill_group() const {
    if (::kill(-pid_, SIGKILL) != 0 && errno != ESRCH) {
      spdlog::warn("kill({}) failed: {}", -pid_, std::strerror(errno));
    }
  }

 private:
  void record(int status) {
    reaped_ = true;
    if (WIFEXITED(status)) exit_code_ = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) exit_code_ = 128 + WTERMSIG(status);
  }

  pid_t pid_ = -1;
  bool reaped_ = false;
  std::optional<int> exit_code_;
};

/// Resident memory of every process in the group, from /proc.
std::uint64_t group_rss_bytes(pid_t pgid) {
  static const long page = sysconf(_SC_PAGESIZE);
  std::uint64_t total = 0;
  std::error_code ec;
  for (fs::directory_iterator it("/proc", ec), end; !ec && it != end; it.increment(ec)) {
    const auto name = it->path().filename().string();
    if (name.empty() || !std::isdigit(static_cast<unsigned char>(name[0]))) continue;
    std::ifstream in(it->path() / "stat");
    std::string stat;
    if (!std::getline(in, stat)) continue;
    // Fields after the parenthesised command name start at "state".
    const auto close = stat.rfind(')');
    if (close == std::string::npos) continue;
    const auto fields = text::split_ws(std::string_view(stat).substr(close + 1));
    // state ppid pgrp ... rss is field 24 overall, index 21 here.
    if (fields.size() < 22) continue;
    if (text::parse_int(fields[2]) != pgid) continue;
    if (auto rss = text::parse_int(fields[21]); rss && *rss > 0) {
      total += static_cast<std::uint64_t>(*rss) * static_cast<std::uint64_t>(page);
    }
  }
  return total;
}

std::vector<std::string> child_environment(const TaskManifest& manifest,
                                           const fs::path& task_view,
                                           const fs::path& output_dir,
                                           double time_budget_s) {
  const std::vector<std::pair<std::string, std::string>> ours{
      {"TASK_DIR", task_view.string()},
      {"OUTPUT_DIR", output_dir.string()},
      {"TIME_BUDGET_S", text::format_double(time_budget_s)},
      {"CLASS_COUNT", std::to_string(manifest.class_count)},
      {"TEST_COUNT", std::to_string(manifest.test_count)},
  };
  std::vector<std::string> env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view entry(*e);
    const auto key = entry.substr(0, entry.find('='));
    const bool overridden = std::any_of(ours.begin(), ours.end(),
                                        [&](const auto& kv) { return kv.first == key; });
    if (!overridden) env.emplace_back(entry);
  }
  for (const auto& [k, v] : ours) env.push_back(k + "=" + v);
  return env;
}

bool has_prediction_file(const fs::path& dir) {
  std::error_code ec;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->path().extension() == ".predict") return true;
  }
  return false;
}

double seconds_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

std::optional<double> read_declared_time(const fs::path& predict_file) {
  auto time_file = predict_file;
  time_file.replace_extension(".time");
  try {
    return text::parse_double(text::read_file(time_file));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

RunOutcome run_solution(const SolutionRun& run,
                        const std::function<void(const PredictionEvent&)>& on_event) {
  const TaskManifest manifest = load_manifest(run.task_dir);
  if (fs::exists(run.workspace) && !fs::is_empty(run.workspace)) {
    throw std::runtime_error("workspace not empty: " + run.workspace.string());
  }
  const fs::path workspace = fs::absolute(run.workspace);
  const fs::path task_view = workspace / "task";
  const fs::path output_dir = workspace / "output";
  fs::create_directories(output_dir);
  write_ingestion_view(manifest, task_view);
  if (run.events_dir) {
    write_event_log_meta(*run.events_dir, {manifest.name, manifest.class_count,
                                           manifest.test_count, run.time_budget_s});
  }

  RunOutcome outcome;
  PredictionWatcher watcher(output_dir);
  double last_timestamp = 0.0;

  auto accept = [&](const PublishedPrediction& published) {
    PredictionEvent ev;
    ev.sequence_no = published.sequence_no;
    ev.file = published.path.filename().string();
    ev.timestamp_s = published.timestamp_s;
    if (run.virtual_clock) {
      auto declared = read_declared_time(published.path);
      if (!declared || !std::isfinite(*declared) || *declared < 0.0) {
        outcome.protocol_errors.push_back(ev.file + ": missing declared time");
        ++outcome.skipped_files;
        return;
      }
      ev.timestamp_s = *declared;
    }
    if (ev.timestamp_s < last_timestamp) {
      outcome.protocol_errors.push_back(ev.file + ": timestamp went backwards");
      ++outcome.skipped_files;
      return;
    }
    try {
      ev.matrix = parse_prediction_file(published.path, manifest.test_count,
                                        static_cast<std::size_t>(manifest.class_count));
    } catch (const ProtocolError& e) {
      spdlog::warn("skipping malformed prediction: {}", e.what());
      outcome.protocol_errors.push_back(e.what());
      ++outcome.skipped_files;
      return;
    }
    last_timestamp = ev.timestamp_s;
    if (run.events_dir) append_event(*run.events_dir, ev, published.path);
    if (on_event) on_event(ev);
    outcome.events.push_back(std::move(ev));
  };
  auto drain = [&](double now_s) {
    for (const auto& p : watcher.poll(now_s)) accept(p);
  };

  ChildProcess child(run.solution_cmd,
                     child_environment(manifest, task_view, output_dir, run.time_budget_s),
                     workspace, workspace / "solution.log");
  const auto spawned = Clock::now();
  auto last_sample = spawned - std::chrono::seconds(1);
  auto sample_memory = [&] {
    const auto now = Clock::now();
    if (now - last_sample < std::chrono::milliseconds(100)) return;
    last_sample = now;
    outcome.peak_rss_bytes = std::max(outcome.peak_rss_bytes, group_rss_bytes(child.pid()));
  };

  // Initialization handshake.
  std::optional<Clock::time_point> origin;
  while (!origin) {
    if (fs::exists(output_dir / kReadyMarker)) {
      origin = Clock::now();
      break;
    }
    if (has_prediction_file(output_dir) && !fs::exists(output_dir / kReadyMarker)) {
      outcome.protocol_errors.emplace_back("prediction published before ready marker");
      outcome.reason = TerminationReason::protocol_error;
      child.kill_and_reap();
      outcome.exit_code = child.exit_code();
      return outcome;
    }
    if (child.try_reap()) {
      outcome.reason = TerminationReason::process_exit;
      outcome.exit_code = child.exit_code();
      return outcome;
    }
    if (seconds_between(spawned, Clock::now()) > run.init_grace_s) {
      child.kill_and_reap();
      outcome.reason = TerminationReason::init_timeout;
      outcome.exit_code = child.exit_code();
      return outcome;
    }
    sample_memory();
    std::this_thread::sleep_for(run.poll_interval);
  }

  const auto deadline =
      *origin + std::chrono::duration_cast<Clock::duration>(
                    std::chrono::duration<double>(run.time_budget_s));
  while (true) {
    const auto now = Clock::now();
    if (now > deadline) {
      child.kill_and_reap();
      outcome.kill_latency_s = seconds_between(deadline, Clock::now());
      outcome.reason = TerminationReason::budget_exhausted;
      break;
    }
    drain(seconds_between(*origin, now));
    if (fs::exists(output_dir / kDoneMarker)) {
      drain(seconds_between(*origin, Clock::now()));
      outcome.reason = TerminationReason::done_flag;
      // Short grace for a clean exit after the done marker.
      const auto grace_end = Clock::now() + std::chrono::seconds(1);
      while (!child.try_reap() && Clock::now() < grace_end) {
        std::this_thread::sleep_for(run.poll_interval);
      }
      break;
    }
    if (child.try_reap()) {
      drain(seconds_between(*origin, Clock::now()));
      outcome.reason = TerminationReason::process_exit;
      break;
    }
    sample_memory();
    std::this_thread::sleep_for(run.poll_interval);
  }
  child.kill_and_reap();
  outcome.exit_code = child.exit_code();

  for (const auto& e : watcher.protocol_errors()) outcome.protocol_errors.push_back(e);
  if (outcome.peak_rss_bytes > manifest.space_budget_bytes) {
    outcome.space_budget_exceeded = true;
    spdlog::warn("{}: peak RSS {} bytes exceeds space budget {}", manifest.name,
                 outcome.peak_rss_bytes, manifest.space_budget_bytes);
  }
  return outcome;
}

std::vector<PredictionEvent> clip_events(std::vector<PredictionEvent> events,
                                         double time_budget_s) {
  std::erase_if(events, [&](const PredictionEvent& e) {
    return e.timestamp_s > time_budget_s;
  });
  return events;
}

// ---------------------------------------------------------------------------
// Event log persistence

void write_event_log_meta(const fs::path& dir, const EventLogMeta& meta) {
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["task"] = meta.task;
  j["class_count"] = meta.class_count;
  j["test_count"] = meta.test_count;
  j["time_budget_s"] = meta.time_budget_s;
  text::write_file_atomic(dir / "meta.json", j.dump(2) + "\n");
  std::ofstream(dir / "events.jsonl", std::ios::trunc);
}

void append_event(const fs::path& dir, const PredictionEvent& event,
                  const fs::path& source_file) {
  fs::copy_file(source_file, dir / event.file, fs::copy_options::overwrite_existing);
  nlohmann::ordered_json j;
  j["seq"] = event.sequence_no;
  j["t_s"] = event.timestamp_s;
  j["file"] = event.file;
  std::ofstream out(dir / "events.jsonl", std::ios::app);
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("cannot append to event log in " + dir.string());
}

EventLog load_event_log(const fs::path& dir) {
  EventLog log;
  try {
    const auto meta = json::parse(text::read_file(dir / "meta.json"));
    log.meta.task = meta.at("task").get<std::string>();
    log.meta.class_count = meta.at("class_count").get<int>();
    log.meta.test_count = meta.at("test_count").get<std::size_t>();
    log.meta.time_budget_s = meta.at("time_budget_s").get<double>();
    for (const auto& line : text::read_lines(dir / "events.jsonl")) {
      if (text::trim(line).empty()) continue;
      const auto j = json::parse(line);
      PredictionEvent ev;
      ev.sequence_no = j.at("seq").get<std::size_t>();
      ev.timestamp_s = j.at("t_s").get<double>();
      ev.file = j.at("file").get<std::string>();
      try {
        ev.matrix = parse_prediction_file(dir / ev.file);
      } catch (const ProtocolError& e) {
        spdlog::warn("event {} unreadable: {}", ev.sequence_no, e.what());
      }
      log.events.push_back(std::move(ev));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed event log in " + dir.string() + ": " + e.what());
  }
  return log;
}

}  // namespace abench
