#include "abench/task.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "abench/text.hpp"

namespace abench {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool class_count_in_bounds(int c) {
  return c > kMinClassCountExclusive && c < kMaxClassCountExclusive;
}

std::vector<double> parse_features(const std::vector<std::string_view>& fields,
                                   std::size_t first, const fs::path& file,
                                   std::size_t line_no) {
  std::vector<double> out;
  out.reserve(fields.size() - std::min(first, fields.size()));
  for (std::size_t i = first; i < fields.size(); ++i) {
    auto v = text::parse_double(fields[i]);
    if (!v) {
      throw TaskError(fmt::format("malformed data: {} line {}", file.string(),
                                  line_no + 1));
    }
    out.push_back(*v);
  }
  return out;
}

int parse_label(std::string_view field, int class_count, const fs::path& file,
                std::size_t line_no) {
  auto v = text::parse_int(field);
  if (!v) {
    throw TaskError(fmt::format("malformed data: {} line {}", file.string(),
                                line_no + 1));
  }
  if (*v < 0 || *v >= class_count) {
    throw TaskError(fmt::format("label out of range: {} at {} line {}", *v,
                                file.string(), line_no + 1));
  }
  return static_cast<int>(*v);
}

// Deterministic across standard libraries, unlike the std distributions.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

std::vector<int> balanced_labels(std::size_t n, int classes, SplitMix& rng) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  }
  rng.shuffle(labels);
  return labels;
}

void append_features(std::string& line, const std::vector<double>& features) {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (i > 0) line += ',';
    line += text::format_double(features[i]);
  }
}

}  // namespace

TaskManifest load_manifest(const fs::path& dir) {
  TaskManifest m;
  m.root = dir;
  if (!fs::is_regular_file(m.manifest_path())) {
    throw TaskError("incomplete task: missing " + m.manifest_path().string());
  }
  try {
    const auto j = json::parse(text::read_file(m.manifest_path()));
    m.name = j.at("name").get<std::string>();
    m.class_count = j.at("class_count").get<int>();
    m.train_count = j.at("train_count").get<std::size_t>();
    m.test_count = j.at("test_count").get<std::size_t>();
    m.time_budget_s = j.value("time_budget_s", kDefaultTimeBudgetS);
    m.space_budget_bytes = j.value("space_budget_bytes", kDefaultSpaceBudgetBytes);
  } catch (const json::exception& e) {
    throw TaskError(std::string("malformed manifest: ") + e.what());
  }
  if (!class_count_in_bounds(m.class_count)) {
    throw TaskError(fmt::format("invalid class count: {}", m.class_count));
  }
  if (!(m.time_budget_s > 0.0)) throw TaskError("invalid time budget");
  for (const auto& p : {m.train_path(), m.test_path()}) {
    if (!fs::is_regular_file(p)) {
      throw TaskError("incomplete task: missing " + p.string());
    }
  }
  return m;
}

std::vector<int> read_labels(const fs::path& file) {
  std::vector<int> labels;
  const auto lines = text::read_lines(file);
  labels.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto v = text::parse_int(lines[i]);
    if (!v) {
      throw TaskError(fmt::format("malformed data: {} line {}", file.string(), i + 1));
    }
    labels.push_back(static_cast<int>(*v));
  }
  return labels;
}

Task load_task(const fs::path& dir) {
  const TaskManifest m = load_manifest(dir);
  if (!fs::is_regular_file(m.labels_path())) {
    throw TaskError("incomplete task: missing " + m.labels_path().string());
  }

  Task task;
  task.name = m.name;
  task.class_count = m.class_count;
  task.time_budget_s = m.time_budget_s;
  task.space_budget_bytes = m.space_budget_bytes;

  const auto train_lines = text::read_lines(m.train_path());
  task.train.reserve(train_lines.size());
  for (std::size_t i = 0; i < train_lines.size(); ++i) {
    const auto fields = text::split(train_lines[i], ',');
    LabeledSample s;
    s.label = parse_label(fields[0], m.class_count, m.train_path(), i);
    s.features = parse_features(fields, 1, m.train_path(), i);
    task.train.push_back(std::move(s));
  }

  const auto test_lines = text::read_lines(m.test_path());
  task.test.reserve(test_lines.size());
  for (std::size_t i = 0; i < test_lines.size(); ++i) {
    const auto& line = test_lines[i];
    task.test.push_back(line.empty() ? std::vector<double>{}
                                     : parse_features(text::split(line, ','), 0,
                                                      m.test_path(), i));
  }

  task.test_labels = read_labels(m.labels_path());

  if (task.train.size() != m.train_count || task.test.size() != m.test_count ||
      task.test_labels.size() != m.test_count) {
    throw TaskError(fmt::format(
        "manifest/data disagreement: declared {}/{} train/test, found {}/{} "
        "with {} labels",
        m.train_count, m.test_count, task.train.size(), task.test.size(),
        task.test_labels.size()));
  }
  for (int label : task.test_labels) {
    if (label < 0 || label >= m.class_count) {
      throw TaskError(fmt::format("label out of range: {}", label));
    }
  }
  if (auto violations = validate_task(task); !violations.empty()) {
    throw TaskError(violations.front());
  }
  return task;
}

std::vector<std::string> validate_task(const Task& task) {
  std::vector<std::string> v;
  if (!class_count_in_bounds(task.class_count)) {
    v.emplace_back("invalid class count");
    return v;  // the remaining checks are relative to C
  }
  if (task.test.size() != task.test_labels.size()) {
    v.emplace_back("test sample/label count mismatch");
  }
  const auto in_range = [&](int l) { return l >= 0 && l < task.class_count; };
  if (!std::all_of(task.test_labels.begin(), task.test_labels.end(), in_range) ||
      !std::all_of(task.train.begin(), task.train.end(),
                   [&](const LabeledSample& s) { return in_range(s.label); })) {
    v.emplace_back("label out of range");
  }
  std::set<int> present(task.test_labels.begin(), task.test_labels.end());
  for (int c = 0; c < task.class_count; ++c) {
    if (!present.contains(c)) {
      v.emplace_back("class absent from test labels");
      break;
    }
  }
  if (task.scoring_fn != kBalancedAccuracy) {
    v.emplace_back("unsupported scoring function");
  }
  if (!(task.time_budget_s > 0.0)) v.emplace_back("invalid time budget");
  return v;
}

TaskManifest generate_synthetic_task(const SyntheticTaskSpec& spec,
                                     const fs::path& out) {
  if (!class_count_in_bounds(spec.class_count)) {
    throw TaskError(fmt::format("invalid class count: {}", spec.class_count));
  }
  const auto classes = static_cast<std::size_t>(spec.class_count);
  if (spec.train_count < classes || spec.test_count < classes) {
    throw TaskError("train and test counts must be at least the class count");
  }
  if (!(spec.difficulty >= 0.0 && spec.difficulty <= 1.0)) {
    throw TaskError("difficulty must lie in [0,1]");
  }
  if (fs::exists(out) && !(fs::is_directory(out) && fs::is_empty(out))) {
    throw TaskError("refusing to overwrite " + out.string());
  }

  TaskManifest m;
  m.root = out;
  m.name = spec.name.empty() ? fmt::format("synthetic_{}", spec.seed) : spec.name;
  m.class_count = spec.class_count;
  m.train_count = spec.train_count;
  m.test_count = spec.test_count;
  m.time_budget_s = spec.time_budget_s;
  m.space_budget_bytes = spec.space_budget_bytes;

  SplitMix rng(spec.seed);
  const double signal = 1.0 - spec.difficulty;
  constexpr double kNoise = 0.2;
  auto sample = [&](int label) {
    std::vector<double> f(classes);
    for (std::size_t d = 0; d < classes; ++d) {
      f[d] = (-kNoise + 2.0 * kNoise * rng.uniform()) +
             (d == static_cast<std::size_t>(label) ? signal : 0.0);
    }
    return f;
  };

  const auto train_labels = balanced_labels(spec.train_count, spec.class_count, rng);
  const auto test_labels = balanced_labels(spec.test_count, spec.class_count, rng);

  std::string train_csv;
  for (int label : train_labels) {
    std::string line = std::to_string(label) + ",";
    append_features(line, sample(label));
    train_csv += line + '\n';
  }
  std::string test_csv;
  std::string labels_csv;
  for (int label : test_labels) {
    std::string line;
    append_features(line, sample(label));
    test_csv += line + '\n';
    labels_csv += std::to_string(label) + '\n';
  }

  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["class_count"] = m.class_count;
  j["train_count"] = m.train_count;
  j["test_count"] = m.test_count;
  j["time_budget_s"] = m.time_budget_s;
  j["space_budget_bytes"] = m.space_budget_bytes;

  fs::create_directories(out / "train");
  fs::create_directories(out / "test");
  fs::create_directories(out / "solution");
  text::write_file_atomic(m.manifest_path(), j.dump(2) + "\n");
  text::write_file_atomic(m.train_path(), train_csv);
  text::write_file_atomic(m.test_path(), test_csv);
  text::write_file_atomic(m.labels_path(), labels_csv);
  return m;
}

void write_ingestion_view(const TaskManifest& manifest, const fs::path& view_dir) {
  fs::create_directories(view_dir / "train");
  fs::create_directories(view_dir / "test");
  constexpr auto opts = fs::copy_options::overwrite_existing;
  fs::copy_file(manifest.manifest_path(), view_dir / "manifest.json", opts);
  fs::copy_file(manifest.train_path(), view_dir / "train" / "data.csv", opts);
  fs::copy_file(manifest.test_path(), view_dir / "test" / "data.csv", opts);
}

}  // namespace abench
