#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qwalk/hash.hpp"
#include "qwalk/parallel.hpp"
#include "qwalk/rng.hpp"
#include "qwalk/runner/config.hpp"
#include "qwalk/runner/experiment.hpp"

namespace qwalk::runner {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr const char* kCsvHeader = "experiment_id,p,N,n,theta,M,time,observable,x,value,converged,seed";

/// Coordinates of one sweep point; unset fields were not swept.
struct SweepPoint {
  std::optional<double> p;
  std::optional<std::size_t> cycle_size;
  std::optional<std::size_t> dimension;
  std::optional<double> theta;
  std::optional<std::size_t> coins;
};

struct Task {
  std::size_t index = 0;
  SweepPoint point;
  ExperimentConfig config;  // sweep values applied, sweep block cleared
  std::uint64_t seed = 0;
};

struct TaskResult {
  Task task;
  TaskOutput output;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;  // 0: QWALKDEC_THREADS or hardware concurrency
  std::filesystem::path out_dir = ".";
  std::optional<double> horizon_override;
};

inline std::uint64_t task_seed(std::uint64_t master, std::size_t index) {
  return mix64(master ^ mix64(0x5851f42d4c957f2dULL + index));
}

inline std::uint64_t config_hash(const ExperimentConfig& c) { return Fnv1a().text(c.source.dump()).digest(); }

inline ExperimentConfig apply_point(ExperimentConfig c, const SweepPoint& pt) {
  if (pt.p) {
    if (c.walk == WalkType::Discrete)
      c.noise.rate = *pt.p;
    else
      c.ctqw_noise.rate = *pt.p;
  }
  if (pt.cycle_size) c.graph.cycle_size = *pt.cycle_size;
  if (pt.dimension) c.graph.dimension = *pt.dimension;
  if (pt.theta) c.noise.theta = *pt.theta;
  if (pt.coins) c.noise.coin_count = *pt.coins;
  c.sweep = SweepAxes{};
  return c;
}

/// Cartesian product of the sweep axes in the order p, N, n, theta, M
/// (last axis fastest). A config without a sweep gives one task.
inline std::vector<Task> expand(const ExperimentConfig& base, std::uint64_t master_seed) {
  const SweepAxes& s = base.sweep;
  std::vector<SweepPoint> points{SweepPoint{}};
  const auto extend = [&points](const auto& axis, auto setter) {
    if (!axis) return;
    std::vector<SweepPoint> next;
    next.reserve(points.size() * axis->size());
    for (const auto& pt : points)
      for (const auto& v : *axis) {
        SweepPoint q = pt;
        setter(q, v);
        next.push_back(q);
      }
    points = std::move(next);
  };
  extend(s.p, [](SweepPoint& q, double v) { q.p = v; });
  extend(s.cycle_size, [](SweepPoint& q, std::size_t v) { q.cycle_size = v; });
  extend(s.dimension, [](SweepPoint& q, std::size_t v) { q.dimension = v; });
  extend(s.theta, [](SweepPoint& q, double v) { q.theta = v; });
  extend(s.coins, [](SweepPoint& q, std::size_t v) { q.coins = v; });

  std::vector<Task> tasks;
  tasks.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    Task t;
    t.index = i;
    t.point = points[i];
    t.config = apply_point(base, points[i]);
    validate(t.config);
    t.seed = s.empty() ? master_seed : task_seed(master_seed, i);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

/// Shortest round-tripping decimal; non-finite values are a contract violation.
inline std::string format_number(double v) {
  require(std::isfinite(v), ErrorKind::Contract, "non-finite value in output");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

template <typename T>
std::string cell(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>)
    return format_number(*v);
  else
    return std::to_string(*v);
}

}  // namespace detail

inline void write_csv(std::ostream& out, const std::string& experiment_id, const std::vector<TaskResult>& results) {
  out << kCsvHeader << '\n';
  for (const auto& r : results) {
    const SweepPoint& pt = r.task.point;
    const std::string prefix = detail::csv_field(experiment_id) + ',' + detail::cell(pt.p) + ',' +
                               detail::cell(pt.cycle_size) + ',' + detail::cell(pt.dimension) + ',' +
                               detail::cell(pt.theta) + ',' + detail::cell(pt.coins) + ',';
    const std::string seed = std::to_string(r.task.seed);
    for (const Row& row : r.output.rows) {
      out << prefix << detail::cell(row.time) << ',' << detail::csv_field(row.observable) << ','
          << detail::csv_field(row.x) << ',' << format_number(row.value) << ',' << (row.converged ? "true" : "false")
          << ',' << seed << '\n';
    }
  }
}

/// Runs every task. Tasks run in parallel when there are several; each task
/// writes into its own buffer, so output order is the task order.
inline std::vector<TaskResult> run_tasks(const std::vector<Task>& tasks, std::size_t threads) {
  std::vector<TaskResult> results(tasks.size());
  const std::size_t inner = tasks.size() > 1 ? 1 : threads;
  parallel_for(tasks.size(), threads, [&](std::size_t i) {
    results[i].task = tasks[i];
    results[i].output = run_task(tasks[i].config, tasks[i].seed, inner);
  });
  return results;
}

struct RunSummary {
  std::filesystem::path csv;
  std::filesystem::path manifest;
  std::size_t tasks = 0;
  std::size_t rows = 0;
  bool all_converged = true;
};

inline Json build_manifest(const ExperimentConfig& base, std::uint64_t master_seed, const std::vector<TaskResult>& results,
                           const std::filesystem::path& csv, double wall_seconds, std::size_t threads) {
  Json m;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(base)));
  m["experiment_id"] = base.experiment_id;
  m["config_hash"] = hash;
  m["code_version"] = kCodeVersion;
  m["master_seed"] = master_seed;
  m["threads"] = threads;
  m["csv"] = csv.filename().string();
  m["wall_clock_seconds"] = wall_seconds;
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m["finished_at"] = stamp;
  Json tasks = Json::array();
  bool all = true;
  for (const auto& r : results) {
    Json t;
    t["index"] = r.task.index;
    t["seed"] = r.task.seed;
    Json coords = Json::object();
    const SweepPoint& pt = r.task.point;
    if (pt.p) coords["p"] = *pt.p;
    if (pt.cycle_size) coords["N"] = *pt.cycle_size;
    if (pt.dimension) coords["n"] = *pt.dimension;
    if (pt.theta) coords["theta"] = *pt.theta;
    if (pt.coins) coords["M"] = *pt.coins;
    t["coordinates"] = coords;
    Json conv = Json::object();
    for (const auto& [name, ok] : r.output.convergence) {
      conv[name] = ok;
      all = all && ok;
    }
    t["converged"] = conv;
    t["rows"] = r.output.rows.size();
    tasks.push_back(t);
  }
  m["tasks"] = tasks;
  m["all_converged"] = all;
  return m;
}

/// Full pipeline: expand, run, write `<id>.csv` and `<id>.manifest.json`.
inline RunSummary execute(ExperimentConfig config, const RunOptions& options) {
  if (options.horizon_override) {
    config.horizon = *options.horizon_override;
    config.source["horizon"] = *options.horizon_override;
  }
  validate(config);
  const std::uint64_t master = options.seed.value_or(config.seed);
  const std::size_t threads = options.threads > 0 ? options.threads : default_thread_count();
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Task> tasks = expand(config, master);
  const std::vector<TaskResult> results = run_tasks(tasks, threads);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::error_code ec;
  std::filesystem::create_directories(options.out_dir, ec);
  require(!ec, ErrorKind::Config, "--out-dir: cannot create '" + options.out_dir.string() + "'");
  RunSummary summary;
  summary.csv = options.out_dir / (config.experiment_id + ".csv");
  summary.manifest = options.out_dir / (config.experiment_id + ".manifest.json");
  {
    std::ostringstream body;
    write_csv(body, config.experiment_id, results);
    std::ofstream out(summary.csv, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Config, "cannot write " + summary.csv.string());
    out << body.str();
  }
  const Json manifest = build_manifest(config, master, results, summary.csv, wall, threads);
  {
    std::ofstream out(summary.manifest);
    require(static_cast<bool>(out), ErrorKind::Config, "cannot write " + summary.manifest.string());
    out << manifest.dump(2) << '\n';
  }
  summary.tasks = results.size();
  for (const auto& r : results) summary.rows += r.output.rows.size();
  summary.all_converged = manifest["all_converged"].get<bool>();
  return summary;
}

}  // namespace qwalk::runner
