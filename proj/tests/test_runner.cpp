#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qwalk/runner/runner.hpp"

using namespace qwalk;
using namespace qwalk::runner;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::string& text) {
  try {
    (void)parse_config_text(text);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "config accepted: " << text;
  return ErrorKind::Contract;
}

std::string message_of(const std::string& text) {
  try {
    (void)parse_config_text(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) rows.push_back(split(line));
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string csv_text(const ExperimentConfig& c, std::uint64_t seed, std::size_t threads) {
  std::ostringstream out;
  write_csv(out, c.experiment_id, run_tasks(expand(c, seed), threads));
  return out.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qwalk_runner_" + name);
  fs::remove_all(dir);
  return dir;
}

const fs::path kSource = QWALK_SOURCE_DIR;

const char* kCycleSweep = R"({
  "experiment_id": "cyc", "kind": "cycle", "graph": {"N": 5}, "horizon": 12,
  "noise": {"channel": "measure_position"}, "observables": ["tv_uniform"],
  "sweep": {"p": [0.1, 0.2], "N": [5, 6]}})";

}  // namespace

TEST(Config, ParsesBundledConfigs) {
  for (const auto& entry : fs::directory_iterator(kSource / "configs")) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW((void)load_config(entry.path().string())) << entry.path();
  }
  const ExperimentConfig c = load_config((kSource / "configs" / "fig1.json").string());
  EXPECT_EQ(c.experiment_id, "fig1");
  EXPECT_EQ(c.kind, ExperimentKind::Line);
  EXPECT_EQ(c.horizon, 100.0);
  EXPECT_EQ(c.coin.initial, "minus");
  EXPECT_TRUE(c.observables.distribution);
  EXPECT_TRUE(c.observables.classical_distribution);
}

TEST(Config, RejectionsNameTheField) {
  const std::string base = R"("experiment_id": "a", "kind": "line", "horizon": 10)";
  EXPECT_EQ(kind_of("{" + base + R"(, "noise": {"channel": "measure_both", "rate": 1.5}})"), ErrorKind::Config);
  EXPECT_NE(message_of("{" + base + R"(, "noise": {"channel": "measure_both", "rate": 1.5}})").find("noise.rate"),
            std::string::npos);
  EXPECT_NE(message_of("{" + base + R"(, "bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(message_of("{" + base + R"(, "noise": {"chanel": "none"}})").find("noise.chanel"), std::string::npos);
  EXPECT_NE(message_of("{" + base + R"(, "sweep": {"p": []}})").find("sweep.p"), std::string::npos);
  EXPECT_EQ(kind_of("{" + base + R"(, "sweep": {"p": []}})"), ErrorKind::Config);
  EXPECT_EQ(kind_of("{" + base + R"(, "graph": {"halfwidth": 5}})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"experiment_id": "a", "kind": "line", "horizon": 0})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"experiment_id": "a", "kind": "line", "horizon": 2.5})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"experiment_id": "a", "kind": "torus", "horizon": 5})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"experiment_id": "a b", "kind": "line", "horizon": 5})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"kind": "line", "horizon": 5})"), ErrorKind::Config);
  EXPECT_EQ(kind_of("{" + base + R"(, "observables": ["distribution", "nonsense"]})"), ErrorKind::Config);
  EXPECT_EQ(kind_of("{" + base + R"(, "sweep": {"N": [3, 4]}})"), ErrorKind::Config);
  EXPECT_EQ(kind_of("{nope"), ErrorKind::Parse);
}

TEST(Config, SweepCapIsAResourceError) {
  const std::string text = R"({"experiment_id": "a", "kind": "cycle", "graph": {"N": 5}, "horizon": 10,
    "noise": {"channel": "measure_position"}, "sweep": {"p": [0.1, 0.2], "N": [3, 4, 5]}, "sweep_cap": 5})";
  EXPECT_EQ(kind_of(text), ErrorKind::Resource);
  EXPECT_NE(message_of(text).find("6 points"), std::string::npos);
}

TEST(Config, DensityModeRefusedAboveCap) {
  const ExperimentConfig c = parse_config_text(R"({"experiment_id": "big", "kind": "hypercube", "graph": {"n": 9},
    "coin": {"type": "grover"}, "noise": {"channel": "measure_both", "rate": 0.1}, "mode": "density",
    "horizon": 3, "observables": ["distribution"]})");
  try {
    (void)run_task(c, 1, 1);
    FAIL() << "density run above the cap was accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Resource);
    EXPECT_NE(std::string(e.what()).find("trajectory"), std::string::npos);
  }
}

TEST(Expand, CartesianOrderAndSeeds) {
  const ExperimentConfig c = parse_config_text(kCycleSweep);
  const auto tasks = expand(c, 99);
  ASSERT_EQ(tasks.size(), 4u);
  const std::vector<std::pair<double, std::size_t>> expected{{0.1, 5}, {0.1, 6}, {0.2, 5}, {0.2, 6}};
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    EXPECT_EQ(tasks[i].index, i);
    EXPECT_EQ(*tasks[i].point.p, expected[i].first);
    EXPECT_EQ(*tasks[i].point.cycle_size, expected[i].second);
    EXPECT_FALSE(tasks[i].point.dimension.has_value());
    EXPECT_EQ(tasks[i].config.noise.rate, expected[i].first);
    EXPECT_EQ(tasks[i].config.graph.cycle_size, expected[i].second);
    EXPECT_TRUE(tasks[i].config.sweep.empty());
    EXPECT_EQ(tasks[i].seed, task_seed(99, i));
    for (std::size_t j = 0; j < i; ++j) EXPECT_NE(tasks[i].seed, tasks[j].seed);
  }
  const auto single = expand(parse_config_text(R"({"experiment_id": "s", "kind": "line", "horizon": 4})"), 42);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].seed, 42u);
}

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-2.5), "-2.5");
  EXPECT_EQ(format_number(1e-300), "1e-300");
  for (double v : {1.0 / 3.0, 0.0625 + 1e-17, 2.0 / 7.0 * 1e-9, 1.0 - 1.0 / std::sqrt(2.0)})
    EXPECT_EQ(std::strtod(format_number(v).c_str(), nullptr), v);
  EXPECT_THROW((void)format_number(std::nan("")), Error);
  EXPECT_THROW((void)format_number(INFINITY), Error);
}

TEST(Csv, SchemaAndBlankCoordinates) {
  const ExperimentConfig c = parse_config_text(kCycleSweep);
  const auto rows = read_csv(csv_text(c, 5, 1));
  ASSERT_GT(rows.size(), 1u);
  EXPECT_EQ(rows[0], split(kCsvHeader));
  const auto tasks = expand(c, 5);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    ASSERT_EQ(r.size(), 12u) << "row " << i;
    EXPECT_EQ(r[0], "cyc");
    EXPECT_FALSE(r[1].empty());  // p
    EXPECT_FALSE(r[2].empty());  // N
    EXPECT_TRUE(r[3].empty());   // n
    EXPECT_TRUE(r[4].empty());   // theta
    EXPECT_TRUE(r[5].empty());   // M
    EXPECT_EQ(r[7], "tv_uniform");
    EXPECT_TRUE(r[8].empty());
    EXPECT_TRUE(std::isfinite(std::strtod(r[9].c_str(), nullptr)));
    EXPECT_TRUE(r[10] == "true" || r[10] == "false");
    bool seed_known = false;
    for (const auto& t : tasks) seed_known = seed_known || r[11] == std::to_string(t.seed);
    EXPECT_TRUE(seed_known);
  }
  // 4 tasks x 13 samples.
  EXPECT_EQ(rows.size(), 1u + 4u * 13u);
}

TEST(Csv, UnconvergedObservablesAreFlagged) {
  const ExperimentConfig c = parse_config_text(R"({"experiment_id": "m", "kind": "cycle", "graph": {"N": 9},
    "horizon": 200, "epsilon": 0.002, "observables": ["mixing"]})");
  const auto results = run_tasks(expand(c, 0), 1);
  const auto& rows = results[0].output.rows;
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].observable, "mixing_time");
  EXPECT_FALSE(rows[0].converged);
  const Json m = build_manifest(c, 0, results, "m.csv", 0.0, 1);
  EXPECT_FALSE(m["all_converged"].get<bool>());
  EXPECT_FALSE(m["tasks"][0]["converged"]["mixing_time"].get<bool>());
}

TEST(Run, EnginesAgreeThroughTheRunner) {
  // A zero-rate channel forces the density engine onto a noiseless walk.
  const auto second_moments = [](const std::string& mode, const std::string& channel) {
    const ExperimentConfig c = parse_config_text(R"({"experiment_id": "e", "kind": "line", "horizon": 12,
      "coin": {"initial": "minus"}, "noise": {"channel": ")" + channel + R"(", "rate": 0},
      "mode": ")" + mode + R"(", "series_every": 3, "observables": ["moments"]})");
    std::vector<double> out;
    for (const Row& r : run_task(c, 1, 1).rows)
      if (r.observable == "second_moment") out.push_back(r.value);
    return out;
  };
  const auto pure = second_moments("pure", "none");
  const auto density = second_moments("density", "measure_both");
  ASSERT_EQ(pure.size(), 5u);
  ASSERT_EQ(density.size(), pure.size());
  for (std::size_t i = 0; i < pure.size(); ++i) EXPECT_NEAR(density[i], pure[i], 1e-12) << "sample " << i;
  EXPECT_DOUBLE_EQ(pure[0], 0.0);
  EXPECT_NEAR(pure[1], 3.0, 1e-12);  // T = 3
}

TEST(Run, NoisyDensityMatchesTrajectories) {
  const auto dist = [](const std::string& mode) {
    const ExperimentConfig c = parse_config_text(R"({"experiment_id": "t", "kind": "line", "horizon": 10,
      "noise": {"channel": "measure_both", "rate": 0.2}, "mode": ")" + mode + R"(", "trajectories": 20000,
      "observables": ["distribution"]})");
    std::vector<double> out;
    for (const Row& r : run_task(c, 3, 1).rows) out.push_back(r.value);
    return out;
  };
  const auto exact = dist("density");
  const auto sampled = dist("trajectory");
  ASSERT_EQ(exact.size(), sampled.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) tv += std::abs(exact[i] - sampled[i]);
  EXPECT_LT(tv, 0.03);
}

TEST(Run, GoldenFigureOne) {
  // The golden file was written by the density engine; the bundled config
  // runs the pure engine.
  const ExperimentConfig c = load_config((kSource / "configs" / "fig1.json").string());
  const auto got = read_csv(csv_text(c, 0, 1));
  const auto want = read_csv(slurp(kSource / "tests" / "golden" / "fig1.csv"));
  ASSERT_EQ(got.size(), want.size());
  ASSERT_EQ(got.size(), 1u + 2u * 201u);
  for (std::size_t i = 0; i < got.size(); ++i) {
    ASSERT_EQ(got[i].size(), want[i].size());
    for (std::size_t k = 0; k < got[i].size(); ++k) {
      if (k == 9 && i > 0)
        EXPECT_NEAR(std::strtod(got[i][k].c_str(), nullptr), std::strtod(want[i][k].c_str(), nullptr), 1e-12)
            << "row " << i;
      else
        EXPECT_EQ(got[i][k], want[i][k]) << "row " << i << " column " << k;
    }
  }
}

TEST(Execute, ByteIdenticalAcrossThreadCounts) {
  const ExperimentConfig c = parse_config_text(R"({"experiment_id": "det", "kind": "line", "horizon": 16,
    "mode": "trajectory", "trajectories": 200, "noise": {"channel": "broken_links"},
    "observables": ["distribution", "moments"], "sweep": {"p": [0.05, 0.1, 0.3]}, "seed": 17})");
  std::string first;
  for (std::size_t threads : {1u, 2u, 5u}) {
    RunOptions o;
    o.threads = threads;
    o.out_dir = scratch_dir("det" + std::to_string(threads));
    const RunSummary s = execute(c, o);
    EXPECT_EQ(s.tasks, 3u);
    const std::string bytes = slurp(s.csv);
    if (first.empty())
      first = bytes;
    else
      EXPECT_EQ(bytes, first) << threads << " threads";
  }
  RunOptions other;
  other.threads = 1;
  other.seed = 18;
  other.out_dir = scratch_dir("det_other");
  EXPECT_NE(slurp(execute(c, other).csv), first);
}

TEST(Execute, ManifestRecordsProvenance) {
  const ExperimentConfig c = parse_config_text(kCycleSweep);
  RunOptions o;
  o.threads = 2;
  o.seed = 7;
  o.out_dir = scratch_dir("manifest");
  const RunSummary s = execute(c, o);
  EXPECT_TRUE(fs::exists(s.csv));
  EXPECT_EQ(s.csv.filename(), "cyc.csv");
  const Json m = Json::parse(slurp(s.manifest));
  EXPECT_EQ(m["experiment_id"], "cyc");
  EXPECT_EQ(m["code_version"], kCodeVersion);
  EXPECT_EQ(m["master_seed"].get<std::uint64_t>(), 7u);
  EXPECT_EQ(m["threads"].get<std::size_t>(), 2u);
  EXPECT_EQ(m["csv"], "cyc.csv");
  EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
  EXPECT_GE(m["wall_clock_seconds"].get<double>(), 0.0);
  ASSERT_EQ(m["tasks"].size(), 4u);
  std::size_t rows = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(m["tasks"][i]["seed"].get<std::uint64_t>(), task_seed(7, i));
    EXPECT_TRUE(m["tasks"][i]["coordinates"].contains("p"));
    EXPECT_TRUE(m["tasks"][i]["coordinates"].contains("N"));
    rows += m["tasks"][i]["rows"].get<std::size_t>();
  }
  EXPECT_EQ(rows, s.rows);
  EXPECT_EQ(read_csv(slurp(s.csv)).size(), rows + 1);
}

TEST(Execute, HorizonOverrideChangesTheHash) {
  const ExperimentConfig c = parse_config_text(R"({"experiment_id": "h", "kind": "line", "horizon": 6,
    "observables": ["moments"]})");
  RunOptions a, b;
  a.threads = b.threads = 1;
  a.out_dir = scratch_dir("h_a");
  b.out_dir = scratch_dir("h_b");
  b.horizon_override = 4.0;
  execute(c, a);
  const RunSummary sb = execute(c, b);
  const Json ma = Json::parse(slurp(a.out_dir / "h.manifest.json"));
  const Json mb = Json::parse(slurp(sb.manifest));
  EXPECT_NE(ma["config_hash"], mb["config_hash"]);
  EXPECT_EQ(read_csv(slurp(sb.csv)).size(), 1u + 4u * 5u);
  RunOptions bad;
  bad.horizon_override = 8.0;
  bad.out_dir = scratch_dir("h_bad");
  const ExperimentConfig narrow = parse_config_text(R"({"experiment_id": "h", "kind": "line", "horizon": 6,
    "graph": {"halfwidth": 6}})");
  EXPECT_THROW(execute(narrow, bad), Error);
}

TEST(Execute, ThreadCountFromEnvironment) {
  ::setenv("QWALKDEC_THREADS", "3", 1);
  EXPECT_EQ(default_thread_count(), 3u);
  ::setenv("QWALKDEC_THREADS", "zero", 1);
  EXPECT_GE(default_thread_count(), 1u);
  ::unsetenv("QWALKDEC_THREADS");
}

TEST(Execute, ContinuousSweepEmitsFiniteRows) {
  const ExperimentConfig c = parse_config_text(R"({"experiment_id": "ct", "kind": "cycle", "walk": "continuous",
    "graph": {"N": 6}, "hamiltonian": {"gamma": 0.25}, "noise": {"channel": "vertex_project"}, "horizon": 20,
    "time_step": 1, "observables": ["tv_uniform", "target_probability"], "sweep": {"p": [0, 0.5]}})");
  const auto rows = read_csv(csv_text(c, 0, 2));
  ASSERT_GT(rows.size(), 1u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][1].empty(), false);
    EXPECT_TRUE(std::isfinite(std::strtod(rows[i][9].c_str(), nullptr)));
  }
}
