#pragma once

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qwalk/coin.hpp"
#include "qwalk/ctqw.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/noise.hpp"
#include "qwalk/types.hpp"

namespace qwalk::runner {

using Json = nlohmann::json;

enum class ExperimentKind { Line, Cycle, Hypercube, GluedTrees, Search, CustomGraph };
enum class WalkType { Discrete, Continuous };
enum class EvolutionMode { Auto, Pure, Density, Trajectory };

/// Basis size above which density-matrix evolution is refused.
inline constexpr std::size_t kDensityCap = 4096;
inline constexpr std::size_t kDefaultSweepCap = 10000;

struct GraphParams {
  std::size_t halfwidth = 0;  // line; 0 means "equal to the horizon"
  std::size_t cycle_size = 0;
  std::size_t dimension = 0;
  std::size_t depth = 0;
  std::uint64_t wiring_seed = 0;
  std::string edge_list;  // custom graph: path to the edge-list file
};

struct CoinConfig {
  BaseCoin base = coins::Hadamard{};
  std::string initial = "symmetric";  // minus | plus | symmetric | uniform | explicit
  CVector initial_vector;             // used when initial == "explicit"
};

struct Observables {
  bool distribution = false;
  bool classical_distribution = false;
  bool moments = false;
  bool tv_uniform = false;
  bool mixing = false;
  bool time_averaged = false;
  bool hitting = false;
  bool period = false;
  bool top_hat = false;
  bool marked_probability = false;
  bool target_probability = false;
  bool classical_target_probability = false;
};

/// Sweep axes; an absent axis is std::nullopt, a present one must be non-empty.
struct SweepAxes {
  std::optional<std::vector<double>> p;
  std::optional<std::vector<std::size_t>> cycle_size;  // "N"
  std::optional<std::vector<std::size_t>> dimension;   // "n"
  std::optional<std::vector<double>> theta;
  std::optional<std::vector<std::size_t>> coins;  // "M"

  [[nodiscard]] bool empty() const { return !p && !cycle_size && !dimension && !theta && !coins; }

  [[nodiscard]] std::size_t size() const {
    std::size_t total = 1;
    const auto mul = [&total](std::size_t k) { total = k == 0 ? 0 : (total > SIZE_MAX / k ? SIZE_MAX : total * k); };
    if (p) mul(p->size());
    if (cycle_size) mul(cycle_size->size());
    if (dimension) mul(dimension->size());
    if (theta) mul(theta->size());
    if (coins) mul(coins->size());
    return total;
  }
};

struct ExperimentConfig {
  std::string experiment_id;
  ExperimentKind kind = ExperimentKind::Line;
  WalkType walk = WalkType::Discrete;
  GraphParams graph;
  CoinConfig coin;
  HamiltonianSpec hamiltonian;
  NoiseSpec noise;         // discrete walks
  CtqwNoiseSpec ctqw_noise;  // continuous walks
  EvolutionMode mode = EvolutionMode::Auto;
  double horizon = 0.0;  // steps (discrete) or time (continuous)
  double time_step = 0.0;  // continuous sampling interval; 0 means horizon / 200
  std::size_t series_every = 1;
  std::vector<double> distribution_times;  // empty means {horizon}
  std::optional<std::int64_t> start;   // vertex index, or signed coordinate on a line
  std::optional<std::int64_t> target;
  double epsilon = 0.01;
  double margin = 4.0;
  double r0 = 0.1;
  std::vector<double> top_hat_grid;
  std::size_t period_horizon = 10000;
  Observables observables;
  SweepAxes sweep;
  std::size_t sweep_cap = kDefaultSweepCap;
  std::uint64_t seed = 0;
  std::size_t trajectories = 1000;
  Json source;  // the parsed document, for hashing
};

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Line: return "line";
    case ExperimentKind::Cycle: return "cycle";
    case ExperimentKind::Hypercube: return "hypercube";
    case ExperimentKind::GluedTrees: return "glued_trees";
    case ExperimentKind::Search: return "search";
    case ExperimentKind::CustomGraph: return "custom_graph";
  }
  return "line";
}

namespace detail {

[[noreturn]] inline void config_error(const std::string& field, const std::string& what) {
  fail(ErrorKind::Config, field + ": " + what);
}

inline void check_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error(path.empty() ? "config" : path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) config_error(path.empty() ? key : path + "." + key, "unknown key");
}

inline std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

inline double get_number(const Json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number()) config_error(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) config_error(join(path, key), "must be finite");
  return d;
}

inline std::uint64_t get_unsigned(const Json& obj, const std::string& path, const char* key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    config_error(join(path, key), "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string get_string(const Json& obj, const std::string& path, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_string()) config_error(join(path, key), "expected a string");
  return v.get<std::string>();
}

template <typename T>
std::vector<T> get_list(const Json& obj, const std::string& path, const char* key) {
  const Json& v = obj.at(key);
  const std::string field = join(path, key);
  if (!v.is_array()) config_error(field, "expected a list");
  if (v.empty()) config_error(field, "sweep axis must not be empty");
  std::vector<T> out;
  for (const auto& e : v) {
    if constexpr (std::is_integral_v<T>) {
      if (!e.is_number_unsigned()) config_error(field, "expected non-negative integers");
      out.push_back(e.get<T>());
    } else {
      if (!e.is_number() || !std::isfinite(e.get<double>())) config_error(field, "expected finite numbers");
      out.push_back(e.get<T>());
    }
  }
  return out;
}

inline BaseCoin parse_coin_type(const Json& c, const std::string& path) {
  const std::string type = get_string(c, path, "type", "hadamard");
  if (type == "hadamard") return coins::Hadamard{};
  if (type == "grover") return coins::Grover{};
  if (type == "dft") return coins::Dft{};
  if (type == "biased") return coins::Biased{get_number(c, path, "eta", 0.5), get_number(c, path, "delta", 0.0)};
  config_error(path + ".type", "unknown coin '" + type + "'");
}

inline CVector parse_amplitudes(const Json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) config_error(field, "expected a list of [re, im] pairs");
  CVector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Json& e = v[i];
    if (e.is_number()) {
      out(static_cast<Eigen::Index>(i)) = e.get<double>();
    } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
      out(static_cast<Eigen::Index>(i)) = cplx(e[0].get<double>(), e[1].get<double>());
    } else {
      config_error(field, "expected a list of [re, im] pairs");
    }
  }
  if (out.norm() == 0.0) config_error(field, "initial coin must be non-zero");
  return out;
}

inline Channel parse_channel(const std::string& s, const std::string& field) {
  for (Channel c : {Channel::None, Channel::MeasurePosition, Channel::MeasureCoin, Channel::MeasureBoth,
                    Channel::CoinDephase, Channel::BrokenLinks, Channel::ImperfectCoin, Channel::MultiCoin})
    if (s == to_string(c)) return c;
  config_error(field, "unknown channel '" + s + "'");
}

inline void parse_noise(const Json& n, ExperimentConfig& cfg) {
  const std::string path = "noise";
  check_keys(n, path, {"channel", "rate", "theta", "coin_basis", "coins", "order", "schedule"});
  const std::string channel = get_string(n, path, "channel", "none");
  const double rate = get_number(n, path, "rate", 0.0);
  if (cfg.walk == WalkType::Continuous) {
    if (channel == "none")
      cfg.ctqw_noise.model = CtqwNoiseModel::None;
    else if (channel == "vertex_project")
      cfg.ctqw_noise.model = CtqwNoiseModel::VertexProject;
    else if (channel == "per_qubit_dephase")
      cfg.ctqw_noise.model = CtqwNoiseModel::PerQubitDephase;
    else
      config_error("noise.channel", "unknown continuous-walk channel '" + channel + "'");
    if (rate < 0.0) config_error("noise.rate", "must be >= 0");
    cfg.ctqw_noise.rate = rate;
    for (const char* key : {"theta", "coin_basis", "coins", "order", "schedule"})
      if (n.contains(key)) config_error(join(path, key), "not used by continuous walks");
    return;
  }
  NoiseSpec& s = cfg.noise;
  s.channel = parse_channel(channel, "noise.channel");
  s.rate = rate;
  s.theta = get_number(n, path, "theta", 0.0);
  const std::string basis = get_string(n, path, "coin_basis", "computational");
  if (basis == "computational")
    s.coin_basis = CoinBasis::Computational;
  else if (basis == "sigma_y")
    s.coin_basis = CoinBasis::SigmaY;
  else
    config_error("noise.coin_basis", "expected computational or sigma_y");
  s.coin_count = static_cast<std::size_t>(get_unsigned(n, path, "coins", 1));
  const std::string order = get_string(n, path, "order", "cyclic");
  if (order != "cyclic" && order != "random") config_error("noise.order", "expected cyclic or random");
  s.random_order = order == "random";
  if (n.contains("schedule")) {
    const Json& sc = n.at("schedule");
    const std::string sp = "noise.schedule";
    check_keys(sc, sp, {"type", "interval", "count", "horizon", "seed"});
    const std::string type = get_string(sc, sp, "type", "per_step");
    if (type == "per_step")
      s.schedule.type = Schedule::Type::PerStep;
    else if (type == "fixed_interval")
      s.schedule.type = Schedule::Type::FixedInterval;
    else if (type == "random_times")
      s.schedule.type = Schedule::Type::RandomTimes;
    else
      config_error("noise.schedule.type", "expected per_step, fixed_interval or random_times");
    s.schedule.interval = static_cast<std::size_t>(get_unsigned(sc, sp, "interval", 1));
    s.schedule.count = static_cast<std::size_t>(get_unsigned(sc, sp, "count", 0));
    s.schedule.horizon = static_cast<std::size_t>(get_unsigned(sc, sp, "horizon", 0));
    s.schedule.seed = get_unsigned(sc, sp, "seed", 0);
  }
}

inline void parse_observables(const Json& v, Observables& o) {
  if (!v.is_array()) config_error("observables", "expected a list of names");
  for (const auto& e : v) {
    if (!e.is_string()) config_error("observables", "expected a list of names");
    const std::string name = e.get<std::string>();
    bool* slot = nullptr;
    if (name == "distribution") slot = &o.distribution;
    if (name == "classical_distribution") slot = &o.classical_distribution;
    if (name == "moments") slot = &o.moments;
    if (name == "tv_uniform") slot = &o.tv_uniform;
    if (name == "mixing") slot = &o.mixing;
    if (name == "time_averaged") slot = &o.time_averaged;
    if (name == "hitting") slot = &o.hitting;
    if (name == "period") slot = &o.period;
    if (name == "top_hat") slot = &o.top_hat;
    if (name == "marked_probability") slot = &o.marked_probability;
    if (name == "target_probability") slot = &o.target_probability;
    if (name == "classical_target_probability") slot = &o.classical_target_probability;
    if (!slot) config_error("observables", "unknown observable '" + name + "'");
    *slot = true;
  }
}

}  // namespace detail

/// Checks cross-field constraints on a fully resolved (per sweep point) config.
inline void validate(const ExperimentConfig& c) {
  using detail::config_error;
  if (!(c.horizon > 0.0)) config_error("horizon", "must be > 0");
  const bool discrete = c.walk == WalkType::Discrete;
  if (discrete && c.horizon != std::floor(c.horizon)) config_error("horizon", "must be an integer step count");
  if (discrete && c.horizon > 1e7) config_error("horizon", "too large");
  switch (c.kind) {
    case ExperimentKind::Line:
      if (discrete && c.graph.halfwidth != 0 && static_cast<double>(c.graph.halfwidth) < c.horizon)
        config_error("graph.halfwidth", "must be >= horizon for discrete line walks");
      break;
    case ExperimentKind::Cycle:
      if (c.graph.cycle_size < 2) config_error("graph.N", "cycle needs N >= 2");
      break;
    case ExperimentKind::Hypercube:
    case ExperimentKind::Search:
      if (c.graph.dimension < 1 || c.graph.dimension > 20) config_error("graph.n", "hypercube dimension must be in [1, 20]");
      break;
    case ExperimentKind::GluedTrees:
      if (c.graph.depth < 1 || c.graph.depth > 16) config_error("graph.depth", "must be in [1, 16]");
      break;
    case ExperimentKind::CustomGraph:
      if (c.graph.edge_list.empty()) config_error("graph.edge_list", "custom graphs need an edge-list path");
      break;
  }
  if (discrete) {
    try {
      c.noise.validate();
    } catch (const Error& e) {
      fail(ErrorKind::Config, e.detail());
    }
    if (c.noise.channel == Channel::MultiCoin && c.kind != ExperimentKind::Line)
      config_error("noise.channel", "multi_coin runs on a line only");
    if (c.kind == ExperimentKind::Search && c.walk != WalkType::Discrete) config_error("walk", "search is a discrete walk");
    if (c.series_every < 1) config_error("series_every", "must be >= 1");
    if (c.trajectories < 1) config_error("trajectories", "must be >= 1");
  } else {
    if (c.kind == ExperimentKind::Search) config_error("walk", "search is a discrete walk");
    if (c.time_step < 0.0) config_error("time_step", "must be > 0");
    if (c.ctqw_noise.rate < 0.0) config_error("noise.rate", "must be >= 0");
    if (c.ctqw_noise.model == CtqwNoiseModel::PerQubitDephase && c.kind != ExperimentKind::Hypercube)
      config_error("noise.channel", "per_qubit_dephase needs a hypercube");
    const Observables& o = c.observables;
    if (o.period || o.top_hat || o.hitting || o.marked_probability)
      config_error("observables", "period, top_hat, hitting and marked_probability need a discrete walk");
  }
  if (!(c.epsilon > 0.0)) config_error("epsilon", "must be > 0");
  if (!(c.margin >= 1.0)) config_error("margin", "must be >= 1");
  if (c.observables.top_hat) {
    if (c.kind != ExperimentKind::Line) config_error("observables", "top_hat needs a line walk");
    if (c.top_hat_grid.size() < 2) config_error("top_hat.p_grid", "needs at least two rates");
    for (double p : c.top_hat_grid)
      if (p < 0.0 || p > 1.0) config_error("top_hat.p_grid", "rates must lie in [0, 1]");
  }
  if (c.observables.period && c.noise.channel != Channel::None) config_error("observables", "period needs a noiseless walk");
  if ((c.observables.moments || c.observables.classical_distribution) && c.kind != ExperimentKind::Line &&
      c.kind != ExperimentKind::Cycle)
    config_error("observables", "moments need a line or cycle");
  for (double t : c.distribution_times)
    if (t < 0.0 || t > c.horizon) config_error("distribution_times", "times must lie in [0, horizon]");
  if (c.sweep.size() > c.sweep_cap)
    fail(ErrorKind::Resource, "sweep has " + std::to_string(c.sweep.size()) + " points, above the cap of " +
                                  std::to_string(c.sweep_cap));
}

/// Parses a config document. Unknown keys are rejected and every error names
/// the offending field.
inline ExperimentConfig parse_config(const Json& doc) {
  using namespace detail;
  check_keys(doc, "", {"experiment_id", "kind", "walk", "graph", "coin", "hamiltonian", "noise", "mode", "horizon",
                       "time_step", "series_every", "distribution_times", "start", "target", "epsilon", "margin", "r0",
                       "top_hat", "period_horizon", "observables", "sweep", "sweep_cap", "seed", "trajectories"});
  ExperimentConfig c;
  c.source = doc;
  c.experiment_id = get_string(doc, "", "experiment_id", "");
  if (c.experiment_id.empty()) config_error("experiment_id", "required");
  for (char ch : c.experiment_id)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-'))
      config_error("experiment_id", "use letters, digits, '_' or '-'");

  const std::string kind = get_string(doc, "", "kind", "");
  if (kind == "line") c.kind = ExperimentKind::Line;
  else if (kind == "cycle") c.kind = ExperimentKind::Cycle;
  else if (kind == "hypercube") c.kind = ExperimentKind::Hypercube;
  else if (kind == "glued_trees") c.kind = ExperimentKind::GluedTrees;
  else if (kind == "search") c.kind = ExperimentKind::Search;
  else if (kind == "custom_graph") c.kind = ExperimentKind::CustomGraph;
  else config_error("kind", kind.empty() ? "required" : "unknown kind '" + kind + "'");

  const std::string walk = get_string(doc, "", "walk", "discrete");
  if (walk == "discrete") c.walk = WalkType::Discrete;
  else if (walk == "continuous") c.walk = WalkType::Continuous;
  else config_error("walk", "expected discrete or continuous");

  if (doc.contains("graph")) {
    const Json& g = doc.at("graph");
    check_keys(g, "graph", {"halfwidth", "N", "n", "depth", "wiring_seed", "edge_list"});
    c.graph.halfwidth = static_cast<std::size_t>(get_unsigned(g, "graph", "halfwidth", 0));
    c.graph.cycle_size = static_cast<std::size_t>(get_unsigned(g, "graph", "N", 0));
    c.graph.dimension = static_cast<std::size_t>(get_unsigned(g, "graph", "n", 0));
    c.graph.depth = static_cast<std::size_t>(get_unsigned(g, "graph", "depth", 0));
    c.graph.wiring_seed = get_unsigned(g, "graph", "wiring_seed", 0);
    c.graph.edge_list = get_string(g, "graph", "edge_list", "");
  }
  if (doc.contains("coin")) {
    const Json& cj = doc.at("coin");
    check_keys(cj, "coin", {"type", "eta", "delta", "initial"});
    c.coin.base = parse_coin_type(cj, "coin");
    if (cj.contains("initial")) {
      const Json& init = cj.at("initial");
      if (init.is_string()) {
        c.coin.initial = init.get<std::string>();
        if (c.coin.initial != "minus" && c.coin.initial != "plus" && c.coin.initial != "symmetric" &&
            c.coin.initial != "uniform")
          config_error("coin.initial", "expected minus, plus, symmetric, uniform or an amplitude list");
      } else {
        c.coin.initial = "explicit";
        c.coin.initial_vector = parse_amplitudes(init, "coin.initial");
      }
    } else if (c.kind == ExperimentKind::Hypercube || c.kind == ExperimentKind::GluedTrees ||
               c.kind == ExperimentKind::CustomGraph || c.kind == ExperimentKind::Search) {
      c.coin.initial = "uniform";
    }
  } else if (c.kind != ExperimentKind::Line && c.kind != ExperimentKind::Cycle) {
    c.coin.base = coins::Grover{};
    c.coin.initial = "uniform";
  }
  if (doc.contains("hamiltonian")) {
    const Json& h = doc.at("hamiltonian");
    check_keys(h, "hamiltonian", {"gamma", "variant"});
    c.hamiltonian.gamma = get_number(h, "hamiltonian", "gamma", 1.0);
    const std::string v = get_string(h, "hamiltonian", "variant", "adjacency");
    if (v == "adjacency") c.hamiltonian.variant = HamiltonianVariant::Adjacency;
    else if (v == "laplacian") c.hamiltonian.variant = HamiltonianVariant::Laplacian;
    else config_error("hamiltonian.variant", "expected adjacency or laplacian");
    if (!(c.hamiltonian.gamma > 0.0)) config_error("hamiltonian.gamma", "must be > 0");
  }
  if (doc.contains("noise")) parse_noise(doc.at("noise"), c);

  const std::string mode = get_string(doc, "", "mode", "auto");
  if (mode == "auto") c.mode = EvolutionMode::Auto;
  else if (mode == "pure") c.mode = EvolutionMode::Pure;
  else if (mode == "density") c.mode = EvolutionMode::Density;
  else if (mode == "trajectory") c.mode = EvolutionMode::Trajectory;
  else config_error("mode", "expected auto, pure, density or trajectory");

  if (!doc.contains("horizon")) config_error("horizon", "required");
  c.horizon = get_number(doc, "", "horizon", 0.0);
  c.time_step = get_number(doc, "", "time_step", 0.0);
  c.series_every = static_cast<std::size_t>(get_unsigned(doc, "", "series_every", 1));
  if (doc.contains("distribution_times")) {
    const Json& v = doc.at("distribution_times");
    if (!v.is_array()) config_error("distribution_times", "expected a list");
    for (const auto& e : v) {
      if (!e.is_number()) config_error("distribution_times", "expected numbers");
      c.distribution_times.push_back(e.get<double>());
    }
  }
  for (const char* key : {"start", "target"}) {
    if (!doc.contains(key)) continue;
    const Json& v = doc.at(key);
    if (!v.is_number_integer()) config_error(key, "expected an integer");
    (std::string(key) == "start" ? c.start : c.target) = v.get<std::int64_t>();
  }
  c.epsilon = get_number(doc, "", "epsilon", c.epsilon);
  c.margin = get_number(doc, "", "margin", c.margin);
  c.r0 = get_number(doc, "", "r0", c.r0);
  if (doc.contains("top_hat")) {
    const Json& th = doc.at("top_hat");
    check_keys(th, "top_hat", {"p_grid"});
    if (th.contains("p_grid")) c.top_hat_grid = get_list<double>(th, "top_hat", "p_grid");
  }
  c.period_horizon = static_cast<std::size_t>(get_unsigned(doc, "", "period_horizon", c.period_horizon));
  if (doc.contains("observables")) parse_observables(doc.at("observables"), c.observables);
  if (doc.contains("sweep")) {
    const Json& s = doc.at("sweep");
    check_keys(s, "sweep", {"p", "N", "n", "theta", "M"});
    if (s.contains("p")) c.sweep.p = get_list<double>(s, "sweep", "p");
    if (s.contains("N")) c.sweep.cycle_size = get_list<std::size_t>(s, "sweep", "N");
    if (s.contains("n")) c.sweep.dimension = get_list<std::size_t>(s, "sweep", "n");
    if (s.contains("theta")) c.sweep.theta = get_list<double>(s, "sweep", "theta");
    if (s.contains("M")) c.sweep.coins = get_list<std::size_t>(s, "sweep", "M");
    if (c.sweep.cycle_size && c.kind != ExperimentKind::Cycle) config_error("sweep.N", "N sweeps need a cycle");
    if (c.sweep.dimension && c.kind != ExperimentKind::Hypercube && c.kind != ExperimentKind::Search)
      config_error("sweep.n", "n sweeps need a hypercube");
    if (c.sweep.coins && c.noise.channel != Channel::MultiCoin) config_error("sweep.M", "M sweeps need the multi_coin channel");
    if (c.sweep.theta && c.walk != WalkType::Discrete) config_error("sweep.theta", "theta sweeps need a discrete walk");
  }
  c.sweep_cap = static_cast<std::size_t>(get_unsigned(doc, "", "sweep_cap", kDefaultSweepCap));
  c.seed = get_unsigned(doc, "", "seed", 0);
  c.trajectories = static_cast<std::size_t>(get_unsigned(doc, "", "trajectories", c.trajectories));
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Config, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace qwalk::runner
