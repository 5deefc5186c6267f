#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qwalk/coined.hpp"
#include "qwalk/ctqw.hpp"
#include "qwalk/graphs.hpp"
#include "qwalk/observables.hpp"
#include "qwalk/oracles.hpp"
#include "qwalk/runner/config.hpp"

namespace qwalk::runner {

/// One CSV record before the experiment id and sweep coordinates are attached.
struct Row {
  std::optional<double> time;
  std::string observable;
  std::string x;  // vertex label, grid value, or empty
  double value = 0.0;
  bool converged = true;
};

struct TaskOutput {
  std::vector<Row> rows;
  std::vector<std::pair<std::string, bool>> convergence;  // observable -> converged
};

inline Graph build_graph(const ExperimentConfig& c) {
  switch (c.kind) {
    case ExperimentKind::Line: {
      std::size_t half = c.graph.halfwidth;
      if (half == 0) half = static_cast<std::size_t>(std::ceil(c.horizon));
      if (c.walk == WalkType::Continuous && c.graph.halfwidth == 0)
        half = static_cast<std::size_t>(std::ceil(c.horizon)) + 30;
      return build_line(half);
    }
    case ExperimentKind::Cycle: return build_cycle(c.graph.cycle_size);
    case ExperimentKind::Hypercube:
    case ExperimentKind::Search: return build_hypercube(c.graph.dimension);
    case ExperimentKind::GluedTrees: return build_glued_trees(c.graph.depth, c.graph.wiring_seed);
    case ExperimentKind::CustomGraph: {
      std::ifstream in(c.graph.edge_list);
      require(static_cast<bool>(in), ErrorKind::Config, "graph.edge_list: cannot open '" + c.graph.edge_list + "'");
      std::ostringstream ss;
      ss << in.rdbuf();
      try {
        return load_graph(ss.str());
      } catch (const Error& e) {
        fail(ErrorKind::Config, std::string("graph.edge_list: ") + e.what());
      }
    }
  }
  fail(ErrorKind::Config, "kind: unsupported");
}

namespace detail {

inline std::string label_of(const Graph& g, std::size_t v) { return std::to_string(g.label(v)); }

inline std::string format_grid(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::size_t resolve_vertex(const Graph& g, std::optional<std::int64_t> value, std::size_t fallback,
                                  const char* field) {
  if (!value) return fallback;
  if (g.kind() == GraphKind::Line) {
    try {
      return g.vertex_at(*value);
    } catch (const Error&) {
      fail(ErrorKind::Config, std::string(field) + ": outside the line window");
    }
  }
  require(*value >= 0 && static_cast<std::size_t>(*value) < g.vertex_count(), ErrorKind::Config,
          std::string(field) + ": vertex out of range");
  return static_cast<std::size_t>(*value);
}

inline std::size_t default_start(const Graph& g) {
  return g.kind() == GraphKind::Line ? g.vertex_at(0) : 0;
}

inline std::size_t default_target(const Graph& g) { return g.vertex_count() - 1; }

inline CVector initial_coin(const ExperimentConfig& c, const Graph& g) {
  const auto d = g.max_degree();
  const std::string& init = c.coin.initial;
  if (init == "explicit") {
    require(static_cast<std::size_t>(c.coin.initial_vector.size()) == d, ErrorKind::Config,
            "coin.initial: needs " + std::to_string(d) + " amplitudes");
    return c.coin.initial_vector;
  }
  if (init == "minus" || init == "plus") {
    require(d == 2, ErrorKind::Config, "coin.initial: minus/plus need a two-state coin");
    return port_vector(2, init == "minus" ? 0 : 1);
  }
  if (init == "symmetric" && d == 2) return symmetric_coin();
  return CVector::Constant(static_cast<Eigen::Index>(d), 1.0 / std::sqrt(static_cast<double>(d)));
}

inline CoinSpec coin_spec(const ExperimentConfig& c) {
  CoinSpec s;
  s.base = c.coin.base;
  return s;
}

// Sample times for series observables: 0, every k steps, and T.
inline std::vector<std::size_t> series_steps(std::size_t horizon, std::size_t every) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t <= horizon; t += every) out.push_back(t);
  if (out.back() != horizon) out.push_back(horizon);
  return out;
}

inline std::vector<std::size_t> distribution_steps(const ExperimentConfig& c) {
  std::vector<std::size_t> out;
  if (c.distribution_times.empty()) return {static_cast<std::size_t>(c.horizon)};
  for (double t : c.distribution_times) out.push_back(static_cast<std::size_t>(std::llround(t)));
  return out;
}

class Emitter {
 public:
  explicit Emitter(TaskOutput& out) : out_(out) {}

  void value(std::optional<double> time, const std::string& obs, const std::string& x, double v, bool converged = true) {
    require(std::isfinite(v), ErrorKind::Contract, "non-finite value for observable " + obs);
    out_.rows.push_back(Row{time, obs, x, v, converged});
  }

  void distribution(double time, const std::string& obs, const Graph& g, const RVector& p) {
    for (std::size_t v = 0; v < g.vertex_count(); ++v) value(time, obs, label_of(g, v), p(static_cast<Eigen::Index>(v)));
  }

  void flag(const std::string& obs, bool converged) { out_.convergence.emplace_back(obs, converged); }

 private:
  TaskOutput& out_;
};

inline RVector classical_on_line(const Graph& line, std::size_t steps) {
  const RVector b = oracles::classical_binomial(steps);
  RVector p = RVector::Zero(static_cast<Eigen::Index>(line.vertex_count()));
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const std::int64_t x = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(steps);
    if (std::llabs(x) <= static_cast<std::int64_t>(line.halfwidth()))
      p(static_cast<Eigen::Index>(line.vertex_at(x))) = b(i);
  }
  return p;
}

// Series observables shared by both walk types.
inline void emit_series(const ExperimentConfig& c, const Graph& g, const std::vector<double>& times,
                        const std::vector<RVector>& dists, bool parity_reference, Emitter& emit) {
  const Observables& o = c.observables;
  const bool coords = g.has_coordinates();
  std::vector<double> tv, tv_avg;
  RVector running = RVector::Zero(static_cast<Eigen::Index>(g.vertex_count()));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const RVector& p = dists[i];
    if (o.moments && coords) {
      const Moments m = moments(g, p);
      emit.value(times[i], "mean", "", m.mean);
      emit.value(times[i], "second_moment", "", m.second_moment);
      emit.value(times[i], "variance", "", m.variance);
      emit.value(times[i], "spread", "", m.spread());
    }
    const auto parity = static_cast<std::size_t>(std::llround(times[i])) % 2;
    const RVector ref = parity_reference ? uniform_reference(g, parity)
                                         : RVector::Constant(static_cast<Eigen::Index>(g.vertex_count()),
                                                             1.0 / static_cast<double>(g.vertex_count()));
    if (o.tv_uniform || o.mixing) {
      tv.push_back(tv_distance(p, ref));
      if (o.tv_uniform) emit.value(times[i], "tv_uniform", "", tv.back());
    }
    if (o.time_averaged && i > 0) {
      // Running average over samples 1..i; the reference for averaged
      // distributions on even cycles is the plain uniform one.
      running += p;
      const RVector avg = running / static_cast<double>(i);
      const RVector flat = RVector::Constant(static_cast<Eigen::Index>(g.vertex_count()),
                                             1.0 / static_cast<double>(g.vertex_count()));
      tv_avg.push_back(tv_distance(avg, flat));
      emit.value(times[i], "tv_time_averaged", "", tv_avg.back());
    }
  }
  if (o.mixing) {
    const MixingResult m = mixing_time(times, tv, c.epsilon, c.margin);
    emit.value(std::nullopt, "mixing_time", "", m.value, m.converged);
    emit.flag("mixing_time", m.converged);
    if (o.time_averaged && times.size() > 1) {
      const std::vector<double> avg_times(times.begin() + 1, times.end());
      const MixingResult ma = mixing_time(avg_times, tv_avg, c.epsilon, c.margin);
      emit.value(std::nullopt, "mixing_time_averaged", "", ma.value, ma.converged);
      emit.flag("mixing_time_averaged", ma.converged);
    }
  }
}

inline bool wants_distributions(const Observables& o) {
  return o.distribution || o.moments || o.tv_uniform || o.mixing || o.time_averaged || o.target_probability;
}

inline EvolutionMode resolve_mode(const ExperimentConfig& c, const Graph& g) {
  const Channel ch = c.noise.channel;
  EvolutionMode mode = c.mode;
  if (mode == EvolutionMode::Auto) {
    if (ch == Channel::None)
      mode = EvolutionMode::Pure;
    else if (ch == Channel::BrokenLinks || ch == Channel::ImperfectCoin)
      mode = EvolutionMode::Trajectory;
    else
      mode = EvolutionMode::Density;
  }
  if (mode == EvolutionMode::Pure)
    require(ch == Channel::None, ErrorKind::Config, "mode: pure evolution needs noise.channel = none");
  if (mode == EvolutionMode::Density)
    require(g.basis_size() <= kDensityCap, ErrorKind::Resource,
            "density-matrix mode refused for basis size " + std::to_string(g.basis_size()) + " (cap " +
                std::to_string(kDensityCap) + "); set \"mode\": \"trajectory\"");
  return mode;
}

inline void run_discrete(const ExperimentConfig& c, std::uint64_t seed, std::size_t threads, Emitter& emit) {
  const Graph g = build_graph(c);
  const auto horizon = static_cast<std::size_t>(c.horizon);
  const Observables& o = c.observables;
  const std::size_t start = resolve_vertex(g, c.start, default_start(g), "start");

  if (c.kind == ExperimentKind::Search) {
    const std::size_t marked = resolve_vertex(g, c.target, 0, "target");
    const auto series = search_evolve(g, marked, horizon);
    std::size_t best = 0;
    for (std::size_t t = 0; t < series.size(); ++t) {
      if (o.marked_probability) emit.value(static_cast<double>(t), "marked_probability", label_of(g, marked), series[t]);
      if (series[t] > series[best]) best = t;
    }
    emit.value(static_cast<double>(best), "search_peak_probability", label_of(g, marked), series[best]);
    return;
  }

  const CVector coin0 = initial_coin(c, g);
  const WalkStatePure initial = localized_state(g, start, coin0);
  const std::vector<std::size_t> snap = distribution_steps(c);
  const std::vector<std::size_t> steps = series_steps(horizon, c.series_every);

  if (wants_distributions(o)) {
    std::vector<std::size_t> wanted = steps;
    for (auto t : snap) wanted.push_back(t);
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
    std::vector<RVector> dists;
    std::vector<char> keep(horizon + 1, 0);
    for (auto t : wanted) keep[t] = 1;
    const auto record = [&](std::size_t t, const RVector& p) {
      if (keep[t]) dists.push_back(p);
    };

    if (c.noise.channel == Channel::MultiCoin) {
      const auto all = multi_coin_evolve(g, c.noise.coin_count, horizon, c.noise.random_order, seed, coin0);
      for (std::size_t t = 0; t <= horizon; ++t) record(t, all[t]);
    } else {
      const CoinSpec spec = coin_spec(c);
      const WalkOperator op(g, spec);
      switch (resolve_mode(c, g)) {
        case EvolutionMode::Pure: {
          WalkStatePure s = initial;
          record(0, position_distribution(g, s.amplitudes));
          for (std::size_t t = 1; t <= horizon; ++t) {
            s = step_pure(s, op);
            record(t, position_distribution(g, s.amplitudes));
          }
          break;
        }
        case EvolutionMode::Density: {
          WalkStateDensity s = to_density(initial);
          evolve_density(s, op, g, c.noise, horizon,
                         [&](std::size_t t, const CMatrix& rho) { record(t, position_distribution(g, rho)); });
          check_density(s.rho, kLongRunTol);
          break;
        }
        default: {
          auto got = ensemble_distributions(initial, op, g, c.noise, horizon, wanted, c.trajectories, seed, threads);
          for (std::size_t i = 0; i < wanted.size(); ++i) record(wanted[i], got[i]);
          break;
        }
      }
    }
    // dists is aligned with `wanted`.
    const auto at = [&](std::size_t t) -> const RVector& {
      return dists[static_cast<std::size_t>(std::lower_bound(wanted.begin(), wanted.end(), t) - wanted.begin())];
    };
    if (o.distribution)
      for (auto t : snap) emit.distribution(static_cast<double>(t), "distribution", g, at(t));
    if (o.classical_distribution && g.kind() == GraphKind::Line)
      for (auto t : snap) emit.distribution(static_cast<double>(t), "classical_distribution", g, classical_on_line(g, t));
    if (o.target_probability) {
      const std::size_t target = resolve_vertex(g, c.target, default_target(g), "target");
      for (auto t : steps) emit.value(static_cast<double>(t), "target_probability", label_of(g, target), at(t)(static_cast<Eigen::Index>(target)));
    }
    std::vector<double> times;
    std::vector<RVector> series;
    for (auto t : steps) {
      times.push_back(static_cast<double>(t));
      series.push_back(at(t));
    }
    emit_series(c, g, times, series, true, emit);
  } else if (o.classical_distribution && g.kind() == GraphKind::Line) {
    for (auto t : snap) emit.distribution(static_cast<double>(t), "classical_distribution", g, classical_on_line(g, t));
  }

  if (o.hitting) {
    const std::size_t target = resolve_vertex(g, c.target, default_target(g), "target");
    require(target != start, ErrorKind::Config, "target: absorbing vertex equals the start vertex");
    const WalkOperator op(g, coin_spec(c));
    const bool density = c.mode == EvolutionMode::Density;
    if (density)
      require(g.basis_size() <= kDensityCap, ErrorKind::Resource,
              "density-matrix mode refused for basis size " + std::to_string(g.basis_size()));
    const HittingResult h = density ? measured_walk_density(g, op, initial, target, horizon, c.noise, c.r0)
                                    : measured_walk_run(g, op, initial, target, horizon, c.noise, c.r0, c.trajectories,
                                                        seed, threads);
    const std::string x = label_of(g, target);
    for (std::size_t t = 1; t <= horizon; ++t) {
      emit.value(static_cast<double>(t), "first_arrival", x, h.r[t]);
      emit.value(static_cast<double>(t), "target_probability_unmeasured", x, h.unmeasured[t]);
    }
    emit.value(std::nullopt, "cumulative_arrival", x, h.cumulative);
    emit.value(h.first_peak ? std::optional<double>(static_cast<double>(*h.first_peak)) : std::nullopt,
               "first_peak_value", x, h.first_peak_value, h.first_peak.has_value());
    emit.value(std::nullopt, "hitting_one_shot", x, h.one_shot ? static_cast<double>(*h.one_shot) : 0.0,
               h.one_shot.has_value());
    emit.value(std::nullopt, "hitting_concurrent", x, h.concurrent ? static_cast<double>(*h.concurrent) : 0.0,
               h.concurrent.has_value());
    emit.value(std::nullopt, "hitting_average", x, h.average, !h.average_truncated);
    emit.flag("hitting_average", !h.average_truncated);
    if (g.kind() == GraphKind::Hypercube && start == 0 && target == g.vertex_count() - 1) {
      const auto classical = oracles::classical_hypercube_first_arrival(g.dimension(), horizon);
      for (std::size_t t = 1; t <= horizon; ++t)
        emit.value(static_cast<double>(t), "classical_first_arrival", x, classical[t]);
    }
  }

  if (o.period) {
    const WalkOperator op(g, coin_spec(c));
    const auto period = find_period(op, initial.amplitudes, c.period_horizon);
    emit.value(std::nullopt, "period", "", period ? static_cast<double>(*period) : static_cast<double>(c.period_horizon),
               period.has_value());
    emit.flag("period", period.has_value());
  }

  if (o.top_hat) {
    const WalkOperator op(g, coin_spec(c));
    require(g.basis_size() <= kDensityCap, ErrorKind::Resource, "top_hat runs in density mode; basis too large");
    const TopHatFit fit = top_hat_fit(g, op, coin0, c.noise, horizon, c.top_hat_grid, threads);
    for (const auto& [p, tv] : fit.curve) emit.value(static_cast<double>(horizon), "top_hat_tv", format_grid(p), tv);
    emit.value(static_cast<double>(horizon), "top_hat_p_star", "", fit.p_star);
    emit.value(static_cast<double>(horizon), "top_hat_tv_star", "", fit.tv_star);
  }
}

inline void run_continuous(const ExperimentConfig& c, Emitter& emit) {
  const Graph g = build_graph(c);
  const Observables& o = c.observables;
  const std::size_t start = resolve_vertex(g, c.start, default_start(g), "start");
  const double dt = c.time_step > 0.0 ? c.time_step : c.horizon / 200.0;
  std::vector<double> times;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t >= c.horizon - 1e-9 * c.horizon) break;
    times.push_back(t);
  }
  times.push_back(c.horizon);
  std::vector<double> snap = c.distribution_times.empty() ? std::vector<double>{c.horizon} : c.distribution_times;
  std::vector<double> all = times;
  all.insert(all.end(), snap.begin(), snap.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), all.end());

  std::vector<RVector> dists;
  const bool noisy = c.ctqw_noise.model != CtqwNoiseModel::None && c.ctqw_noise.rate > 0.0;
  if (!noisy) {
    const CVector psi0 = vertex_state(g, start);
    for (double t : all) dists.push_back(evolve_ctqw_pure(g, c.hamiltonian, t, psi0).cwiseAbs2());
  } else {
    require(g.vertex_count() <= kDensityCap, ErrorKind::Resource,
            "master-equation mode refused for " + std::to_string(g.vertex_count()) + " vertices (cap " +
                std::to_string(kDensityCap) + ")");
    const auto n = static_cast<Eigen::Index>(g.vertex_count());
    CMatrix rho0 = CMatrix::Zero(n, n);
    rho0(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(start)) = 1.0;
    std::vector<double> positive;
    for (double t : all)
      if (t > 0.0) positive.push_back(t);
    const auto states = qwalk::evolve_master_series(rho0, g, c.hamiltonian, c.ctqw_noise, positive);
    std::size_t k = 0;
    for (double t : all) dists.push_back(t > 0.0 ? RVector(states[k++].diagonal().real()) : RVector(rho0.diagonal().real()));
  }
  const auto at = [&](double t) -> const RVector& {
    const auto it = std::lower_bound(all.begin(), all.end(), t - 1e-12);
    return dists[static_cast<std::size_t>(it - all.begin())];
  };
  if (o.distribution)
    for (double t : snap) emit.distribution(t, "distribution", g, at(t));
  const std::size_t target = resolve_vertex(g, c.target, default_target(g), "target");
  if (o.target_probability)
    for (double t : times) emit.value(t, "target_probability", label_of(g, target), at(t)(static_cast<Eigen::Index>(target)));
  if (o.classical_target_probability) {
    const RVector p0 = vertex_state(g, start).real();
    for (double t : times)
      emit.value(t, "classical_target_probability", label_of(g, target),
                 classical_ctrw(g, c.hamiltonian.gamma, t, p0)(static_cast<Eigen::Index>(target)));
  }
  std::vector<RVector> series;
  for (double t : times) series.push_back(at(t));
  emit_series(c, g, times, series, false, emit);
}

}  // namespace detail

/// Runs one resolved sweep point.
inline TaskOutput run_task(const ExperimentConfig& c, std::uint64_t seed, std::size_t threads) {
  TaskOutput out;
  detail::Emitter emit(out);
  if (c.walk == WalkType::Discrete)
    detail::run_discrete(c, seed, threads, emit);
  else
    detail::run_continuous(c, emit);
  return out;
}

}  // namespace qwalk::runner
