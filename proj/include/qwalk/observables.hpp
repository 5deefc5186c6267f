#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qwalk/coined.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/graphs.hpp"
#include "qwalk/noise.hpp"
#include "qwalk/parallel.hpp"
#include "qwalk/types.hpp"

namespace qwalk {

/// First and second moments over signed coordinates. "spread" is the root of
/// the second moment about the origin, the width measure used throughout.
struct Moments {
  double mean = 0.0;
  double second_moment = 0.0;
  double variance = 0.0;
  [[nodiscard]] double spread() const { return std::sqrt(second_moment); }
};

inline Moments moments(const Graph& g, const RVector& p) {
  require(g.has_coordinates(), ErrorKind::Unsupported, std::string("moments need signed coordinates; graph is ") + to_string(g.kind()));
  require(static_cast<std::size_t>(p.size()) == g.vertex_count(), ErrorKind::Validation, "distribution length mismatch");
  Moments m;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const auto x = static_cast<double>(g.label(static_cast<std::size_t>(i)));
    m.mean += x * p(i);
    m.second_moment += x * x * p(i);
  }
  m.variance = m.second_moment - m.mean * m.mean;
  return m;
}

/// Sum of absolute differences (no factor 1/2); range [0, 2].
inline double tv_distance(const RVector& p, const RVector& q) {
  require(p.size() == q.size(), ErrorKind::Validation,
          "distribution lengths differ (" + std::to_string(p.size()) + " vs " + std::to_string(q.size()) + ")");
  return (p - q).cwiseAbs().sum();
}

/// Mean of the given distributions, taken as P(1..T).
inline RVector time_average(const std::vector<RVector>& series) {
  require(!series.empty(), ErrorKind::Validation, "time average of an empty series");
  RVector acc = RVector::Zero(series.front().size());
  for (const auto& p : series) acc += p;
  return acc / static_cast<double>(series.size());
}

/// (1/T) integral of P over [t_0, t_last] by the trapezoid rule.
inline RVector time_average(const std::vector<double>& times, const std::vector<RVector>& series) {
  require(!series.empty() && times.size() == series.size(), ErrorKind::Validation, "time average needs matching samples");
  if (series.size() == 1) return series.front();
  RVector acc = RVector::Zero(series.front().size());
  for (std::size_t i = 1; i < series.size(); ++i) acc += 0.5 * (times[i] - times[i - 1]) * (series[i] + series[i - 1]);
  return acc / (times.back() - times.front());
}

/// Limiting distribution: uniform, restricted to the occupied parity class on
/// even cycles (walk started on an even vertex).
inline RVector uniform_reference(const Graph& g, std::size_t time_parity) {
  const auto n = static_cast<Eigen::Index>(g.vertex_count());
  if (g.kind() == GraphKind::Cycle && n % 2 == 0) {
    RVector p = RVector::Zero(n);
    for (Eigen::Index x = 0; x < n; ++x)
      if (static_cast<std::size_t>(x % 2) == time_parity % 2) p(x) = 2.0 / static_cast<double>(n);
    return p;
  }
  return RVector::Constant(n, 1.0 / static_cast<double>(n));
}

struct MixingResult {
  double epsilon = 0.0;
  double value = 0.0;    // last sampled time with TV >= epsilon (0 if none)
  double horizon = 0.0;  // last sampled time
  double margin = 4.0;
  bool converged = false;
  std::vector<double> below_times;  // sampled times with TV < epsilon
};

/// Mixing time from a sampled TV series. Converged when the horizon covers
/// margin * M and TV stays below epsilon for every later sample.
inline MixingResult mixing_time(const std::vector<double>& times, const std::vector<double>& tv, double epsilon,
                                double margin = 4.0) {
  require(!times.empty() && times.size() == tv.size(), ErrorKind::Validation, "mixing time needs a TV series");
  require(epsilon > 0.0, ErrorKind::Validation, "epsilon must be > 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    require(times[i] > times[i - 1], ErrorKind::Validation, "sample times must increase");
  MixingResult r;
  r.epsilon = epsilon;
  r.margin = margin;
  r.horizon = times.back();
  std::optional<std::size_t> last_above;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (tv[i] >= epsilon)
      last_above = i;
    else
      r.below_times.push_back(times[i]);
  }
  r.value = last_above ? times[*last_above] : 0.0;
  const bool tail_below = !last_above || *last_above + 1 < times.size();
  r.converged = tail_below && r.horizon >= margin * r.value;
  return r;
}

// ---------------------------------------------------------------------------
// Hitting

struct HittingResult {
  std::vector<double> r;           // first-arrival probability at t = 0..T (r[0] = 0)
  std::vector<double> unmeasured;  // probability at the target without absorption
  double cumulative = 0.0;
  std::optional<std::size_t> first_peak;
  double first_peak_value = 0.0;
  std::optional<std::size_t> one_shot;  // first T with unmeasured >= r0
  std::optional<std::size_t> concurrent;  // min T such that r(t) > r0 for some t < T
  double average = 0.0;  // sum t r(t) over the horizon
  bool average_truncated = true;
};

/// First local maximum of r over a +-2 window whose height is at least
/// `relative` times the global maximum. The window steps over the zeros that
/// parity forces on alternate steps.
inline std::optional<std::size_t> first_peak(const std::vector<double>& r, double relative = 0.2) {
  if (r.empty()) return std::nullopt;
  const double top = *std::max_element(r.begin(), r.end());
  if (top <= 0.0) return std::nullopt;
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (r[t] < relative * top) continue;
    const std::size_t lo = t >= 2 ? t - 2 : 0;
    const std::size_t hi = std::min(r.size() - 1, t + 2);
    bool is_max = true;
    for (std::size_t s = lo; s <= hi && is_max; ++s) is_max = r[s] <= r[t];
    if (is_max && t + 2 < r.size()) return t;
  }
  return std::nullopt;
}

inline void summarise_hitting(HittingResult& h, double r0) {
  h.cumulative = 0.0;
  h.average = 0.0;
  for (std::size_t t = 0; t < h.r.size(); ++t) {
    h.cumulative += h.r[t];
    h.average += static_cast<double>(t) * h.r[t];
  }
  require(h.cumulative <= 1.0 + 1e-10, ErrorKind::Contract, "first-arrival probabilities sum above one");
  h.average_truncated = h.cumulative < 1.0 - 1e-3;
  h.first_peak = first_peak(h.r);
  h.first_peak_value = h.first_peak ? h.r[*h.first_peak] : 0.0;
  h.concurrent.reset();
  for (std::size_t t = 0; t < h.r.size(); ++t)
    if (h.r[t] > r0) {
      h.concurrent = t + 1;
      break;
    }
  h.one_shot.reset();
  for (std::size_t t = 0; t < h.unmeasured.size(); ++t)
    if (h.unmeasured[t] >= r0) {
      h.one_shot = t;
      break;
    }
}

namespace detail {

inline void check_hitting_start(const Graph& g, const CVector& psi, std::size_t target) {
  require(target < g.vertex_count(), ErrorKind::Validation, "target vertex out of range");
  const auto d = static_cast<Eigen::Index>(g.max_degree());
  require(psi.segment(static_cast<Eigen::Index>(g.basis_index(target, 0)), d).squaredNorm() == 0.0, ErrorKind::Degenerate,
          "absorbing vertex equals the start vertex");
}

inline double take_target(CVector& psi, const Graph& g, std::size_t target) {
  const auto d = static_cast<Eigen::Index>(g.max_degree());
  auto seg = psi.segment(static_cast<Eigen::Index>(g.basis_index(target, 0)), d);
  const double arrived = seg.squaredNorm();
  seg.setZero();
  return arrived;
}

}  // namespace detail

/// Measured walk with an absorbing target, by pure-state unravelling.
///
/// Without extra noise one unnormalised pure branch is exact. With extra
/// noise r(t) and the unmeasured target probability are averaged over
/// trajectories (fixed blocks, reduced in order).
inline HittingResult measured_walk_run(const Graph& g, const WalkOperator& op, const WalkStatePure& initial,
                                       std::size_t target, std::size_t horizon, const NoiseSpec& extra, double r0,
                                       std::size_t trajectories, std::uint64_t seed, std::size_t threads) {
  detail::check_hitting_start(g, initial.amplitudes, target);
  detail::check_channel_supported(g, extra, false);
  const EventPlan plan(extra);
  const bool noisy = extra.channel != Channel::None;
  const std::size_t runs = noisy ? std::max<std::size_t>(trajectories, 1) : 1;
  const auto d = static_cast<Eigen::Index>(g.max_degree());
  const auto at = static_cast<Eigen::Index>(g.basis_index(target, 0));

  const auto one = [&](std::uint64_t k, std::vector<double>& r, std::vector<double>& free) {
    WalkStatePure absorbed = initial;
    WalkStatePure open = initial;
    for (std::size_t t = 1; t <= horizon; ++t) {
      // Even stream indices drive the absorbed branch, odd ones the free walk.
      open = trajectory_step(open, op, g, extra, plan, seed, 2 * k + 1, nullptr);
      free[t] += open.amplitudes.segment(at, d).squaredNorm();
      // A fully absorbed branch stays zero.
      if (absorbed.amplitudes.squaredNorm() == 0.0) continue;
      absorbed = trajectory_step(absorbed, op, g, extra, plan, seed, 2 * k, nullptr);
      r[t] += detail::take_target(absorbed.amplitudes, g, target);
    }
  };

  HittingResult h;
  h.r.assign(horizon + 1, 0.0);
  h.unmeasured.assign(horizon + 1, 0.0);
  h.unmeasured[0] = initial.amplitudes.segment(at, d).squaredNorm();
  constexpr std::size_t kBlock = 32;
  const std::size_t blocks = (runs + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> pr(blocks, std::vector<double>(horizon + 1, 0.0)), pf = pr;
  parallel_for(blocks, threads, [&](std::size_t b) {
    for (std::size_t k = b * kBlock; k < std::min(runs, (b + 1) * kBlock); ++k) one(k, pr[b], pf[b]);
  });
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t t = 1; t <= horizon; ++t) {
      h.r[t] += pr[b][t];
      h.unmeasured[t] += pf[b][t];
    }
  for (std::size_t t = 1; t <= horizon; ++t) {
    h.r[t] /= static_cast<double>(runs);
    h.unmeasured[t] /= static_cast<double>(runs);
  }
  summarise_hitting(h, r0);
  return h;
}

/// Exact density-matrix version of measured_walk_run (small graphs).
inline HittingResult measured_walk_density(const Graph& g, const WalkOperator& op, const WalkStatePure& initial,
                                           std::size_t target, std::size_t horizon, const NoiseSpec& extra, double r0) {
  detail::check_hitting_start(g, initial.amplitudes, target);
  detail::check_channel_supported(g, extra, true);
  const EventPlan plan(extra);
  const auto d = static_cast<Eigen::Index>(g.max_degree());
  const auto at = static_cast<Eigen::Index>(g.basis_index(target, 0));
  CMatrix absorbed = initial.amplitudes * initial.amplitudes.adjoint();
  CMatrix open = absorbed;
  HittingResult h;
  h.r.assign(horizon + 1, 0.0);
  h.unmeasured.assign(horizon + 1, 0.0);
  h.unmeasured[0] = open.block(at, at, d, d).trace().real();
  for (std::size_t t = 1; t <= horizon; ++t) {
    for (CMatrix* rho : {&absorbed, &open}) {
      op.conjugate(*rho);
      apply_channel(*rho, g, extra, plan.probability(t));
    }
    h.r[t] = absorbed.block(at, at, d, d).trace().real();
    absorbed.middleRows(at, d).setZero();
    absorbed.middleCols(at, d).setZero();
    h.unmeasured[t] = open.block(at, at, d, d).trace().real();
  }
  summarise_hitting(h, r0);
  return h;
}

/// Least-squares fit of ln h = ln h0 - s p; returns (h0, s).
inline std::pair<double, double> fit_exponential_decay(const std::vector<double>& p, const std::vector<double>& h) {
  require(p.size() == h.size() && p.size() >= 2, ErrorKind::Validation, "decay fit needs at least two points");
  double sp = 0, sy = 0, spp = 0, spy = 0;
  const auto n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(h[i] > 0.0, ErrorKind::Degenerate, "decay fit needs positive heights");
    const double y = std::log(h[i]);
    sp += p[i];
    sy += y;
    spp += p[i] * p[i];
    spy += p[i] * y;
  }
  const double denom = n * spp - sp * sp;
  require(denom > 0.0, ErrorKind::Degenerate, "decay fit needs distinct rates");
  const double slope = (n * spy - sp * sy) / denom;
  const double intercept = (sy - slope * sp) / n;
  return {std::exp(intercept), -slope};
}

// ---------------------------------------------------------------------------
// Periodicity

/// Smallest Omega <= horizon with |<psi0|U^Omega psi0>|^2 > 1 - tol.
inline std::optional<std::size_t> find_period(const WalkOperator& op, const CVector& psi0, std::size_t horizon,
                                              double tol = 1e-10) {
  CVector psi = psi0;
  CVector next(psi.size());
  for (std::size_t t = 1; t <= horizon; ++t) {
    op.apply(psi.data(), next.data());
    std::swap(psi, next);
    if (std::norm(psi0.dot(psi)) > 1.0 - tol) return t;
  }
  return std::nullopt;
}

struct PeriodHit {
  double eta = 0.0;
  double delta = 0.0;
  std::size_t period = 0;
};

/// Biased-coin walks on the N-cycle from |0, port 0> that return within the horizon.
inline std::vector<PeriodHit> periodicity_search(std::size_t n, const std::vector<double>& eta_grid,
                                                 const std::vector<double>& delta_grid, std::size_t horizon,
                                                 double tol = 1e-10) {
  const Graph g = build_cycle(n);
  const WalkStatePure start = localized_state(g, 0, port_vector(2, 0));
  std::vector<PeriodHit> hits;
  for (double eta : eta_grid)
    for (double delta : delta_grid) {
      CoinSpec coin;
      coin.base = coins::Biased{eta, delta};
      const WalkOperator op(g, coin);
      if (auto period = find_period(op, start.amplitudes, horizon, tol)) hits.push_back({eta, delta, *period});
    }
  return hits;
}

// ---------------------------------------------------------------------------
// Top hat

/// Uniform distribution over sites with |x| <= T/sqrt(2) and x = T (mod 2),
/// normalised over exactly those sites.
inline RVector ideal_top_hat(const Graph& line, std::size_t steps) {
  const double edge = static_cast<double>(steps) / std::sqrt(2.0);
  RVector p = RVector::Zero(static_cast<Eigen::Index>(line.vertex_count()));
  std::size_t count = 0;
  for (std::size_t i = 0; i < line.vertex_count(); ++i) {
    const std::int64_t x = line.label(i);
    if (std::abs(static_cast<double>(x)) <= edge && (x - static_cast<std::int64_t>(steps)) % 2 == 0) {
      p(static_cast<Eigen::Index>(i)) = 1.0;
      ++count;
    }
  }
  require(count > 0, ErrorKind::Degenerate, "empty top hat");
  return p / static_cast<double>(count);
}

struct TopHatFit {
  double p_star = 0.0;
  double tv_star = 0.0;
  std::vector<std::pair<double, double>> curve;  // (p, TV) for every evaluated rate, sorted by p
};

/// Position distribution at T under a per-step channel, in density form.
inline RVector noisy_line_distribution(const Graph& line, const WalkOperator& op, const CVector& coin0, const NoiseSpec& noise,
                                       std::size_t steps) {
  WalkStateDensity s = to_density(localized_state(line, line.vertex_at(0), coin0));
  evolve_density(s, op, line, noise, steps, [](std::size_t, const CMatrix&) {});
  return position_distribution(line, s.rho);
}

/// Rate minimising TV to the ideal top hat at time T; the coarse grid is
/// refined once with nine points spanning the two intervals around its minimum.
inline TopHatFit top_hat_fit(const Graph& line, const WalkOperator& op, const CVector& coin0, NoiseSpec noise,
                             std::size_t steps, std::vector<double> p_grid, std::size_t threads) {
  require(p_grid.size() >= 2, ErrorKind::Validation, "top-hat fit needs a grid of at least two rates");
  std::sort(p_grid.begin(), p_grid.end());
  const RVector ideal = ideal_top_hat(line, steps);
  const auto evaluate = [&](const std::vector<double>& rates) {
    std::vector<double> tv(rates.size());
    parallel_for(rates.size(), threads, [&](std::size_t i) {
      NoiseSpec n = noise;
      n.rate = rates[i];
      tv[i] = tv_distance(noisy_line_distribution(line, op, coin0, n, steps), ideal);
    });
    return tv;
  };
  TopHatFit fit;
  const auto coarse = evaluate(p_grid);
  for (std::size_t i = 0; i < p_grid.size(); ++i) fit.curve.emplace_back(p_grid[i], coarse[i]);
  const auto best = static_cast<std::size_t>(std::min_element(coarse.begin(), coarse.end()) - coarse.begin());
  const double lo = p_grid[best > 0 ? best - 1 : best];
  const double hi = p_grid[std::min(best + 1, p_grid.size() - 1)];
  std::vector<double> fine;
  for (int k = 1; k < 10; ++k) {
    const double p = lo + (hi - lo) * k / 10.0;
    if (std::abs(p - p_grid[best]) > 1e-12 * std::max(1.0, hi)) fine.push_back(p);
  }
  const auto refined = evaluate(fine);
  for (std::size_t i = 0; i < fine.size(); ++i) fit.curve.emplace_back(fine[i], refined[i]);
  std::sort(fit.curve.begin(), fit.curve.end());
  const auto min_it = std::min_element(fit.curve.begin(), fit.curve.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
  fit.p_star = min_it->first;
  fit.tv_star = min_it->second;
  return fit;
}

}  // namespace qwalk
