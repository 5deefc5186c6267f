#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qwalk/coin.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/graphs.hpp"
#include "qwalk/noise.hpp"
#include "qwalk/parallel.hpp"
#include "qwalk/rng.hpp"
#include "qwalk/types.hpp"

namespace qwalk {

/// CoinKept: (x, c) -> (neighbour through c, c). PortSwap: (x, c) -> partner port.
enum class ShiftConvention { CoinKept, PortSwap };

inline ShiftConvention default_shift(const Graph& g) {
  switch (g.kind()) {
    case GraphKind::Line:
    case GraphKind::Cycle:
    case GraphKind::Hypercube: return ShiftConvention::CoinKept;
    default: return ShiftConvention::PortSwap;
  }
}

/// Basis index that (x, c) is moved to, or Graph::kNone for an unused port.
inline std::size_t shift_target(const Graph& g, ShiftConvention conv, std::size_t x, std::size_t c) {
  const auto p = g.partner(x, c);
  if (!p) return Graph::kNone;
  return conv == ShiftConvention::CoinKept ? g.basis_index(p->vertex, c) : g.basis_index(p->vertex, p->port);
}

struct WalkStatePure {
  CVector amplitudes;
  std::size_t time = 0;
};

struct WalkStateDensity {
  CMatrix rho;
  std::size_t time = 0;
};

/// (|0> + i|1>)/sqrt(2); gives a mirror-symmetric Hadamard walk on the line.
inline CVector symmetric_coin() {
  CVector c(2);
  c << std::sqrt(0.5), cplx(0.0, std::sqrt(0.5));
  return c;
}

inline CVector port_vector(std::size_t d, std::size_t port) {
  CVector c = CVector::Zero(static_cast<Eigen::Index>(d));
  c(static_cast<Eigen::Index>(port)) = 1.0;
  return c;
}

inline WalkStatePure localized_state(const Graph& g, std::size_t vertex, const CVector& coin) {
  require(vertex < g.vertex_count(), ErrorKind::Validation, "initial vertex out of range");
  require(static_cast<std::size_t>(coin.size()) == g.max_degree(), ErrorKind::Validation,
          "initial coin dimension does not match graph degree");
  WalkStatePure s;
  s.amplitudes = CVector::Zero(static_cast<Eigen::Index>(g.basis_size()));
  s.amplitudes.segment(static_cast<Eigen::Index>(g.basis_index(vertex, 0)), coin.size()) = coin / coin.norm();
  return s;
}

inline WalkStatePure uniform_state(const Graph& g) {
  WalkStatePure s;
  s.amplitudes = CVector::Zero(static_cast<Eigen::Index>(g.basis_size()));
  std::size_t used = 0;
  for (std::size_t x = 0; x < g.vertex_count(); ++x) used += g.degree(x);
  const double a = 1.0 / std::sqrt(static_cast<double>(used));
  for (std::size_t x = 0; x < g.vertex_count(); ++x)
    for (std::size_t c = 0; c < g.max_degree(); ++c)
      if (g.port_used(x, c)) s.amplitudes(static_cast<Eigen::Index>(g.basis_index(x, c))) = a;
  return s;
}

inline WalkStateDensity to_density(const WalkStatePure& s) {
  return WalkStateDensity{s.amplitudes * s.amplitudes.adjoint(), s.time};
}

inline RVector position_distribution(const Graph& g, const CVector& psi) {
  const std::size_t d = g.max_degree();
  RVector p(static_cast<Eigen::Index>(g.vertex_count()));
  for (std::size_t x = 0; x < g.vertex_count(); ++x)
    p(static_cast<Eigen::Index>(x)) = psi.segment(static_cast<Eigen::Index>(x * d), static_cast<Eigen::Index>(d)).squaredNorm();
  return p;
}

inline RVector position_distribution(const Graph& g, const CMatrix& rho) {
  const std::size_t d = g.max_degree();
  RVector p = RVector::Zero(static_cast<Eigen::Index>(g.vertex_count()));
  for (std::size_t x = 0; x < g.vertex_count(); ++x)
    for (std::size_t c = 0; c < d; ++c) {
      const auto i = static_cast<Eigen::Index>(x * d + c);
      p(static_cast<Eigen::Index>(x)) += rho(i, i).real();
    }
  return p;
}

/// Throws a contract error unless rho is Hermitian with unit trace (and,
/// optionally, numerically positive semidefinite).
inline void check_density(const CMatrix& rho, double tol, bool check_spectrum = false) {
  const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  require(herm < tol, ErrorKind::Contract, "density matrix lost Hermiticity (" + std::to_string(herm) + ")");
  const double trace_err = std::abs(rho.trace() - cplx(1.0, 0.0));
  require(trace_err < tol, ErrorKind::Contract, "density matrix trace drifted by " + std::to_string(trace_err));
  if (check_spectrum) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-8, ErrorKind::Contract, "density matrix has a negative eigenvalue");
  }
}

/// One step U = S C of a coined walk, stored as per-vertex coin blocks plus a shift table.
class WalkOperator {
 public:
  WalkOperator(const Graph& g, const CoinSpec& coin) : WalkOperator(g, coin, default_shift(g)) {}

  WalkOperator(const Graph& g, const CoinSpec& coin, ShiftConvention conv)
      : n_(g.vertex_count()), d_(g.max_degree()), conv_(conv) {
    build_targets(g);
    const bool uniform = coin.per_vertex.empty() && regular(g);
    if (uniform) {
      store_block(coin_block(coin, g, 0));
    } else {
      blocks_.reserve(n_ * d_ * d_);
      for (std::size_t x = 0; x < n_; ++x) store_block(coin_block(coin, g, x));
    }
  }

  /// Same coin matrix at every vertex.
  WalkOperator(const Graph& g, const CMatrix& coin, ShiftConvention conv)
      : n_(g.vertex_count()), d_(g.max_degree()), conv_(conv) {
    require(static_cast<std::size_t>(coin.rows()) == d_ && coin.rows() == coin.cols(), ErrorKind::Validation,
            "coin dimension does not match graph degree");
    build_targets(g);
    store_block(coin);
  }

  [[nodiscard]] std::size_t dimension() const noexcept { return n_ * d_; }
  [[nodiscard]] std::size_t degree() const noexcept { return d_; }
  [[nodiscard]] ShiftConvention convention() const noexcept { return conv_; }
  [[nodiscard]] const std::vector<std::size_t>& targets() const noexcept { return targets_; }

  /// out = U in. `out` must not alias `in`.
  void apply(const cplx* in, cplx* out) const { apply_with(in, out, nullptr); }

  /// out = S C' in for a uniform replacement coin C' (d x d, row-major).
  void apply_with(const cplx* in, cplx* out, const cplx* coin_override) const {
    std::fill(out, out + static_cast<std::ptrdiff_t>(dimension()), cplx{});
    std::vector<cplx> tmp(d_);
    for (std::size_t x = 0; x < n_; ++x) {
      const cplx* seg = in + x * d_;
      bool any = false;
      for (std::size_t c = 0; c < d_; ++c) any = any || seg[c] != cplx{};
      if (!any) continue;
      const cplx* b = coin_override ? coin_override : block(x);
      for (std::size_t r = 0; r < d_; ++r) {
        cplx acc{};
        for (std::size_t k = 0; k < d_; ++k) acc += b[r * d_ + k] * seg[k];
        tmp[r] = acc;
      }
      for (std::size_t r = 0; r < d_; ++r) {
        const std::size_t t = targets_[x * d_ + r];
        if (t == Graph::kNone) {
          require(tmp[r] == cplx{}, ErrorKind::Contract,
                  "amplitude on unused port " + std::to_string(r) + " at vertex " + std::to_string(x));
          continue;
        }
        out[t] = tmp[r];
      }
    }
  }

  [[nodiscard]] CVector apply(const CVector& in) const {
    CVector out(in.size());
    apply(in.data(), out.data());
    return out;
  }

  /// rho <- U rho U^dagger.
  void conjugate(CMatrix& rho) const {
    const auto n = rho.rows();
    CMatrix m(n, n);
    for (Eigen::Index j = 0; j < n; ++j) apply(rho.col(j).data(), m.col(j).data());
    CMatrix mt = m.adjoint();
    for (Eigen::Index j = 0; j < n; ++j) apply(mt.col(j).data(), m.col(j).data());
    rho = m.adjoint();
  }

  [[nodiscard]] CMatrix dense() const {
    const auto n = static_cast<Eigen::Index>(dimension());
    CMatrix u(n, n);
    CVector e = CVector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      e.setZero();
      e(j) = 1.0;
      u.col(j) = apply(e);
    }
    return u;
  }

 private:
  static bool regular(const Graph& g) {
    if (g.kind() == GraphKind::Line || g.kind() == GraphKind::Cycle || g.kind() == GraphKind::Hypercube) return true;
    for (std::size_t x = 0; x < g.vertex_count(); ++x)
      if (g.degree(x) != g.max_degree()) return false;
    return true;
  }

  void build_targets(const Graph& g) {
    targets_.resize(n_ * d_);
    for (std::size_t x = 0; x < n_; ++x)
      for (std::size_t c = 0; c < d_; ++c) targets_[x * d_ + c] = shift_target(g, conv_, x, c);
  }

  void store_block(const CMatrix& b) {
    for (std::size_t r = 0; r < d_; ++r)
      for (std::size_t k = 0; k < d_; ++k) blocks_.push_back(b(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
  }

  [[nodiscard]] const cplx* block(std::size_t x) const {
    return blocks_.size() == d_ * d_ ? blocks_.data() : blocks_.data() + x * d_ * d_;
  }

  std::size_t n_;
  std::size_t d_;
  ShiftConvention conv_;
  std::vector<std::size_t> targets_;
  std::vector<cplx> blocks_;
};

/// Applies the shift alone.
inline WalkStatePure shift_apply(const WalkStatePure& s, const Graph& g, ShiftConvention conv) {
  WalkOperator shift(g, CMatrix::Identity(static_cast<Eigen::Index>(g.max_degree()), static_cast<Eigen::Index>(g.max_degree())), conv);
  return WalkStatePure{shift.apply(s.amplitudes), s.time};
}

inline WalkStatePure shift_apply(const WalkStatePure& s, const Graph& g) { return shift_apply(s, g, default_shift(g)); }

inline WalkStatePure step_pure(const WalkStatePure& s, const WalkOperator& op) {
  return WalkStatePure{op.apply(s.amplitudes), s.time + 1};
}

inline WalkStatePure step_pure(const WalkStatePure& s, const CoinSpec& coin, const Graph& g) {
  return step_pure(s, WalkOperator(g, coin));
}

namespace detail {

inline CMatrix sigma_y_basis() {
  CMatrix v(2, 2);
  const double h = std::sqrt(0.5);
  v << h, h, cplx(0, h), cplx(0, -h);
  return v;
}

// rho <- (I (x) V^dagger) rho (I (x) V) when forward, the inverse otherwise.
inline void rotate_coin_frame(CMatrix& rho, std::size_t d, bool forward) {
  const CMatrix v = sigma_y_basis();
  const CMatrix left = forward ? CMatrix(v.adjoint()) : v;
  const auto n = rho.rows();
  const auto dd = static_cast<Eigen::Index>(d);
  for (Eigen::Index x = 0; x < n; x += dd) rho.middleRows(x, dd) = left * rho.middleRows(x, dd);
  for (Eigen::Index x = 0; x < n; x += dd) rho.middleCols(x, dd) = rho.middleCols(x, dd) * left.adjoint();
}

inline void check_channel_supported(const Graph& g, const NoiseSpec& noise, bool density_mode) {
  noise.validate();
  const std::size_t d = g.max_degree();
  switch (noise.channel) {
    case Channel::CoinDephase:
      require(d == 2, ErrorKind::Unsupported, "coin_dephase needs a two-state coin");
      require(density_mode, ErrorKind::Unsupported,
              "coin_dephase has non-orthogonal Kraus branches; run it in density mode");
      break;
    case Channel::MeasureCoin:
      if (noise.coin_basis == CoinBasis::SigmaY)
        require(d == 2, ErrorKind::Unsupported, "sigma_y coin measurement needs a two-state coin");
      break;
    case Channel::BrokenLinks:
      require(g.kind() == GraphKind::Line || g.kind() == GraphKind::Cycle, ErrorKind::Unsupported,
              "broken_links is defined on lines and cycles only");
      require(!density_mode, ErrorKind::Unsupported, "broken_links runs in trajectory mode only");
      break;
    case Channel::ImperfectCoin:
      require(d == 2, ErrorKind::Unsupported, "imperfect_coin needs a two-state coin");
      require(!density_mode, ErrorKind::Unsupported, "imperfect_coin runs in trajectory mode only");
      break;
    case Channel::MultiCoin:
      fail(ErrorKind::Unsupported, "multi_coin is not a per-step channel; use multi_coin_evolve");
    default: break;
  }
}

}  // namespace detail

/// rho <- (1 - p) rho + p * sum_j P_j rho P_j for the projective and dephasing channels.
inline void apply_channel(CMatrix& rho, const Graph& g, const NoiseSpec& noise, double p) {
  if (p == 0.0 || noise.channel == Channel::None) return;
  const std::size_t d = g.max_degree();
  const auto n = rho.rows();
  const bool rotated = noise.channel == Channel::MeasureCoin && noise.coin_basis == CoinBasis::SigmaY;
  if (rotated) detail::rotate_coin_frame(rho, d, true);
  double off = 1.0 - p;  // factor on entries the projection removes
  if (noise.channel == Channel::CoinDephase) off = 1.0 - p + p * std::cos(2.0 * noise.theta);
  const auto dd = static_cast<Eigen::Index>(d);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      bool keep = true;
      switch (noise.channel) {
        case Channel::MeasurePosition: keep = i / dd == j / dd; break;
        case Channel::MeasureCoin:
        case Channel::CoinDephase: keep = i % dd == j % dd; break;
        case Channel::MeasureBoth: keep = i == j; break;
        default: fail(ErrorKind::Unsupported, std::string("channel ") + to_string(noise.channel) + " has no density form");
      }
      if (!keep) rho(i, j) *= off;
    }
  }
  if (rotated) detail::rotate_coin_frame(rho, d, false);
}

/// One noisy step in density form: unitary conjugation, then the channel with
/// the event probability scheduled for step number `step` (1-based).
inline WalkStateDensity step_density_noisy(const WalkStateDensity& s, const WalkOperator& op, const Graph& g,
                                           const NoiseSpec& noise, const EventPlan& plan) {
  detail::check_channel_supported(g, noise, true);
  WalkStateDensity out{s.rho, s.time + 1};
  op.conjugate(out.rho);
  apply_channel(out.rho, g, noise, plan.probability(out.time));
  return out;
}

inline WalkStateDensity step_density_noisy(const WalkStateDensity& s, const CoinSpec& coin, const Graph& g,
                                           const NoiseSpec& noise) {
  return step_density_noisy(s, WalkOperator(g, coin), g, noise, EventPlan(noise));
}

inline WalkStateDensity coin_dephase_step(const WalkStateDensity& s, const CoinSpec& coin, const Graph& g, double theta) {
  NoiseSpec noise;
  noise.channel = Channel::CoinDephase;
  noise.rate = 1.0;
  noise.theta = theta;
  return step_density_noisy(s, coin, g, noise);
}

/// Runs `steps` density steps; observer(t, rho) sees every state including t = start.
template <typename Observer>
void evolve_density(WalkStateDensity& s, const WalkOperator& op, const Graph& g, const NoiseSpec& noise, std::size_t steps,
                    Observer&& observer) {
  detail::check_channel_supported(g, noise, true);
  const EventPlan plan(noise);
  observer(s.time, s.rho);
  for (std::size_t i = 0; i < steps; ++i) {
    s = step_density_noisy(s, op, g, noise, plan);
    observer(s.time, s.rho);
  }
}

struct MeasurementEvent {
  std::size_t step = 0;
  std::size_t outcome = 0;  // vertex, coin label, or basis index depending on the channel
  friend bool operator==(const MeasurementEvent&, const MeasurementEvent&) = default;
};

namespace detail {

// Born-rule sample of the measurement implied by `channel`; collapses psi while
// keeping its norm (trajectories may carry an unnormalised survival amplitude).
inline std::size_t measure_collapse(CVector& psi, std::size_t d, const NoiseSpec& noise, CounterRng& rng) {
  const auto n = psi.size();
  const auto dd = static_cast<Eigen::Index>(d);
  const double norm2 = psi.squaredNorm();
  require(norm2 > 0.0, ErrorKind::Degenerate, "measurement on a zero state");
  const bool rotated = noise.channel == Channel::MeasureCoin && noise.coin_basis == CoinBasis::SigmaY;
  const CMatrix v = sigma_y_basis();
  if (rotated)
    for (Eigen::Index x = 0; x < n; x += dd) psi.segment(x, dd) = v.adjoint() * psi.segment(x, dd);

  const auto outcome_of = [&](Eigen::Index i) -> std::size_t {
    switch (noise.channel) {
      case Channel::MeasurePosition: return static_cast<std::size_t>(i / dd);
      case Channel::MeasureCoin: return static_cast<std::size_t>(i % dd);
      default: return static_cast<std::size_t>(i);
    }
  };
  const std::size_t outcomes = noise.channel == Channel::MeasurePosition ? static_cast<std::size_t>(n / dd)
                               : noise.channel == Channel::MeasureCoin   ? d
                                                                         : static_cast<std::size_t>(n);
  std::vector<double> weight(outcomes, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) weight[outcome_of(i)] += std::norm(psi(i));
  double u = rng.uniform() * norm2;
  std::size_t pick = outcomes;
  for (std::size_t k = 0; k < outcomes; ++k) {
    if (weight[k] <= 0.0) continue;
    pick = k;
    if (u < weight[k]) break;
    u -= weight[k];
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (outcome_of(i) != pick) psi(i) = 0.0;
  psi *= std::sqrt(norm2 / weight[pick]);
  if (rotated)
    for (Eigen::Index x = 0; x < n; x += dd) psi.segment(x, dd) = v * psi.segment(x, dd);
  return pick;
}

}  // namespace detail

/// U with each edge broken independently with probability p_link; amplitude
/// crossing a broken edge stays put with its coin flipped. Line and cycle only.
inline WalkStatePure broken_links_step(const WalkStatePure& s, const WalkOperator& op, const Graph& g, double p_link,
                                       CounterRng& rng) {
  require(g.kind() == GraphKind::Line || g.kind() == GraphKind::Cycle, ErrorKind::Unsupported,
          "broken_links is defined on lines and cycles only");
  require(p_link >= 0.0 && p_link <= 1.0, ErrorKind::Validation, "noise.rate must lie in [0, 1]");
  const std::size_t n = g.vertex_count();
  // broken[x]: the edge leaving x through port 1.
  std::vector<char> broken(n, 0);
  for (std::size_t x = 0; x < n; ++x)
    if (g.port_used(x, 1)) broken[x] = rng.bernoulli(p_link) ? 1 : 0;
  // Coin first (shift with identity targets), then the modified shift.
  CVector coined(s.amplitudes.size());
  {
    WalkStatePure tmp = step_pure(s, op);
    // Undo the shift: tmp[target(x,c)] holds the post-coin amplitude of (x,c).
    const auto& targets = op.targets();
    for (std::size_t i = 0; i < targets.size(); ++i)
      coined(static_cast<Eigen::Index>(i)) = targets[i] == Graph::kNone ? cplx{} : tmp.amplitudes(static_cast<Eigen::Index>(targets[i]));
  }
  CVector out = CVector::Zero(s.amplitudes.size());
  const auto& targets = op.targets();
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t c = 0; c < 2; ++c) {
      const cplx a = coined(static_cast<Eigen::Index>(2 * x + c));
      if (a == cplx{}) continue;
      const auto nb = g.partner(x, c);
      const bool cut = nb && (c == 1 ? broken[x] : broken[nb->vertex]);
      if (cut)
        out(static_cast<Eigen::Index>(2 * x + (1 - c))) += a;
      else
        out(static_cast<Eigen::Index>(targets[2 * x + c])) += a;
    }
  }
  return WalkStatePure{out, s.time + 1};
}

/// S C(phi) with phi ~ Normal(pi/2, (sqrt(p) pi/4)^2) drawn once for the step.
inline WalkStatePure imperfect_coin_step(const WalkStatePure& s, const WalkOperator& shift_source, double p_spread,
                                         CounterRng& rng) {
  require(p_spread >= 0.0 && p_spread <= 1.0, ErrorKind::Validation, "noise.rate must lie in [0, 1]");
  require(shift_source.degree() == 2, ErrorKind::Unsupported, "imperfect_coin needs a two-state coin");
  const double phi = p_spread == 0.0 ? kPi / 2 : rng.normal(kPi / 2, std::sqrt(p_spread) * kPi / 4);
  const CMatrix c = rotation_coin(phi);
  const cplx row_major[4] = {c(0, 0), c(0, 1), c(1, 0), c(1, 1)};
  WalkStatePure out{CVector(s.amplitudes.size()), s.time + 1};
  shift_source.apply_with(s.amplitudes.data(), out.amplitudes.data(), row_major);
  return out;
}

/// One noisy trajectory step (step number = s.time + 1). Applies U (or its
/// stochastic replacement), then the scheduled measurement if it fires.
inline WalkStatePure trajectory_step(const WalkStatePure& s, const WalkOperator& op, const Graph& g, const NoiseSpec& noise,
                                     const EventPlan& plan, std::uint64_t seed, std::uint64_t trajectory,
                                     std::vector<MeasurementEvent>* record) {
  const std::size_t step = s.time + 1;
  CounterRng rng(seed, trajectory, step);
  WalkStatePure out;
  switch (noise.channel) {
    case Channel::BrokenLinks: out = broken_links_step(s, op, g, plan.probability(step), rng); break;
    case Channel::ImperfectCoin: out = imperfect_coin_step(s, op, plan.probability(step), rng); break;
    default: out = step_pure(s, op); break;
  }
  if (is_projective(noise.channel)) {
    const double p = plan.probability(step);
    if (p > 0.0 && rng.bernoulli(p)) {
      const std::size_t outcome = detail::measure_collapse(out.amplitudes, g.max_degree(), noise, rng);
      if (record) record->push_back({step, outcome});
    }
  }
  return out;
}

struct Trajectory {
  WalkStatePure state;
  std::vector<MeasurementEvent> record;
};

/// One unravelled trajectory of T steps; observer(t, psi) sees every state.
template <typename Observer>
Trajectory trajectory_sample(const WalkStatePure& initial, const WalkOperator& op, const Graph& g, const NoiseSpec& noise,
                             std::size_t steps, std::uint64_t seed, std::uint64_t trajectory, Observer&& observer) {
  detail::check_channel_supported(g, noise, false);
  const EventPlan plan(noise);
  Trajectory t{initial, {}};
  observer(t.state.time, t.state.amplitudes);
  for (std::size_t i = 0; i < steps; ++i) {
    t.state = trajectory_step(t.state, op, g, noise, plan, seed, trajectory, &t.record);
    observer(t.state.time, t.state.amplitudes);
  }
  return t;
}

inline Trajectory trajectory_sample(const WalkStatePure& initial, const WalkOperator& op, const Graph& g,
                                    const NoiseSpec& noise, std::size_t steps, std::uint64_t seed,
                                    std::uint64_t trajectory = 0) {
  return trajectory_sample(initial, op, g, noise, steps, seed, trajectory, [](std::size_t, const CVector&) {});
}

/// Mean position distribution over K trajectories at each requested time.
///
/// Trajectories are grouped in fixed blocks whose partial sums are added in
/// block order, so the result does not depend on the worker count.
inline std::vector<RVector> ensemble_distributions(const WalkStatePure& initial, const WalkOperator& op, const Graph& g,
                                                   const NoiseSpec& noise, std::size_t steps,
                                                   const std::vector<std::size_t>& times, std::size_t trajectories,
                                                   std::uint64_t seed, std::size_t threads) {
  require(trajectories >= 1, ErrorKind::Validation, "trajectories must be >= 1");
  detail::check_channel_supported(g, noise, false);
  constexpr std::size_t kBlock = 64;
  constexpr std::size_t kWave = 32;
  const auto nv = static_cast<Eigen::Index>(g.vertex_count());
  std::vector<std::ptrdiff_t> slot(steps + 1, -1);
  for (std::size_t k = 0; k < times.size(); ++k) {
    require(times[k] <= steps, ErrorKind::Validation, "sample time beyond horizon");
    slot[times[k]] = static_cast<std::ptrdiff_t>(k);
  }
  std::vector<RVector> total(times.size(), RVector::Zero(nv));
  const std::size_t blocks = (trajectories + kBlock - 1) / kBlock;
  for (std::size_t wave = 0; wave < blocks; wave += kWave) {
    const std::size_t count = std::min(kWave, blocks - wave);
    std::vector<std::vector<RVector>> partial(count, std::vector<RVector>(times.size(), RVector::Zero(nv)));
    parallel_for(count, threads, [&](std::size_t b) {
      const std::size_t first = (wave + b) * kBlock;
      const std::size_t last = std::min(trajectories, first + kBlock);
      for (std::size_t k = first; k < last; ++k) {
        trajectory_sample(initial, op, g, noise, steps, seed, k, [&](std::size_t t, const CVector& psi) {
          const std::size_t rel = t - initial.time;
          if (rel <= steps && slot[rel] >= 0) partial[b][static_cast<std::size_t>(slot[rel])] += position_distribution(g, psi);
        });
      }
    });
    for (std::size_t b = 0; b < count; ++b)
      for (std::size_t k = 0; k < times.size(); ++k) total[k] += partial[b][k];
  }
  for (auto& p : total) p /= static_cast<double>(trajectories);
  return total;
}

/// Hadamard walk on a line with M two-state coins used one per step, in cyclic
/// or seeded random order, all starting in `coin0`. Returns P(x, t) for
/// t = 0..T on the line's coordinates.
///
/// With M >= T in cyclic order every coin is used once, so each step sees a
/// fresh coin and the walk is the classical convolution with the coin's
/// post-flip weights; that case runs without the 2^M register.
inline std::vector<RVector> multi_coin_evolve(const Graph& line, std::size_t coins_m, std::size_t steps, bool random_order,
                                              std::uint64_t seed, const CVector& coin0,
                                              std::size_t max_amplitudes = std::size_t{1} << 26) {
  require(line.kind() == GraphKind::Line, ErrorKind::Unsupported, "multi_coin_evolve runs on a line");
  require(coins_m >= 1, ErrorKind::Validation, "noise.coins must be >= 1");
  require(coin0.size() == 2, ErrorKind::Validation, "multi-coin initial coin must be two-dimensional");
  require(steps <= line.halfwidth(), ErrorKind::Validation, "line window too small for the horizon");
  const auto nv = static_cast<Eigen::Index>(line.vertex_count());
  const auto origin = static_cast<Eigen::Index>(line.halfwidth());
  const CMatrix h = make_coin(coins::Hadamard{}, 2);
  const CVector c0 = coin0 / coin0.norm();
  std::vector<RVector> out;
  out.reserve(steps + 1);

  if (!random_order && coins_m >= steps) {
    const CVector flipped = h * c0;
    const double down = std::norm(flipped(0));
    const double up = std::norm(flipped(1));
    RVector p = RVector::Zero(nv);
    p(origin) = 1.0;
    out.push_back(p);
    for (std::size_t t = 0; t < steps; ++t) {
      RVector next = RVector::Zero(nv);
      for (Eigen::Index x = 0; x < nv; ++x) {
        if (p(x) == 0.0) continue;
        next(x - 1) += down * p(x);
        next(x + 1) += up * p(x);
      }
      p = next;
      out.push_back(p);
    }
    return out;
  }

  require(coins_m < 63 && (std::size_t{1} << coins_m) <= max_amplitudes / static_cast<std::size_t>(nv), ErrorKind::Size,
          "multi-coin register of " + std::to_string(coins_m) + " coins exceeds the memory guard");
  const std::size_t reg = std::size_t{1} << coins_m;
  // psi[x * reg + r], coin k is bit k of r (0 = step -1).
  CVector psi = CVector::Zero(static_cast<Eigen::Index>(static_cast<std::size_t>(nv) * reg));
  for (std::size_t r = 0; r < reg; ++r) {
    cplx a = 1.0;
    for (std::size_t k = 0; k < coins_m; ++k) a *= c0(static_cast<Eigen::Index>((r >> k) & 1U));
    psi(static_cast<Eigen::Index>(static_cast<std::size_t>(origin) * reg + r)) = a;
  }
  const auto distribution = [&] {
    RVector p = RVector::Zero(nv);
    for (Eigen::Index x = 0; x < nv; ++x)
      p(x) = psi.segment(x * static_cast<Eigen::Index>(reg), static_cast<Eigen::Index>(reg)).squaredNorm();
    return p;
  };
  out.push_back(distribution());
  CVector next(psi.size());
  for (std::size_t t = 0; t < steps; ++t) {
    std::size_t k = t % coins_m;
    if (random_order) {
      CounterRng rng(seed, 0x6d756c7469ULL, t + 1);
      k = static_cast<std::size_t>(rng.below(coins_m));
    }
    const std::size_t bit = std::size_t{1} << k;
    next.setZero();
    for (Eigen::Index x = 0; x < nv; ++x) {
      const auto base = static_cast<std::size_t>(x) * reg;
      for (std::size_t r = 0; r < reg; ++r) {
        if (r & bit) continue;
        const cplx a0 = psi(static_cast<Eigen::Index>(base + r));
        const cplx a1 = psi(static_cast<Eigen::Index>(base + (r | bit)));
        if (a0 == cplx{} && a1 == cplx{}) continue;
        require(x > 0 && x + 1 < nv, ErrorKind::Contract, "multi-coin walk reached the line boundary");
        const cplx b0 = h(0, 0) * a0 + h(0, 1) * a1;
        const cplx b1 = h(1, 0) * a0 + h(1, 1) * a1;
        next(static_cast<Eigen::Index>(base - reg + r)) = b0;
        next(static_cast<Eigen::Index>(base + reg + (r | bit))) = b1;
      }
    }
    std::swap(psi, next);
    out.push_back(distribution());
  }
  return out;
}

/// Coined search: Grover coin everywhere, -I at the marked vertex, uniform start.
/// Returns the marked-vertex probability for t = 0..T.
inline std::vector<double> search_evolve(const Graph& g, std::size_t marked, std::size_t steps) {
  require(marked < g.vertex_count(), ErrorKind::Validation, "marked vertex out of range");
  for (std::size_t x = 0; x < g.vertex_count(); ++x)
    require(g.degree(x) == g.max_degree(), ErrorKind::Unsupported, "search needs a regular graph");
  CoinSpec coin;
  coin.base = coins::Grover{};
  coin.per_vertex[marked] = coins::NegativeIdentity{};
  const WalkOperator op(g, coin);
  WalkStatePure s = uniform_state(g);
  const auto d = static_cast<Eigen::Index>(g.max_degree());
  const auto at = static_cast<Eigen::Index>(g.basis_index(marked, 0));
  std::vector<double> series;
  series.reserve(steps + 1);
  series.push_back(s.amplitudes.segment(at, d).squaredNorm());
  for (std::size_t t = 0; t < steps; ++t) {
    s = step_pure(s, op);
    series.push_back(s.amplitudes.segment(at, d).squaredNorm());
  }
  return series;
}

/// Exact first and second position moments of a noisy two-state walk on the
/// infinite line, for channels that act locally in position (None, the
/// measurement channels in the computational basis, CoinDephase).
///
/// With B_{x,x'} the 2x2 coin blocks of rho, the walker tracks
/// F_r = sum_x B_{x+r,x}, G_r = sum_x x B_{x+r,x}, H_r = sum_x x^2 B_{x+r,x};
/// then <x> = tr G_0 and <x^2> = tr H_0. Cost per step is linear in t.
class LineMomentPropagator {
 public:
  LineMomentPropagator(const CMatrix& coin, const CVector& coin0, const NoiseSpec& noise, std::size_t max_steps)
      : coin_(coin), noise_(noise), plan_(noise), reach_(2 * max_steps + 2) {
    require(coin.rows() == 2 && coin.cols() == 2, ErrorKind::Validation, "moment propagator needs a 2x2 coin");
    require(coin0.size() == 2, ErrorKind::Validation, "moment propagator needs a two-state initial coin");
    switch (noise.channel) {
      case Channel::None:
      case Channel::MeasurePosition:
      case Channel::MeasureBoth:
      case Channel::CoinDephase: break;
      case Channel::MeasureCoin:
        require(noise.coin_basis == CoinBasis::Computational, ErrorKind::Unsupported,
                "moment propagator supports computational-basis coin measurement only");
        break;
      default: fail(ErrorKind::Unsupported, std::string("moment propagator does not support ") + to_string(noise.channel));
    }
    const std::size_t len = 2 * reach_ + 1;
    f_.assign(len, Block::Zero());
    g_.assign(len, Block::Zero());
    h_.assign(len, Block::Zero());
    const CVector c = coin0 / coin0.norm();
    f_[reach_] = c * c.adjoint();
  }

  void step() {
    ++time_;
    require(2 * time_ < reach_, ErrorKind::Size, "moment propagator stepped past its horizon");
    const Block c = coin_;
    const Block cd = c.adjoint();
    const std::size_t len = f_.size();
    for (std::size_t i = 0; i < len; ++i) {
      f_[i] = c * f_[i] * cd;
      g_[i] = c * g_[i] * cd;
      h_[i] = c * h_[i] * cd;
    }
    std::vector<Block> f2(len, Block::Zero()), g2(len, Block::Zero()), h2(len, Block::Zero());
    constexpr int s[2] = {-1, 1};
    for (std::size_t i = 0; i < len; ++i) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const auto src = static_cast<std::ptrdiff_t>(i) + s[b] - s[a];
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          const auto j = static_cast<std::size_t>(src);
          const cplx fv = f_[j](a, b), gv = g_[j](a, b), hv = h_[j](a, b);
          const double sb = s[b];
          f2[i](a, b) = fv;
          g2[i](a, b) = gv + sb * fv;
          h2[i](a, b) = hv + 2.0 * sb * gv + sb * sb * fv;
        }
      }
    }
    f_.swap(f2);
    g_.swap(g2);
    h_.swap(h2);
    const double p = plan_.probability(time_);
    if (p == 0.0 || noise_.channel == Channel::None) return;
    const double off = noise_.channel == Channel::CoinDephase ? 1.0 - p + p * std::cos(2.0 * noise_.theta) : 1.0 - p;
    for (std::size_t i = 0; i < len; ++i) {
      const bool same_site = i == reach_;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          bool keep = true;
          switch (noise_.channel) {
            case Channel::MeasurePosition: keep = same_site; break;
            case Channel::MeasureCoin:
            case Channel::CoinDephase: keep = a == b; break;
            case Channel::MeasureBoth: keep = same_site && a == b; break;
            default: break;
          }
          if (!keep) {
            f_[i](a, b) *= off;
            g_[i](a, b) *= off;
            h_[i](a, b) *= off;
          }
        }
    }
  }

  [[nodiscard]] std::size_t time() const noexcept { return time_; }
  [[nodiscard]] double norm() const { return f_[reach_].trace().real(); }
  [[nodiscard]] double mean() const { return g_[reach_].trace().real(); }
  [[nodiscard]] double second_moment() const { return h_[reach_].trace().real(); }
  [[nodiscard]] double variance() const {
    const double m = mean();
    return second_moment() - m * m;
  }

 private:
  using Block = Eigen::Matrix2cd;
  Block coin_;
  NoiseSpec noise_;
  EventPlan plan_;
  std::size_t reach_;
  std::size_t time_ = 0;
  std::vector<Block> f_, g_, h_;
};

}  // namespace qwalk
