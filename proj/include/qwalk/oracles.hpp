#pragma once

// Closed-form reference values. Nothing here may call into the stepping or
// integration code of coined.hpp / ctqw.hpp: the two sides test each other.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qwalk/errors.hpp"
#include "qwalk/types.hpp"

namespace qwalk::oracles {

/// A reference value together with the parameter regime where it is meant to
/// hold. Out-of-regime inputs still evaluate; only the flag changes.
template <typename T>
struct Oracle {
  T value{};
  std::string regime;
  bool in_regime = true;
};

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

/// Asymptotic (|<x>|/T, <x^2>/T^2) of the Hadamard walk; both equal 1 - 1/sqrt(2).
inline Oracle<std::pair<double, double>> hadamard_moments(std::size_t steps) {
  const double a = 1.0 - kInvSqrt2;
  return {{a, a}, "asymptotic, T >> 1", steps >= 50};
}

// ---------------------------------------------------------------------------
// Bessel functions of the first kind, integer order

namespace detail {

// Power series; well conditioned while t^2/4 < order + 1.
inline double bessel_series(std::size_t order, double t) {
  const double half = 0.5 * t;
  const double nu = static_cast<double>(order);
  double term = std::exp(nu * std::log(half) - std::lgamma(nu + 1.0));
  double sum = term;
  const double q = -half * half;
  for (std::size_t k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * (nu + static_cast<double>(k)));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

}  // namespace detail

/// J_0(t) .. J_max(t) for t >= 0 by Miller's downward recurrence, normalised
/// with J_0^2 + 2 sum J_k^2 = 1. Orders with t^2/4 < k + 1 use the power series,
/// whose terms then shrink from the first one.
inline std::vector<double> bessel_j_table(std::size_t max_order, double t) {
  require(t >= 0.0 && std::isfinite(t), ErrorKind::Validation, "Bessel argument must be finite and >= 0");
  std::vector<double> out(max_order + 1, 0.0);
  if (t == 0.0) {
    out[0] = 1.0;
    return out;
  }
  const auto series_from = [t](std::size_t k) { return 0.25 * t * t < static_cast<double>(k) + 1.0; };
  if (series_from(0)) {
    for (std::size_t k = 0; k <= max_order; ++k) out[k] = detail::bessel_series(k, t);
    return out;
  }
  const double reach = std::max(static_cast<double>(max_order), t);
  auto start = static_cast<std::size_t>(reach + 30.0 + 2.0 * std::sqrt(40.0 * reach));
  start += start % 2;  // even start keeps the normalisation sum aligned
  // Entries are rescaled by 2^-800 whenever they grow past 1e200; level[k]
  // counts the rescales in force when j[k] was last touched.
  const double kScale = std::ldexp(1.0, -800);
  std::vector<double> j(start + 2, 0.0);
  std::vector<int> level(start + 2, 0);
  int rescales = 0;
  j[start] = 1e-300;
  for (std::size_t k = start; k >= 1; --k) {
    j[k - 1] = 2.0 * static_cast<double>(k) / t * j[k] - j[k + 1];
    level[k - 1] = rescales;
    if (std::abs(j[k - 1]) > 1e200) {
      j[k - 1] *= kScale;
      j[k] *= kScale;
      ++rescales;
      level[k - 1] = level[k] = rescales;
    }
  }
  // Value of entry k in the final scale.
  const auto scaled = [&](std::size_t k) {
    double v = j[k];
    for (int d = level[k]; d < rescales && v != 0.0; ++d) v *= kScale;
    return v;
  };
  // J_0^2 + 2 sum J_k^2 = 1 has no cancellation; the linear sum only fixes the sign.
  std::vector<double> v(start + 1);
  double peak = 0.0;
  for (std::size_t k = 0; k <= start; ++k) {
    v[k] = scaled(k);
    peak = std::max(peak, std::abs(v[k]));
  }
  double linear = v[0] / peak, squares = linear * linear;
  for (std::size_t k = 1; k <= start; ++k) {
    const double u = v[k] / peak;
    if (k % 2 == 0) linear += 2.0 * u;
    squares += 2.0 * u * u;
  }
  const double norm = std::copysign(peak * std::sqrt(squares), linear);
  int norm_exp = 0;
  const double norm_mant = std::frexp(norm, &norm_exp);
  for (std::size_t k = 0; k <= max_order; ++k) {
    if (series_from(k)) {
      out[k] = detail::bessel_series(k, t);
      continue;
    }
    int e = 0;
    const double m = std::frexp(j[k], &e);
    out[k] = std::ldexp(m / norm_mant, e - norm_exp - 800 * (rescales - level[k]));
  }
  return out;
}

inline double bessel_j(long order, double t) {
  const auto n = static_cast<std::size_t>(std::labs(order));
  const double v = bessel_j_table(n, t)[n];
  return (order < 0 && n % 2 == 1) ? -v : v;
}

/// Amplitude of the line CTQW at unit total hopping rate (gamma = 1/2) from
/// the origin: (-i)^|x| J_|x|(t).
inline cplx ctqw_line_amplitude(long x, double t) {
  const auto n = static_cast<std::size_t>(std::labs(x));
  static constexpr cplx kPhase[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  return kPhase[n % 4] * bessel_j(static_cast<long>(n), t);
}

// ---------------------------------------------------------------------------
// Decoherent walks on the line

/// Long-time growth rate of the variance under coin dephasing of strength theta.
inline Oracle<double> brun_dephase_variance_rate(double theta) {
  require(theta >= 0.0 && theta <= kPi / 4 + 1e-15, ErrorKind::Validation, "theta must lie in [0, pi/4]");
  const double s = std::sin(2.0 * theta);
  const double c = std::cos(2.0 * theta);
  const double value = theta == 0.0 ? INFINITY : (c * c + 1.0) / (s * s);
  return {value, "large t, theta != 0", theta > 0.0};
}

/// Ideal-walk width with its 1/T correction, sqrt(1 - 1/sqrt2) (T - 1/T).
inline double kendon_sigma_ideal(double steps) {
  require(steps > 0.0, ErrorKind::Validation, "T must be > 0");
  return std::sqrt(1.0 - kInvSqrt2) * (steps - 1.0 / steps);
}

/// First-order upper bound on the width under per-step measurement of both
/// position and coin with probability p.
inline Oracle<double> kendon_sigma_bound(double steps, double p) {
  require(p >= 0.0 && p <= 1.0, ErrorKind::Validation, "p must lie in [0, 1]");
  const double factor = 1.0 - p * steps / (6.0 * std::sqrt(2.0)) + p * kInvSqrt2 * (1.0 - kInvSqrt2);
  return {kendon_sigma_ideal(steps) * factor, "pT << 1, T >> 1", p * steps <= 0.1 && steps >= 20.0};
}

/// Coefficient of p in the bound factor, (1/sqrt2)(1 - 1/sqrt2).
inline double kendon_p_coefficient() { return kInvSqrt2 * (1.0 - kInvSqrt2); }

/// Width near the classical end, q = 1 - p.
inline Oracle<double> classical_end_sigma(double steps, double q) {
  require(steps > 0.0, ErrorKind::Validation, "T must be > 0");
  require(q >= 0.0 && q <= 1.0, ErrorKind::Validation, "q must lie in [0, 1]");
  return {std::sqrt(steps) * (1.0 + 0.5 * q * q * q * q), "q << 1, T >> 1", q <= 0.3 && steps >= 20.0};
}

/// Second moment of the pure Hadamard walk after four steps.
inline constexpr double kFourStepSecondMoment = 5.0;

// ---------------------------------------------------------------------------
// Dephased CTQW on the cycle (unit-normalised hopping, gamma = 1/4)

inline void check_cycle_args(std::size_t n, double p, double eps) {
  require(n >= 3, ErrorKind::Validation, "cycle size must be >= 3");
  require(p > 0.0 && std::isfinite(p), ErrorKind::Validation, "decoherence rate must be > 0");
  require(eps > 0.0 && eps < 2.0, ErrorKind::Validation, "epsilon must lie in (0, 2)");
}

inline Oracle<double> fedichkin_smallp_bound(std::size_t n, double p, double eps) {
  check_cycle_args(n, p, eps);
  const double nd = static_cast<double>(n);
  const double value = std::log(nd / eps) / p * (1.0 + 2.0 / (nd - 2.0));
  return {value, "pN << 1", p * nd <= 0.2};
}

/// (lower, upper) bracket on the mixing time for strong decoherence. The lower
/// prefactor is pN^2/pi^2.
inline Oracle<std::pair<double, double>> fedichkin_largep_bounds(std::size_t n, double p, double eps) {
  check_cycle_args(n, p, eps);
  const double nd = static_cast<double>(n);
  const double lower = p * nd * nd / (kPi * kPi) * std::log(2.0 / (nd * eps));
  const double upper = 0.5 * p * nd * nd * std::log((2.0 + eps) / eps);
  return {{lower, upper}, "p >> 1", p >= 5.0 && nd * eps < 2.0};
}

/// Lower bound on the time-averaged mixing time.
inline Oracle<double> fedichkin_timeavg_bound(std::size_t n, double p, double eps) {
  check_cycle_args(n, p, eps);
  const double nd = static_cast<double>(n);
  return {nd / (p * eps), "N >> 1, pN << 1, pT >> 1", nd >= 10.0 && p * nd <= 0.2};
}

// ---------------------------------------------------------------------------
// Dephased CTQW on the hypercube (energy k, decoherence p)

/// Single-coordinate probabilities (P[0], P[1]). Each damping regime is
/// evaluated with real arithmetic only.
inline Oracle<std::pair<double, double>> alagic_probs(std::size_t n, double k, double p, double t) {
  require(n >= 1, ErrorKind::Validation, "dimension must be >= 1");
  require(k > 0.0 && p >= 0.0 && t >= 0.0, ErrorKind::Validation, "need k > 0, p >= 0, t >= 0");
  const double s = t / (2.0 * static_cast<double>(n));
  const double disc = 16.0 * k * k - p * p;
  double osc = 0.0;
  if (disc > 0.0) {
    const double beta = std::sqrt(disc);
    osc = std::exp(-p * s) * (std::cos(beta * s) + p / beta * std::sin(beta * s));
  } else if (disc < 0.0) {
    // beta = i b: cos -> cosh, (p/beta) sin -> (p/b) sinh. Written with
    // decaying exponentials only.
    const double b = std::sqrt(-disc);
    const double fast = std::exp(-(p + b) * s);
    const double slow = std::exp(-(p - b) * s);
    osc = 0.5 * (slow + fast) + 0.5 * p / b * (slow - fast);
  } else {
    osc = std::exp(-p * s) * (1.0 + p * s);
  }
  const double p0 = 0.5 + 0.5 * osc;
  return {{p0, 0.5 - 0.5 * osc}, "exact", true};
}

/// Times at which every coordinate is exactly balanced (underdamped only).
inline double alagic_mixing_times(std::size_t n, double k, double p, std::size_t c) {
  require(p >= 0.0 && p < 4.0 * k, ErrorKind::Validation, "instantaneous mixing needs p < 4k");
  require(c >= 1, ErrorKind::Validation, "c must be a positive integer");
  const double arg = std::clamp(p * p / (8.0 * k * k) - 1.0, -1.0, 1.0);
  return static_cast<double>(n) * (2.0 * kPi * static_cast<double>(c) - std::acos(arg)) / std::sqrt(16.0 * k * k - p * p);
}

/// Local maxima of the opposite-corner probability and their heights.
inline std::pair<double, double> alagic_hitting(std::size_t n, double k, double p, std::size_t c) {
  require(p >= 0.0 && p < 4.0 * k, ErrorKind::Validation, "hitting peaks need p < 4k");
  const double beta = std::sqrt(16.0 * k * k - p * p);
  const double odd = static_cast<double>(2 * c + 1);
  const double time = 2.0 * kPi * static_cast<double>(n) * odd / beta;
  const double prob = std::pow(0.5 + 0.5 * std::exp(-p * kPi * odd / beta), static_cast<double>(n));
  return {time, prob};
}

// ---------------------------------------------------------------------------
// Search and classical references

/// Step count at which the coined hypercube search peaks, (pi/2) sqrt(N/2).
inline double search_peak_time(double vertices) {
  require(vertices >= 1.0, ErrorKind::Validation, "N must be >= 1");
  return 0.5 * kPi * std::sqrt(0.5 * vertices);
}

/// Classical walk after T unbiased steps, indexed by x + T for x in [-T, T].
inline RVector classical_binomial(std::size_t steps) {
  const auto t = static_cast<double>(steps);
  RVector p = RVector::Zero(static_cast<Eigen::Index>(2 * steps + 1));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double kd = static_cast<double>(k);
    const double logp = std::lgamma(t + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(t - kd + 1.0) - t * std::log(2.0);
    p(static_cast<Eigen::Index>(2 * k)) = std::exp(logp);
  }
  return p;
}

/// First-arrival probabilities at the opposite corner for the simple discrete
/// random walk on the n-cube, t = 0..T, from the Hamming-weight chain.
inline std::vector<double> classical_hypercube_first_arrival(std::size_t n, std::size_t steps) {
  require(n >= 1, ErrorKind::Validation, "dimension must be >= 1");
  std::vector<double> weight(n + 1, 0.0), next(n + 1);
  weight[0] = 1.0;
  std::vector<double> r(steps + 1, 0.0);
  const auto nd = static_cast<double>(n);
  for (std::size_t t = 1; t <= steps; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t w = 0; w < n; ++w) {
      next[w + 1] += weight[w] * (nd - static_cast<double>(w)) / nd;
      if (w > 0) next[w - 1] += weight[w] * static_cast<double>(w) / nd;
    }
    r[t] = next[n];
    next[n] = 0.0;
    std::swap(weight, next);
  }
  return r;
}

}  // namespace qwalk::oracles
