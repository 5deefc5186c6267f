#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Sparse>

#include "qwalk/errors.hpp"
#include "qwalk/graphs.hpp"
#include "qwalk/hash.hpp"
#include "qwalk/types.hpp"

namespace qwalk {

enum class HamiltonianVariant { Adjacency, Laplacian };

struct HamiltonianSpec {
  double gamma = 1.0;
  HamiltonianVariant variant = HamiltonianVariant::Adjacency;

  void validate() const {
    require(gamma > 0.0 && std::isfinite(gamma), ErrorKind::Validation, "hamiltonian.gamma must be > 0");
  }
};

/// Hypercube energy scale k = gamma * n.
inline double hypercube_energy(double gamma, std::size_t n) { return gamma * static_cast<double>(n); }

enum class CtqwNoiseModel { None, VertexProject, PerQubitDephase };

struct CtqwNoiseSpec {
  CtqwNoiseModel model = CtqwNoiseModel::None;
  double rate = 0.0;  // events per unit time; may exceed 1

  void validate(const Graph& g) const {
    require(rate >= 0.0 && std::isfinite(rate), ErrorKind::Validation, "noise.rate must be >= 0");
    if (model == CtqwNoiseModel::PerQubitDephase)
      require(g.kind() == GraphKind::Hypercube, ErrorKind::Unsupported, "per-qubit dephasing needs a hypercube");
  }
};

inline std::uint64_t graph_fingerprint(const Graph& g) {
  Fnv1a h;
  h.value(static_cast<int>(g.kind())).value(g.vertex_count()).value(g.max_degree());
  for (std::size_t x = 0; x < g.vertex_count(); ++x)
    for (std::size_t c = 0; c < g.max_degree(); ++c) {
      const auto p = g.partner(x, c);
      h.value(p ? p->vertex : Graph::kNone);
    }
  return h.digest();
}

inline RMatrix hamiltonian_matrix(const Graph& g, const HamiltonianSpec& spec) {
  spec.validate();
  RMatrix a = g.adjacency_matrix();
  if (spec.variant == HamiltonianVariant::Laplacian) a.diagonal() -= a.rowwise().sum();
  return spec.gamma * a;
}

inline Eigen::SparseMatrix<double> sparse_hamiltonian(const Graph& g, const HamiltonianSpec& spec) {
  spec.validate();
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t x = 0; x < g.vertex_count(); ++x) {
    const auto nb = g.neighbours(x);
    for (auto y : nb) entries.emplace_back(static_cast<int>(x), static_cast<int>(y), spec.gamma);
    if (spec.variant == HamiltonianVariant::Laplacian)
      entries.emplace_back(static_cast<int>(x), static_cast<int>(x), -spec.gamma * static_cast<double>(nb.size()));
  }
  const auto n = static_cast<Eigen::Index>(g.vertex_count());
  Eigen::SparseMatrix<double> h(n, n);
  h.setFromTriplets(entries.begin(), entries.end());
  return h;
}

/// Eigendecomposition H = V diag(lambda) V^T of a real symmetric generator.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const RMatrix& h) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(h);
    require(es.info() == Eigen::Success, ErrorKind::Contract, "eigendecomposition failed");
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }

  [[nodiscard]] const RVector& eigenvalues() const noexcept { return values_; }
  [[nodiscard]] const RMatrix& eigenvectors() const noexcept { return vectors_; }

  /// exp(-i H t) psi.
  [[nodiscard]] CVector evolve(const CVector& psi, double t) const {
    require(psi.size() == values_.size(), ErrorKind::Validation, "state dimension does not match Hamiltonian");
    CVector coeff = vectors_.transpose().cast<cplx>() * psi;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) coeff(k) *= std::polar(1.0, -values_(k) * t);
    return vectors_.cast<cplx>() * coeff;
  }

  /// exp(-i H t) as a dense matrix.
  [[nodiscard]] CMatrix unitary(double t) const {
    CVector phase(values_.size());
    for (Eigen::Index k = 0; k < phase.size(); ++k) phase(k) = std::polar(1.0, -values_(k) * t);
    const CMatrix v = vectors_.cast<cplx>();
    return v * phase.asDiagonal() * v.transpose();
  }

  /// exp(G t) p for the real generator G held by this decomposition.
  [[nodiscard]] RVector diffuse(const RVector& p, double t) const {
    RVector coeff = vectors_.transpose() * p;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) coeff(k) *= std::exp(values_(k) * t);
    return vectors_ * coeff;
  }

 private:
  RVector values_;
  RMatrix vectors_;
};

/// Process-wide cache of decompositions keyed by (graph, variant, gamma).
inline std::shared_ptr<const SpectralPropagator> spectral_propagator(const Graph& g, const HamiltonianSpec& spec) {
  using Key = std::tuple<std::uint64_t, int, std::uint64_t>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const SpectralPropagator>> cache;
  const Key key{graph_fingerprint(g), static_cast<int>(spec.variant), std::bit_cast<std::uint64_t>(spec.gamma)};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto prop = std::make_shared<const SpectralPropagator>(hamiltonian_matrix(g, spec));
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(prop)).first->second;
}

inline CVector evolve_ctqw_pure(const Graph& g, const HamiltonianSpec& spec, double t, const CVector& psi0) {
  require(t >= 0.0, ErrorKind::Validation, "time must be >= 0");
  require(static_cast<std::size_t>(psi0.size()) == g.vertex_count(), ErrorKind::Validation,
          "state dimension does not match graph");
  return spectral_propagator(g, spec)->evolve(psi0, t);
}

inline CVector vertex_state(const Graph& g, std::size_t vertex) {
  require(vertex < g.vertex_count(), ErrorKind::Validation, "vertex out of range");
  CVector psi = CVector::Zero(static_cast<Eigen::Index>(g.vertex_count()));
  psi(static_cast<Eigen::Index>(vertex)) = 1.0;
  return psi;
}

/// Classical continuous-time random walk dP/dt = gamma (A - D) P.
inline RVector classical_ctrw(const Graph& g, double gamma, double t, const RVector& p0) {
  const auto prop = spectral_propagator(g, HamiltonianSpec{gamma, HamiltonianVariant::Laplacian});
  RVector p = prop->diffuse(p0, t);
  return p.cwiseMax(0.0);
}

/// Entrywise decay rates R of the dephasing term: drho/dt = -i[H, rho] - R o rho.
inline RMatrix dephasing_rates(const Graph& g, const CtqwNoiseSpec& noise) {
  const auto n = static_cast<Eigen::Index>(g.vertex_count());
  RMatrix r = RMatrix::Zero(n, n);
  if (noise.model == CtqwNoiseModel::None || noise.rate == 0.0) return r;
  const double dim = noise.model == CtqwNoiseModel::PerQubitDephase ? static_cast<double>(g.dimension()) : 1.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const double w = noise.model == CtqwNoiseModel::PerQubitDephase
                           ? static_cast<double>(std::popcount(static_cast<std::uint64_t>(i ^ j))) / dim
                           : 1.0;
      r(i, j) = noise.rate * w;
    }
  return r;
}

struct StepControl {
  double initial_step = 0.0;  // 0: min(0.01, 0.1 / (gamma * d_max))
  double tolerance = 1e-8;    // TV change of the diagonal between successive halvings
  std::size_t max_halvings = 8;
};

namespace detail {

// phi_k(z) = sum_m z^m / (m + k)!, k = 0..3.
inline std::array<double, 4> phi_functions(double z) {
  std::array<double, 4> out{};
  if (std::abs(z) < 1.0) {
    for (int k = 0; k < 4; ++k) {
      double term = 1.0;
      for (int j = 2; j <= k; ++j) term /= j;
      double sum = 0.0;
      for (int m = 0; m < 25; ++m) {
        sum += term;
        term *= z / (m + k + 1);
      }
      out[static_cast<std::size_t>(k)] = sum;
    }
    return out;
  }
  const double e = std::exp(z);
  out[0] = e;
  out[1] = (e - 1.0) / z;
  out[2] = (e - 1.0 - z) / (z * z);
  out[3] = (e - 1.0 - z - z * z / 2.0) / (z * z * z);
  return out;
}

// Five-stage exponential Runge-Kutta scheme of stiff order four
// (Hochbruck-Ostermann) for u' = -R o u + N(u). The dephasing part is
// integrated exactly, and the order holds uniformly in the rate, so the
// Zeno regime needs no extra step refinement.
class ExpRk4 {
 public:
  ExpRk4(const Eigen::SparseMatrix<double>& h, const RMatrix& rates) : n_(h.rows()), rates_(rates), rows_(static_cast<std::size_t>(h.rows())) {
    for (Eigen::Index k = 0; k < h.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(h, k); it; ++it)
        rows_[static_cast<std::size_t>(it.row())].emplace_back(it.col(), it.value());
    const auto size = static_cast<std::size_t>(n_ * n_);
    for (auto* v : {&n1_, &n2_, &n3_, &n4_, &n5_, &s2_, &s3_, &s4_, &s5_}) v->resize(size);
  }

  void set_step(double step) {
    if (step == step_) return;
    step_ = step;
    coeff_.resize(static_cast<std::size_t>(n_ * n_));
    std::map<double, Coeff> memo;
    for (Eigen::Index j = 0; j < n_; ++j)
      for (Eigen::Index i = 0; i < n_; ++i) {
        const double r = rates_(i, j);
        auto it = memo.find(r);
        if (it == memo.end()) it = memo.emplace(r, coefficients(-r * step, step)).first;
        coeff_[static_cast<std::size_t>(i + j * n_)] = it->second;
      }
  }

  void step(CMatrix& m) {
    cplx* u = m.data();
    const auto size = static_cast<std::size_t>(n_ * n_);
    rhs(u, n1_.data());
    for (std::size_t k = 0; k < size; ++k) s2_[k] = coeff_[k].eh * u[k] + coeff_[k].a21 * n1_[k];
    rhs(s2_.data(), n2_.data());
    for (std::size_t k = 0; k < size; ++k) {
      const Coeff& c = coeff_[k];
      s3_[k] = c.eh * u[k] + c.a31 * n1_[k] + c.a32 * n2_[k];
    }
    rhs(s3_.data(), n3_.data());
    for (std::size_t k = 0; k < size; ++k) {
      const Coeff& c = coeff_[k];
      s4_[k] = c.e * u[k] + c.a41 * n1_[k] + c.a42 * (n2_[k] + n3_[k]);
    }
    rhs(s4_.data(), n4_.data());
    for (std::size_t k = 0; k < size; ++k) {
      const Coeff& c = coeff_[k];
      s5_[k] = c.eh * u[k] + c.a51 * n1_[k] + c.a52 * (n2_[k] + n3_[k]) + c.a54 * n4_[k];
    }
    rhs(s5_.data(), n5_.data());
    for (std::size_t k = 0; k < size; ++k) {
      const Coeff& c = coeff_[k];
      u[k] = c.e * u[k] + c.b1 * n1_[k] + c.b4 * n4_[k] + c.b5 * n5_[k];
    }
    // Re-symmetrise so rounding cannot build up an anti-Hermitian part.
    for (Eigen::Index j = 0; j < n_; ++j)
      for (Eigen::Index i = 0; i < j; ++i) {
        const cplx avg = 0.5 * (m(i, j) + std::conj(m(j, i)));
        m(i, j) = avg;
        m(j, i) = std::conj(avg);
      }
    for (Eigen::Index i = 0; i < n_; ++i) m(i, i) = m(i, i).real();
  }

 private:
  struct Coeff {
    double e, eh, a21, a31, a32, a41, a42, a51, a52, a54, b1, b4, b5;
  };

  static Coeff coefficients(double z, double h) {
    const auto f = phi_functions(z);
    const auto g = phi_functions(z / 2.0);
    Coeff c{};
    c.e = f[0];
    c.eh = g[0];
    c.a21 = h * 0.5 * g[1];
    c.a31 = h * (0.5 * g[1] - g[2]);
    c.a32 = h * g[2];
    c.a41 = h * (f[1] - 2.0 * f[2]);
    c.a42 = h * f[2];
    const double a52 = 0.5 * g[2] - f[3] + 0.25 * f[2] - 0.5 * g[3];
    const double a54 = 0.25 * g[2] - a52;
    c.a52 = h * a52;
    c.a54 = h * a54;
    c.a51 = h * (0.5 * g[1] - 2.0 * a52 - a54);
    c.b1 = h * (f[1] - 3.0 * f[2] + 4.0 * f[3]);
    c.b4 = h * (4.0 * f[3] - f[2]);
    c.b5 = h * (4.0 * f[2] - 8.0 * f[3]);
    return c;
  }

  // out = -i (H u - u H) for real symmetric sparse H, column-major n x n.
  void rhs(const cplx* u, cplx* out) const {
    for (Eigen::Index j = 0; j < n_; ++j) {
      const auto& rj = rows_[static_cast<std::size_t>(j)];
      const cplx* uj = u + j * n_;
      cplx* oj = out + j * n_;
      for (Eigen::Index i = 0; i < n_; ++i) {
        cplx acc{};
        for (const auto& [k, w] : rows_[static_cast<std::size_t>(i)]) acc += w * uj[k];
        for (const auto& [k, w] : rj) acc -= w * u[i + k * n_];
        oj[i] = cplx(acc.imag(), -acc.real());
      }
    }
  }

  Eigen::Index n_;
  RMatrix rates_;
  std::vector<std::vector<std::pair<Eigen::Index, double>>> rows_;
  double step_ = -1.0;
  std::vector<Coeff> coeff_;
  std::vector<cplx> n1_, n2_, n3_, n4_, n5_, s2_, s3_, s4_, s5_;
};

inline double diagonal_tv(const CMatrix& a, const CMatrix& b) {
  return (a.diagonal().real() - b.diagonal().real()).cwiseAbs().sum();
}

}  // namespace detail

/// Density states at each requested time (ascending, >= 0) under the master
/// equation. The fixed step is halved until the diagonals at every sample time
/// move by less than the tolerance in TV distance.
inline std::vector<CMatrix> evolve_master_series(const CMatrix& rho0, const Graph& g, const HamiltonianSpec& spec,
                                                 const CtqwNoiseSpec& noise, const std::vector<double>& times,
                                                 const StepControl& control = {}) {
  spec.validate();
  noise.validate(g);
  require(rho0.rows() == static_cast<Eigen::Index>(g.vertex_count()) && rho0.cols() == rho0.rows(),
          ErrorKind::Validation, "density dimension does not match graph");
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(times[i] >= 0.0, ErrorKind::Validation, "time must be >= 0");
    if (i > 0) require(times[i] > times[i - 1], ErrorKind::Validation, "sample times must increase");
  }
  const auto h = sparse_hamiltonian(g, spec);
  const RMatrix rates = dephasing_rates(g, noise);
  double step = control.initial_step > 0.0
                    ? control.initial_step
                    : std::min(0.01, 0.1 / (spec.gamma * static_cast<double>(std::max<std::size_t>(g.max_degree(), 1))));

  const auto run = [&](double hstep) {
    detail::ExpRk4 solver(h, rates);
    std::vector<CMatrix> out;
    out.reserve(times.size());
    CMatrix u = rho0;
    double now = 0.0;
    // Coherences relax on a 1/rate time scale right after t = 0; graded steps
    // starting there keep that layer from costing an O(h) error.
    const double layer = rates.size() ? 1.0 / std::max(rates.maxCoeff(), 1e-300) : hstep;
    for (double sub = std::min(hstep, layer); sub < hstep && !times.empty() && now + sub <= times.front(); sub *= 2.0) {
      solver.set_step(sub);
      solver.step(u);
      now += sub;
    }
    for (double target : times) {
      const double span = target - now;
      if (span > 0.0) {
        const auto n = static_cast<std::size_t>(std::ceil(span / hstep - 1e-9));
        solver.set_step(span / static_cast<double>(n));
        for (std::size_t k = 0; k < n; ++k) solver.step(u);
      }
      now = target;
      for (Eigen::Index i = 0; i < u.size(); ++i)
        require(std::isfinite(u.data()[i].real()) && std::isfinite(u.data()[i].imag()), ErrorKind::Contract,
                "non-finite density entry during integration");
      out.push_back(u);
    }
    return out;
  };

  std::vector<CMatrix> coarse = run(step);
  double residual = 0.0;
  for (std::size_t halving = 0; halving < control.max_halvings; ++halving) {
    step /= 2.0;
    std::vector<CMatrix> fine = run(step);
    residual = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) residual = std::max(residual, detail::diagonal_tv(coarse[i], fine[i]));
    if (residual < control.tolerance) {
      for (const auto& r : fine) {
        const double trace_err = std::abs(r.trace() - rho0.trace());
        require(trace_err < kLongRunTol, ErrorKind::Contract, "master equation lost trace (" + std::to_string(trace_err) + ")");
      }
      return fine;
    }
    coarse = std::move(fine);
  }
  fail(ErrorKind::Integration, "master equation did not converge; residual " + std::to_string(residual));
}

inline CMatrix evolve_master(const CMatrix& rho0, const Graph& g, const HamiltonianSpec& spec, const CtqwNoiseSpec& noise,
                             double t, const StepControl& control = {}) {
  return evolve_master_series(rho0, g, spec, noise, {t}, control).front();
}

/// Single-qubit probabilities of the dephased hypercube walk.
struct FactoredHypercube {
  std::size_t n = 1;
  double p0 = 1.0;  // probability a coordinate still reads 0
  double p1 = 0.0;

  /// Full distribution over the 2^n vertices (index bits = coordinates).
  [[nodiscard]] RVector distribution() const {
    require(n <= 24, ErrorKind::Size, "factored distribution too large");
    const std::size_t size = std::size_t{1} << n;
    RVector p(static_cast<Eigen::Index>(size));
    for (std::size_t x = 0; x < size; ++x) {
      const int w = std::popcount(x);
      p(static_cast<Eigen::Index>(x)) = std::pow(p0, static_cast<double>(static_cast<int>(n) - w)) * std::pow(p1, w);
    }
    return p;
  }

  [[nodiscard]] double probability_at_weight(std::size_t weight) const {
    return std::pow(p0, static_cast<double>(n - weight)) * std::pow(p1, static_cast<double>(weight));
  }
};

/// P[0] = 1/2 + 1/2 e^{-p tau}[cos(beta tau) + (p/beta) sin(beta tau)],
/// tau = t / 2n, beta = sqrt(16 k^2 - p^2) taken complex when p > 4k.
inline FactoredHypercube hypercube_factored_evolve(std::size_t n, double k, double p, double t) {
  require(n >= 1, ErrorKind::Validation, "hypercube dimension must be >= 1");
  require(k > 0.0, ErrorKind::Validation, "energy k must be > 0");
  require(p >= 0.0, ErrorKind::Validation, "noise.rate must be >= 0");
  require(t >= 0.0, ErrorKind::Validation, "time must be >= 0");
  const double tau = t / (2.0 * static_cast<double>(n));
  const double disc = 16.0 * k * k - p * p;
  double envelope = 0.0;
  if (disc == 0.0) {
    envelope = std::exp(-p * tau) * (1.0 + p * tau);
  } else {
    // e^{-p tau}[cos + (p/beta) sin] written with exponentials that never exceed 1.
    const cplx beta = std::sqrt(cplx(disc, 0.0));  // principal root: Im >= 0
    const cplx ib = kI * beta;
    const cplx ratio = p / ib;
    envelope = (0.5 * ((1.0 + ratio) * std::exp(ib * tau - p * tau) + (1.0 - ratio) * std::exp(-ib * tau - p * tau))).real();
  }
  FactoredHypercube out;
  out.n = n;
  out.p0 = 0.5 + 0.5 * envelope;
  out.p1 = 1.0 - out.p0;
  return out;
}

}  // namespace qwalk
