#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <variant>

#include "qwalk/errors.hpp"
#include "qwalk/graphs.hpp"
#include "qwalk/types.hpp"

namespace qwalk {

namespace coins {
struct Hadamard {};
/// sqrt(eta) on the diagonal, phase delta on the off-diagonal pair.
struct Biased {
  double eta = 0.5;
  double delta = 0.0;
};
struct Dft {};
struct Grover {};
/// -I; the perturbed coin used at the marked vertex of the search walk.
struct NegativeIdentity {};
struct Custom {
  CMatrix matrix;
};
}  // namespace coins

using BaseCoin = std::variant<coins::Hadamard, coins::Biased, coins::Dft, coins::Grover, coins::NegativeIdentity, coins::Custom>;

/// Which unitary acts at each vertex: one base coin plus optional per-vertex overrides.
struct CoinSpec {
  BaseCoin base = coins::Hadamard{};
  std::map<std::size_t, BaseCoin> per_vertex;

  [[nodiscard]] const BaseCoin& at(std::size_t vertex) const {
    auto it = per_vertex.find(vertex);
    return it == per_vertex.end() ? base : it->second;
  }
};

inline double unitarity_defect(const CMatrix& u) {
  const auto n = u.cols();
  return (u.adjoint() * u - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
}

/// Realise a coin of dimension d.
inline CMatrix make_coin(const BaseCoin& spec, std::size_t d) {
  require(d >= 1, ErrorKind::Validation, "coin dimension must be >= 1");
  const auto n = static_cast<Eigen::Index>(d);
  CMatrix c(n, n);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, coins::Hadamard>) {
          require(d == 2, ErrorKind::Validation, "Hadamard coin needs d = 2, got " + std::to_string(d));
          const double h = std::sqrt(0.5);
          c << h, h, h, -h;
        } else if constexpr (std::is_same_v<T, coins::Biased>) {
          require(d == 2, ErrorKind::Validation, "biased coin needs d = 2");
          require(s.eta >= 0.0 && s.eta <= 1.0, ErrorKind::Validation, "biased coin eta outside [0, 1]");
          const double a = std::sqrt(s.eta);
          const double b = std::sqrt(1.0 - s.eta);
          c << a, std::polar(b, s.delta), std::polar(b, -s.delta), -a;
        } else if constexpr (std::is_same_v<T, coins::Dft>) {
          const double norm = 1.0 / std::sqrt(static_cast<double>(d));
          for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k)
              c(j, k) = std::polar(norm, 2.0 * kPi * static_cast<double>((j * k) % n) / static_cast<double>(d));
        } else if constexpr (std::is_same_v<T, coins::Grover>) {
          const double off = 2.0 / static_cast<double>(d);
          c.setConstant(cplx(off, 0.0));
          c.diagonal().array() -= 1.0;
        } else if constexpr (std::is_same_v<T, coins::NegativeIdentity>) {
          c = -CMatrix::Identity(n, n);
        } else {
          require(s.matrix.rows() == n && s.matrix.cols() == n, ErrorKind::Validation,
                  "custom coin must be " + std::to_string(d) + "x" + std::to_string(d));
          c = s.matrix;
        }
      },
      spec);
  const double defect = unitarity_defect(c);
  require(defect < kConstructionTol, ErrorKind::Validation,
          "coin is not unitary (max deviation " + std::to_string(defect) + ")");
  return c;
}

/// Real rotation coin; phi = pi/2 gives the Hadamard matrix.
inline CMatrix rotation_coin(double phi) {
  CMatrix c(2, 2);
  c << std::cos(phi / 2), std::sin(phi / 2), std::sin(phi / 2), -std::cos(phi / 2);
  return c;
}

/// Coin block acting on the d port slots of vertex x.
///
/// Fixed-degree lattices get the full d x d coin. On other graphs a vertex of
/// degree d_x < d gets a d_x-dimensional coin embedded on its used ports with
/// zeros on unused ones; a custom d x d block must already be zero there.
inline CMatrix coin_block(const CoinSpec& spec, const Graph& graph, std::size_t x) {
  const std::size_t d = graph.max_degree();
  const BaseCoin& base = spec.at(x);
  const bool lattice = graph.kind() == GraphKind::Line || graph.kind() == GraphKind::Cycle ||
                       graph.kind() == GraphKind::Hypercube;
  const std::size_t dx = graph.degree(x);
  if (lattice || dx == d) return make_coin(base, d);

  std::vector<Eigen::Index> used;
  for (std::size_t c = 0; c < d; ++c)
    if (graph.port_used(x, c)) used.push_back(static_cast<Eigen::Index>(c));
  const auto dn = static_cast<Eigen::Index>(d);
  if (const auto* custom = std::get_if<coins::Custom>(&base); custom && custom->matrix.rows() == dn) {
    CMatrix block = custom->matrix;
    for (Eigen::Index c = 0; c < dn; ++c) {
      if (graph.port_used(x, static_cast<std::size_t>(c))) continue;
      require(block.row(c).cwiseAbs().maxCoeff() == 0.0 && block.col(c).cwiseAbs().maxCoeff() == 0.0,
              ErrorKind::Validation, "coin at vertex " + std::to_string(x) + " acts on an unused port");
    }
    CMatrix sub(static_cast<Eigen::Index>(dx), static_cast<Eigen::Index>(dx));
    for (std::size_t i = 0; i < dx; ++i)
      for (std::size_t j = 0; j < dx; ++j) sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = block(used[i], used[j]);
    const double defect = unitarity_defect(sub);
    require(defect < kConstructionTol, ErrorKind::Validation,
            "coin at vertex " + std::to_string(x) + " is not unitary on its used ports (max deviation " +
                std::to_string(defect) + ")");
    return block;
  }
  if (dx == 0) return CMatrix::Zero(dn, dn);
  const CMatrix small = make_coin(base, dx);
  CMatrix block = CMatrix::Zero(dn, dn);
  for (std::size_t i = 0; i < dx; ++i)
    for (std::size_t j = 0; j < dx; ++j)
      block(used[i], used[j]) = small(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return block;
}

}  // namespace qwalk
