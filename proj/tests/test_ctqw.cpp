#include <gtest/gtest.h>

#include <cmath>

#include "qwalk/ctqw.hpp"
#include "qwalk/observables.hpp"
#include "qwalk/oracles.hpp"

using namespace qwalk;

namespace {

CMatrix pure_density(const CVector& psi) { return psi * psi.adjoint(); }

RVector diag(const CMatrix& rho) { return rho.diagonal().real(); }

}  // namespace

TEST(CtqwPure, LineMatchesBesselAmplitudes) {
  const Graph line = build_line(90);
  const HamiltonianSpec h{0.5, HamiltonianVariant::Adjacency};
  const double t = 40.0;
  const CVector psi = evolve_ctqw_pure(line, h, t, vertex_state(line, line.vertex_at(0)));
  double worst = 0.0;
  for (long x = -90; x <= 90; ++x) {
    const cplx ref = oracles::ctqw_line_amplitude(x, 2.0 * h.gamma * t);
    worst = std::max(worst, std::abs(std::norm(psi(static_cast<Eigen::Index>(line.vertex_at(x)))) - std::norm(ref)));
  }
  EXPECT_LT(worst, 1e-8);
  for (long x = 1; x <= 90; ++x)
    EXPECT_NEAR(std::norm(psi(static_cast<Eigen::Index>(line.vertex_at(x)))),
                std::norm(psi(static_cast<Eigen::Index>(line.vertex_at(-x)))), 1e-12);
}

TEST(CtqwPure, NormPreservedAndReversible) {
  const Graph g = build_glued_trees(3, 4);
  const HamiltonianSpec h{1.0, HamiltonianVariant::Adjacency};
  const CVector psi0 = vertex_state(g, 0);
  const CVector psi = evolve_ctqw_pure(g, h, 7.3, psi0);
  EXPECT_NEAR(psi.norm(), 1.0, 1e-12);
  const CMatrix u = spectral_propagator(g, h)->unitary(7.3);
  EXPECT_LT((u.adjoint() * psi - psi0).norm(), 1e-11);
}

TEST(CtqwPure, LaplacianMatchesAdjacencyOnRegularGraphs) {
  const Graph g = build_cycle(9);
  const CVector psi0 = vertex_state(g, 2);
  const RVector a = evolve_ctqw_pure(g, {0.7, HamiltonianVariant::Adjacency}, 5.0, psi0).cwiseAbs2();
  const RVector l = evolve_ctqw_pure(g, {0.7, HamiltonianVariant::Laplacian}, 5.0, psi0).cwiseAbs2();
  EXPECT_LT((a - l).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CtqwPure, HypercubeMixesExactlyAtQuarterPeriod) {
  for (std::size_t n : {3u, 5u}) {
    const Graph g = build_hypercube(n);
    const double gamma = 1.0 / static_cast<double>(n);
    const RVector uniform = RVector::Constant(static_cast<Eigen::Index>(g.vertex_count()), 1.0 / static_cast<double>(g.vertex_count()));
    for (int odd : {1, 3}) {
      const double t = odd * static_cast<double>(n) * kPi / 4.0;
      const RVector p = evolve_ctqw_pure(g, {gamma, HamiltonianVariant::Adjacency}, t, vertex_state(g, 0)).cwiseAbs2();
      EXPECT_LT(tv_distance(p, uniform), 1e-8);
    }
  }
}

TEST(CtqwPure, RejectsBadInput) {
  const Graph g = build_cycle(4);
  EXPECT_THROW(evolve_ctqw_pure(g, {1.0, HamiltonianVariant::Adjacency}, -1.0, vertex_state(g, 0)), Error);
  EXPECT_THROW(evolve_ctqw_pure(g, {0.0, HamiltonianVariant::Adjacency}, 1.0, vertex_state(g, 0)), Error);
  EXPECT_THROW(vertex_state(g, 4), Error);
}

TEST(ClassicalCtrw, ConservesProbabilityAndRelaxes) {
  const Graph g = build_glued_trees(2, 1);
  const RVector p0 = vertex_state(g, 0).real();
  const RVector early = classical_ctrw(g, 1.0, 0.5, p0);
  EXPECT_NEAR(early.sum(), 1.0, 1e-12);
  EXPECT_GT(early(0), 0.3);
  const RVector late = classical_ctrw(g, 1.0, 500.0, p0);
  EXPECT_NEAR(late.maxCoeff(), 1.0 / static_cast<double>(g.vertex_count()), 1e-9);
}

TEST(Master, NoiselessMatchesPure) {
  const Graph g = build_cycle(8);
  const HamiltonianSpec h{0.5, HamiltonianVariant::Adjacency};
  const CVector psi0 = vertex_state(g, 0);
  const CMatrix rho = evolve_master(pure_density(psi0), g, h, CtqwNoiseSpec{}, 6.0);
  EXPECT_LT((rho - pure_density(evolve_ctqw_pure(g, h, 6.0, psi0))).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Master, TraceAndHermiticity) {
  const Graph g = build_cycle(7);
  const CtqwNoiseSpec noise{CtqwNoiseModel::VertexProject, 0.8};
  const auto series = evolve_master_series(pure_density(vertex_state(g, 0)), g, {0.25, HamiltonianVariant::Adjacency},
                                           noise, {1.0, 10.0, 40.0});
  ASSERT_EQ(series.size(), 3u);
  for (const auto& rho : series) {
    EXPECT_NEAR(rho.trace().real(), 1.0, 1e-10);
    EXPECT_LT((rho - rho.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(diag(rho).minCoeff(), -1e-12);
  }
}

TEST(Master, StrongMeasurementFreezesTheWalker) {
  const Graph line = build_line(20);
  const CMatrix rho0 = pure_density(vertex_state(line, line.vertex_at(0)));
  const CMatrix rho = evolve_master(rho0, line, {0.5, HamiltonianVariant::Adjacency},
                                    {CtqwNoiseModel::VertexProject, 8000.0}, 40.0);
  EXPECT_GE(rho(20, 20).real(), 0.9);
}

TEST(Master, PerQubitDephasingNeedsHypercube) {
  const Graph g = build_cycle(8);
  EXPECT_THROW(evolve_master(pure_density(vertex_state(g, 0)), g, {}, {CtqwNoiseModel::PerQubitDephase, 1.0}, 1.0),
               Error);
}

TEST(FactoredHypercube, AgreesWithIndependentOracleInAllRegimes) {
  for (double p : {0.0, 0.5, 3.9, 4.0, 4.1, 12.0, 40.0})
    for (double t : {0.0, 0.3, 2.5, 11.0, 60.0}) {
      const FactoredHypercube f = hypercube_factored_evolve(5, 1.0, p, t);
      const auto o = oracles::alagic_probs(5, 1.0, p, t).value;
      EXPECT_NEAR(f.p0, o.first, 1e-12) << "p=" << p << " t=" << t;
      EXPECT_NEAR(f.p1, o.second, 1e-12);
    }
}

TEST(FactoredHypercube, MatchesMasterEquation) {
  const std::size_t n = 3;
  const Graph g = build_hypercube(n);
  const double k = 1.0;
  const HamiltonianSpec h{k / static_cast<double>(n), HamiltonianVariant::Adjacency};
  const CMatrix rho0 = pure_density(vertex_state(g, 0));
  for (double p : {1.0, 4.0, 7.0}) {
    const std::vector<double> times{0.5, 2.0, 6.0};
    const auto series = evolve_master_series(rho0, g, h, {CtqwNoiseModel::PerQubitDephase, p}, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const RVector f = hypercube_factored_evolve(n, k, p, times[i]).distribution();
      EXPECT_LT((diag(series[i]) - f).cwiseAbs().maxCoeff(), 1e-6) << "p=" << p << " t=" << times[i];
    }
  }
}

TEST(FactoredHypercube, BalancedAtPredictedMixingTimes) {
  for (double p : {0.0, 1.0, 2.5})
    for (std::size_t c : {1u, 2u}) {
      const double t = oracles::alagic_mixing_times(4, 1.0, p, c);
      EXPECT_NEAR(hypercube_factored_evolve(4, 1.0, p, t).p0, 0.5, 1e-12);
    }
}

TEST(FactoredHypercube, CornerPeaksAtPredictedHittingTimes) {
  const auto [t, prob] = oracles::alagic_hitting(5, 1.0, 1.0, 0);
  const auto at = [](double s) { return hypercube_factored_evolve(5, 1.0, 1.0, s).probability_at_weight(5); };
  EXPECT_NEAR(at(t), prob, 1e-12);
  EXPECT_LT(at(t - 0.05), at(t));
  EXPECT_LT(at(t + 0.05), at(t));
}
