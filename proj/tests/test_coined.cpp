#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "qwalk/coined.hpp"
#include "qwalk/observables.hpp"

using namespace qwalk;

namespace {

// Plain two-array Hadamard recursion on Z, kept separate from WalkOperator.
// Port 0 moves to x - 1, port 1 to x + 1.
std::map<long, double> reference_line(std::size_t steps, cplx a0, cplx a1) {
  std::map<long, std::pair<cplx, cplx>> psi{{0, {a0, a1}}};
  const double h = std::sqrt(0.5);
  for (std::size_t t = 0; t < steps; ++t) {
    std::map<long, std::pair<cplx, cplx>> next;
    for (const auto& [x, amp] : psi) {
      const cplx down = h * (amp.first + amp.second);
      const cplx up = h * (amp.first - amp.second);
      next[x - 1].first += down;
      next[x + 1].second += up;
    }
    psi = std::move(next);
  }
  std::map<long, double> p;
  for (const auto& [x, amp] : psi) p[x] = std::norm(amp.first) + std::norm(amp.second);
  return p;
}

CVector random_state(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, 0, 0);
  CVector v(static_cast<Eigen::Index>(n));
  for (auto& z : v) z = cplx(rng.normal(0, 1), rng.normal(0, 1));
  return v / v.norm();
}

RVector binomial_on(const Graph& line, std::size_t steps) {
  RVector p = RVector::Zero(static_cast<Eigen::Index>(line.vertex_count()));
  for (std::size_t k = 0; k <= steps; ++k) {
    const long x = 2 * static_cast<long>(k) - static_cast<long>(steps);
    p(static_cast<Eigen::Index>(line.vertex_at(x))) =
        std::exp(std::lgamma(steps + 1.0) - std::lgamma(k + 1.0) - std::lgamma(steps - k + 1.0) -
                 static_cast<double>(steps) * std::log(2.0));
  }
  return p;
}

}  // namespace

TEST(Coins, StandardCoinsAreUnitary) {
  EXPECT_LT(unitarity_defect(make_coin(coins::Hadamard{}, 2)), 1e-15);
  for (std::size_t d : {2u, 3u, 5u, 9u}) {
    EXPECT_LT(unitarity_defect(make_coin(coins::Grover{}, d)), 1e-14);
    EXPECT_LT(unitarity_defect(make_coin(coins::Dft{}, d)), 1e-14);
  }
  const CMatrix b = make_coin(coins::Biased{0.5, 0.0}, 2);
  EXPECT_LT((b - make_coin(coins::Hadamard{}, 2)).norm(), 1e-15);
  EXPECT_NEAR(rotation_coin(kPi / 2)(0, 1).real(), std::sqrt(0.5), 1e-15);
}

TEST(Coins, GroverEntries) {
  const CMatrix g = make_coin(coins::Grover{}, 4);
  EXPECT_DOUBLE_EQ(g(0, 0).real(), -0.5);
  EXPECT_DOUBLE_EQ(g(0, 1).real(), 0.5);
}

TEST(Coins, Rejections) {
  EXPECT_THROW(make_coin(coins::Hadamard{}, 3), Error);
  EXPECT_THROW(make_coin(coins::Biased{1.5, 0.0}, 2), Error);
  CMatrix bad = CMatrix::Identity(2, 2);
  bad(0, 1) = 0.1;
  EXPECT_THROW(make_coin(coins::Custom{bad}, 2), Error);
}

TEST(WalkOperator, UnitaryOnEveryGraphFamily) {
  const std::vector<Graph> graphs = {build_line(6), build_cycle(7), build_cycle(2), build_hypercube(3),
                                     build_glued_trees(2, 3), load_graph("N 4\n0 1\n1 2\n2 3\n3 0\n0 2\n")};
  for (const Graph& g : graphs) {
    CoinSpec coin;
    coin.base = g.max_degree() == 2 ? BaseCoin{coins::Hadamard{}} : BaseCoin{coins::Grover{}};
    const WalkOperator op(g, coin);
    // Amplitude on unused ports is a contract violation, so draw states on used
    // ports only; the line's full coin at its ends needs those vertices empty.
    CVector mask = CVector::Zero(static_cast<Eigen::Index>(op.dimension()));
    const bool line = g.kind() == GraphKind::Line;
    for (std::size_t x = line ? 1 : 0; x < g.vertex_count() - (line ? 1 : 0); ++x)
      for (std::size_t c = 0; c < g.max_degree(); ++c)
        if (g.port_used(x, c)) mask(static_cast<Eigen::Index>(g.basis_index(x, c))) = 1.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      CVector v = random_state(op.dimension(), seed).cwiseProduct(mask);
      v /= v.norm();
      EXPECT_NEAR(op.apply(v).norm(), 1.0, 1e-13) << to_string(g.kind());
    }
  }
}

TEST(PureWalk, MatchesIndependentRecursion) {
  const Graph line = build_line(60);
  const WalkOperator op(line, CoinSpec{});
  for (const CVector& coin : {port_vector(2, 0), port_vector(2, 1), symmetric_coin()}) {
    WalkStatePure s = localized_state(line, line.vertex_at(0), coin);
    for (int t = 0; t < 50; ++t) s = step_pure(s, op);
    const RVector p = position_distribution(line, s.amplitudes);
    const auto ref = reference_line(50, coin(0), coin(1));
    for (long x = -50; x <= 50; ++x) {
      const auto it = ref.find(x);
      EXPECT_NEAR(p(static_cast<Eigen::Index>(line.vertex_at(x))), it == ref.end() ? 0.0 : it->second, 1e-14);
    }
  }
}

TEST(PureWalk, SmallTimePins) {
  const Graph line = build_line(10);
  const WalkOperator op(line, CoinSpec{});
  WalkStatePure s = localized_state(line, line.vertex_at(0), symmetric_coin());
  for (std::size_t t = 1; t <= 3; ++t) {
    s = step_pure(s, op);
    EXPECT_LT(tv_distance(position_distribution(line, s.amplitudes), binomial_on(line, t)), 1e-12) << "t=" << t;
  }
  s = step_pure(s, op);
  EXPECT_NEAR(moments(line, position_distribution(line, s.amplitudes)).second_moment, 5.0, 1e-12);
  // |-1> departs from the binomial one step earlier; its fourth-step moment is the same.
  WalkStatePure m = localized_state(line, line.vertex_at(0), port_vector(2, 0));
  for (int t = 0; t < 4; ++t) m = step_pure(m, op);
  EXPECT_NEAR(moments(line, position_distribution(line, m.amplitudes)).second_moment, 5.0, 1e-12);
}

TEST(PureWalk, FrozenMomentsAtHundredSteps) {
  const Graph line = build_line(100);
  const WalkOperator op(line, CoinSpec{});
  WalkStatePure s = localized_state(line, line.vertex_at(0), port_vector(2, 0));
  for (int t = 0; t < 100; ++t) s = step_pure(s, op);
  const Moments m = moments(line, position_distribution(line, s.amplitudes));
  EXPECT_NEAR(m.mean, -28.9755601563721, 1e-9);
  EXPECT_NEAR(m.second_moment, 2929.42233079401, 1e-8);
}

TEST(PureWalk, SymmetricCoinGivesMirrorSymmetry) {
  const Graph line = build_line(100);
  const WalkOperator op(line, CoinSpec{});
  WalkStatePure s = localized_state(line, line.vertex_at(0), symmetric_coin());
  for (int t = 1; t <= 100; ++t) {
    s = step_pure(s, op);
    const RVector p = position_distribution(line, s.amplitudes);
    for (long x = 1; x <= t; ++x)
      ASSERT_EQ(p(static_cast<Eigen::Index>(line.vertex_at(x))), p(static_cast<Eigen::Index>(line.vertex_at(-x))));
  }
}

TEST(Density, NoiselessMatchesPure) {
  const Graph g = build_cycle(9);
  const WalkOperator op(g, CoinSpec{});
  const WalkStatePure init = localized_state(g, 0, symmetric_coin());
  WalkStatePure s = init;
  WalkStateDensity r = to_density(init);
  evolve_density(r, op, g, NoiseSpec{}, 30, [](std::size_t, const CMatrix&) {});
  for (int t = 0; t < 30; ++t) s = step_pure(s, op);
  EXPECT_LT((r.rho - s.amplitudes * s.amplitudes.adjoint()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Density, ChannelsPreserveTraceHermiticityAndPositivity) {
  const Graph g = build_cycle(6);
  const WalkOperator op(g, CoinSpec{});
  for (Channel ch : {Channel::MeasurePosition, Channel::MeasureCoin, Channel::MeasureBoth, Channel::CoinDephase}) {
    for (double p : {0.0, 0.13, 0.5, 1.0}) {
      NoiseSpec noise;
      noise.channel = ch;
      noise.rate = p;
      noise.theta = 0.3;
      WalkStateDensity s = to_density(WalkStatePure{random_state(g.basis_size(), 11), 0});
      evolve_density(s, op, g, noise, 25, [](std::size_t, const CMatrix&) {});
      EXPECT_NO_THROW(check_density(s.rho, 1e-12, true)) << to_string(ch) << " p=" << p;
    }
  }
  NoiseSpec sy;
  sy.channel = Channel::MeasureCoin;
  sy.coin_basis = CoinBasis::SigmaY;
  sy.rate = 0.4;
  WalkStateDensity s = to_density(WalkStatePure{random_state(g.basis_size(), 12), 0});
  evolve_density(s, op, g, sy, 25, [](std::size_t, const CMatrix&) {});
  EXPECT_NO_THROW(check_density(s.rho, 1e-12, true));
}

TEST(Density, SigmaYMeasurementFixesItsEigenstates) {
  const Graph g = build_cycle(4);
  NoiseSpec sy;
  sy.channel = Channel::MeasureCoin;
  sy.coin_basis = CoinBasis::SigmaY;
  const CMatrix rho0 = to_density(localized_state(g, 1, symmetric_coin())).rho;
  CMatrix rho = rho0;
  apply_channel(rho, g, sy, 1.0);
  EXPECT_LT((rho - rho0).norm(), 1e-14);
  NoiseSpec comp = sy;
  comp.coin_basis = CoinBasis::Computational;
  rho = rho0;
  apply_channel(rho, g, comp, 1.0);
  EXPECT_NEAR(rho(2, 3).real(), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(rho(2, 3)), 0.0, 1e-15);
}

TEST(Density, FullMeasurementGivesClassicalWalk) {
  const Graph line = build_line(100);
  const WalkOperator op(line, CoinSpec{});
  NoiseSpec noise;
  noise.channel = Channel::MeasureBoth;
  noise.rate = 1.0;
  WalkStateDensity s = to_density(localized_state(line, line.vertex_at(0), port_vector(2, 0)));
  evolve_density(s, op, line, noise, 100, [](std::size_t, const CMatrix&) {});
  const RVector p = position_distribution(line, s.rho);
  EXPECT_LT(tv_distance(p, binomial_on(line, 100)), 1e-10);
  EXPECT_NEAR(moments(line, p).spread(), 10.0, 1e-8);
}

TEST(Density, UnsupportedChannelsAreRefused) {
  const Graph cube = build_hypercube(3);
  const WalkOperator op(cube, CoinSpec{coins::Grover{}, {}});
  NoiseSpec links;
  links.channel = Channel::BrokenLinks;
  links.rate = 0.1;
  WalkStateDensity s = to_density(localized_state(cube, 0, port_vector(3, 0)));
  EXPECT_THROW(evolve_density(s, op, cube, links, 1, [](std::size_t, const CMatrix&) {}), Error);
  NoiseSpec deph;
  deph.channel = Channel::CoinDephase;
  deph.rate = 0.1;
  EXPECT_THROW(evolve_density(s, op, cube, deph, 1, [](std::size_t, const CMatrix&) {}), Error);
  NoiseSpec bad;
  bad.rate = 1.5;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Schedule, FixedIntervalAndRandomTimes) {
  NoiseSpec n;
  n.channel = Channel::MeasurePosition;
  n.schedule.type = Schedule::Type::FixedInterval;
  n.schedule.interval = 3;
  const EventPlan fixed(n);
  EXPECT_EQ(fixed.probability(3), 1.0);
  EXPECT_EQ(fixed.probability(4), 0.0);
  n.schedule.type = Schedule::Type::RandomTimes;
  n.schedule.count = 5;
  n.schedule.horizon = 20;
  n.schedule.seed = 9;
  const EventPlan random(n);
  ASSERT_EQ(random.random_times().size(), 5u);
  double total = 0;
  for (std::size_t t = 1; t <= 20; ++t) total += random.probability(t);
  EXPECT_EQ(total, 5.0);
  EXPECT_EQ(EventPlan(n).random_times(), random.random_times());
  n.schedule.count = 21;
  EXPECT_THROW(EventPlan{n}, Error);
}

TEST(Trajectories, ReproducibleAndThreadIndependent) {
  const Graph g = build_cycle(11);
  const WalkOperator op(g, CoinSpec{});
  NoiseSpec noise;
  noise.channel = Channel::MeasureBoth;
  noise.rate = 0.2;
  const WalkStatePure init = localized_state(g, 0, port_vector(2, 0));
  const auto a = trajectory_sample(init, op, g, noise, 30, 42, 7);
  const auto b = trajectory_sample(init, op, g, noise, 30, 42, 7);
  EXPECT_EQ(a.record, b.record);
  EXPECT_EQ((a.state.amplitudes - b.state.amplitudes).norm(), 0.0);
  const auto one = ensemble_distributions(init, op, g, noise, 30, {10, 30}, 300, 5, 1);
  const auto four = ensemble_distributions(init, op, g, noise, 30, {10, 30}, 300, 5, 4);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ((one[k] - four[k]).norm(), 0.0);
}

TEST(Trajectories, EnsembleMatchesDensity) {
  const Graph g = build_cycle(9);
  const WalkOperator op(g, CoinSpec{});
  const WalkStatePure init = localized_state(g, 0, symmetric_coin());
  for (Channel ch : {Channel::MeasurePosition, Channel::MeasureCoin, Channel::MeasureBoth}) {
    NoiseSpec noise;
    noise.channel = ch;
    noise.rate = 0.3;
    WalkStateDensity s = to_density(init);
    evolve_density(s, op, g, noise, 20, [](std::size_t, const CMatrix&) {});
    const auto got = ensemble_distributions(init, op, g, noise, 20, {20}, 4000, 3, 1);
    EXPECT_LT(tv_distance(got[0], position_distribution(g, s.rho)), 0.05) << to_string(ch);
  }
}

TEST(Trajectories, BrokenLinksLimits) {
  const Graph line = build_line(20);
  const WalkOperator op(line, CoinSpec{});
  const WalkStatePure init = localized_state(line, line.vertex_at(0), symmetric_coin());
  NoiseSpec none;
  none.channel = Channel::BrokenLinks;
  WalkStatePure pure = init;
  for (int t = 0; t < 15; ++t) pure = step_pure(pure, op);
  const auto intact = trajectory_sample(init, op, line, none, 15, 1);
  EXPECT_LT((intact.state.amplitudes - pure.amplitudes).norm(), 1e-13);
  none.rate = 1.0;
  const auto frozen = trajectory_sample(init, op, line, none, 15, 1);
  const RVector p = position_distribution(line, frozen.state.amplitudes);
  EXPECT_NEAR(p(static_cast<Eigen::Index>(line.vertex_at(0))), 1.0, 1e-13);
}

TEST(Trajectories, ImperfectCoinAtZeroSpreadIsHadamard) {
  const Graph line = build_line(20);
  const WalkOperator op(line, CoinSpec{});
  const WalkStatePure init = localized_state(line, line.vertex_at(0), port_vector(2, 1));
  NoiseSpec n;
  n.channel = Channel::ImperfectCoin;
  WalkStatePure pure = init;
  for (int t = 0; t < 15; ++t) pure = step_pure(pure, op);
  EXPECT_LT((trajectory_sample(init, op, line, n, 15, 3).state.amplitudes - pure.amplitudes).norm(), 1e-13);
  n.rate = 0.5;
  const auto noisy = trajectory_sample(init, op, line, n, 15, 3);
  EXPECT_NEAR(noisy.state.amplitudes.norm(), 1.0, 1e-12);
}

TEST(MomentPropagator, AgreesWithDensityEvolution) {
  const Graph line = build_line(40);
  const WalkOperator op(line, CoinSpec{});
  for (Channel ch : {Channel::None, Channel::MeasurePosition, Channel::MeasureCoin, Channel::MeasureBoth,
                     Channel::CoinDephase}) {
    NoiseSpec noise;
    noise.channel = ch;
    noise.rate = 0.25;
    noise.theta = 0.4;
    LineMomentPropagator prop(make_coin(coins::Hadamard{}, 2), port_vector(2, 0), noise, 40);
    WalkStateDensity s = to_density(localized_state(line, line.vertex_at(0), port_vector(2, 0)));
    evolve_density(s, op, line, noise, 40, [&](std::size_t t, const CMatrix& rho) {
      if (t == 0) return;
      prop.step();
      const Moments m = moments(line, position_distribution(line, rho));
      EXPECT_NEAR(prop.mean(), m.mean, 1e-9);
      EXPECT_NEAR(prop.second_moment(), m.second_moment, 1e-8);
    });
    EXPECT_NEAR(prop.norm(), 1.0, 1e-12);
  }
}

TEST(MultiCoin, SingleCoinIsTheHadamardWalk) {
  const Graph line = build_line(30);
  const WalkOperator op(line, CoinSpec{});
  const auto series = multi_coin_evolve(line, 1, 30, false, 0, symmetric_coin());
  WalkStatePure s = localized_state(line, line.vertex_at(0), symmetric_coin());
  for (std::size_t t = 1; t <= 30; ++t) {
    s = step_pure(s, op);
    EXPECT_LT((series[t] - position_distribution(line, s.amplitudes)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(MultiCoin, FreshCoinEveryStepIsClassical) {
  const Graph line = build_line(100);
  const auto series = multi_coin_evolve(line, 100, 100, false, 0, symmetric_coin());
  EXPECT_NEAR(moments(line, series[100]).spread(), 10.0, 1e-10);
  // The register path with M = T gives the same answer at small size.
  const Graph small = build_line(8);
  const auto reg = multi_coin_evolve(small, 8, 8, true, 0, symmetric_coin());
  EXPECT_NEAR(reg[8].sum(), 1.0, 1e-12);
  EXPECT_THROW(multi_coin_evolve(line, 40, 100, true, 0, symmetric_coin()), Error);
}

TEST(Search, FrozenPeakOnNineCube) {
  const auto series = search_evolve(build_hypercube(9), 0, 60);
  std::size_t best = 0;
  for (std::size_t t = 0; t < series.size(); ++t)
    if (series[t] > series[best]) best = t;
  EXPECT_EQ(best, 26u);
  EXPECT_NEAR(series[best], 0.427271421003523, 1e-10);
  EXPECT_NEAR(series[0], 1.0 / 512, 1e-15);
}
