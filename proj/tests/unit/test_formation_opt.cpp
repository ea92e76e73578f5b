#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "formation/errors.hpp"
#include "formation/fisher.hpp"
#include "formation/formation_opt.hpp"
#include "formation/presets.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace formation;

namespace {

const BarrierParams kBarrier{2.0, 1.0};

Scenario pair_at(double x, double y, double heading = 0.0) {
  return fixtures::two_tag_scenario(GroupMode::SE2, {fixtures::planar(GroupMode::SE2, heading, x, y)});
}

Scenario short_run(std::string name, int iters) {
  Scenario s = make_preset(name);
  s.optimizer.max_iters = iters;
  return s;
}

}  // namespace

TEST(Barrier, HandValues) {
  EXPECT_EQ(barrier(2.0, kBarrier), 0.0);
  EXPECT_EQ(barrier(3.0, kBarrier), 0.0);
  EXPECT_NEAR(barrier(1.5, kBarrier), 1.96, 1e-14);
}

TEST(Barrier, MatchesDefinitionOnGrid) {
  for (double r = 1.001; r < 3.0; r += 0.0137) {
    EXPECT_NEAR(barrier(r, kBarrier), oracle::barrier(r, 2.0, 1.0), 1e-12 * (1.0 + oracle::barrier(r, 2.0, 1.0)));
  }
}

TEST(Barrier, PoleAndInfeasibleRegion) {
  EXPECT_THROW(barrier(1.0, kBarrier), BarrierPole);
  EXPECT_THROW(barrier(1.0 + 5e-10, kBarrier), BarrierPole);
  EXPECT_THROW(barrier(0.5, kBarrier), InfeasibleState);
  EXPECT_NO_THROW(barrier(1.0 + 1e-6, kBarrier));
  EXPECT_GT(barrier(1.0 + 1e-6, kBarrier), 1e10);
}

TEST(Barrier, MonotoneInsideActivationRadius) {
  double prev = barrier(1.01, kBarrier);
  for (double r = 1.02; r <= 2.0; r += 0.01) {
    const double v = barrier(r, kBarrier);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(Barrier, CountsEachPairTwice) {
  const Scenario s = pair_at(1.5, 0.0);
  EXPECT_NEAR(j_col(s.initial_state, kBarrier), 3.92, 1e-13);
  EXPECT_DOUBLE_EQ(j_col_pair(s.initial_state, kBarrier, 1, 2), j_col_pair(s.initial_state, kBarrier, 2, 1));
  EXPECT_THROW(j_col_pair(s.initial_state, kBarrier, 2, 2), InvalidArgument);
  const CostBreakdown c = evaluate_cost(s.initial_state, MeasurementModel(s), kBarrier);
  EXPECT_NEAR(c.j_total.value() - c.j_est.value(), 3.92, 1e-12);
}

TEST(Barrier, UsesReferencePointsOnly) {
  // Heading moves the tags but not the reference point distance.
  EXPECT_DOUBLE_EQ(j_col(pair_at(1.5, 0.0, 0.0).initial_state, kBarrier),
                   j_col(pair_at(1.5, 0.0, 2.0).initial_state, kBarrier));
}

TEST(TotalCost, UnobservableIsInfinite) {
  const Scenario s = make_preset("collinear");
  EXPECT_TRUE(j_total(s.initial_state, s).is_infinite());
  EXPECT_THROW(descend(s), InvalidArgument);
}

TEST(TotalCost, ProbeMapsGeometricFailuresToMarker) {
  const Scenario s = pair_at(3.0, 0.0);
  const MeasurementModel model(s);
  EXPECT_TRUE(probe_cost(pair_at(0.5, 0.0).initial_state, model, kBarrier).is_infinite());
  EXPECT_TRUE(probe_cost(pair_at(1.0, 0.0).initial_state, model, kBarrier).is_infinite());
  EXPECT_TRUE(probe_cost(make_preset("coincident").initial_state, model, kBarrier).is_infinite());
  EXPECT_THROW(evaluate_cost(pair_at(0.5, 0.0).initial_state, model, kBarrier), InfeasibleState);
}

TEST(Gradient, BarrierGradientMatchesDerivative) {
  // Only the barrier: reference distance r along x, gradient w.r.t. agent 2's
  // body-frame translation equals 2 * B'(r) times the unit direction.
  for (double r : {1.2, 1.5, 1.9}) {
    const Scenario s = pair_at(r, 0.0);
    const Vector g = tangent_gradient(
        s.initial_state, [](const StateTuple& x) { return Cost(j_col(x, kBarrier)); }, 1e-6);
    EXPECT_NEAR(g(0), 0.0, 1e-8);
    EXPECT_NEAR(g(1), 2.0 * oracle::barrier_derivative(r, 2.0, 1.0), 1e-6 * std::abs(g(1)));
    EXPECT_NEAR(g(2), 0.0, 1e-8);
  }
}

TEST(Gradient, DirectionalDerivative) {
  const Scenario s = make_preset("triangle3");
  const Vector g = gradient(s.initial_state, s);
  const Vector v = Vector::LinSpaced(g.size(), 0.5, -0.7).normalized();
  const double t = 1e-5;
  const double numeric =
      (j_total(oplus(s.initial_state, t * v), s).value() - j_total(oplus(s.initial_state, -t * v), s).value()) /
      (2.0 * t);
  EXPECT_NEAR(g.dot(v), numeric, 1e-5 * (1.0 + std::abs(numeric)));
}

TEST(Gradient, OneSidedNearInfiniteRegion) {
  // A cost that is finite only for non-negative first coordinate moves.
  const Scenario s = pair_at(3.0, 0.0);
  const StateTuple x0 = s.initial_state;
  auto cost = [&](const StateTuple& x) {
    const double dx = x.position(2)(0) - 3.0;
    if (dx < -1e-12) return Cost::infinite();
    return Cost(5.0 * dx);
  };
  const Vector g = tangent_gradient(x0, cost, 1e-6);
  EXPECT_NEAR(g(1), 5.0, 1e-6);
  auto nowhere = [](const StateTuple&) { return Cost::infinite(); };
  EXPECT_THROW(tangent_gradient(x0, nowhere, 1e-6), GradientError);
}

TEST(Descent, MonotoneAndSafe) {
  for (const char* name : {"pair2", "triangle3", "sparse", "heading3d"}) {
    const Scenario s = short_run(name, 150);
    const DescentResult r = descend(s);
    ASSERT_FALSE(r.trace.empty());
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      EXPECT_LE(r.trace[i].j_total.value(), r.trace[i - 1].j_total.value() + kAcceptSlack) << name << " " << i;
      for (double d : pairwise_distances(r.trace[i].state)) EXPECT_GT(d, s.optimizer.safety_radius);
    }
    EXPECT_EQ(r.trace.front().step_scale, 0.0);
  }
}

TEST(Descent, Deterministic) {
  const Scenario s = short_run("triangle3", 60);
  const DescentResult a = descend(s), b = descend(s);
  EXPECT_EQ(trace_csv(a.trace).str(), trace_csv(b.trace).str());
}

TEST(Descent, PairSettlesBetweenSafetyAndActivation) {
  const DescentResult r = descend(make_preset("pair2"));
  EXPECT_TRUE(r.converged);
  const double d = pairwise_distances(r.final_state).at(0);
  EXPECT_GT(d, 1.0);
  EXPECT_LT(d, 2.0);
}

TEST(Descent, NearLineImprovesEstimationCost) {
  const DescentResult r = descend(make_preset("line3"));
  EXPECT_TRUE(r.converged);
  EXPECT_GE(r.trace.front().j_est.value() - r.trace.back().j_est.value(), 5.0);
}

TEST(Descent, ZeroIterationBudgetReturnsStart) {
  const Scenario s = short_run("triangle3", 0);
  const DescentResult r = descend(s);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.final_state.pose(2).homogeneous(), s.initial_state.pose(2).homogeneous());
}

TEST(Trace, CsvLayout) {
  const DescentResult r = descend(short_run("pair2", 3));
  std::istringstream in(trace_csv(r.trace).str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iter,J_est,J_col,J_total,grad_norm,step_scale");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, static_cast<int>(r.trace.size()));
}

TEST(Trace, CheckpointIndices) {
  EXPECT_EQ(checkpoint_indices(101, 5), (std::vector<std::size_t>{0, 25, 50, 75, 100}));
  EXPECT_EQ(checkpoint_indices(3, 10), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(checkpoint_indices(7, 2), (std::vector<std::size_t>{0, 6}));
  EXPECT_TRUE(checkpoint_indices(0, 4).empty());
}

TEST(Trace, PairwiseDistancesIncludeReference) {
  const Scenario s = fixtures::two_tag_scenario(
      GroupMode::SE2, {fixtures::planar(GroupMode::SE2, 0.0, 3.0, 0.0), fixtures::planar(GroupMode::SE2, 0.0, 0.0, 4.0)});
  const auto d = pairwise_distances(s.initial_state);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_DOUBLE_EQ(d[0], 3.0);
  EXPECT_DOUBLE_EQ(d[1], 4.0);
  EXPECT_DOUBLE_EQ(d[2], 5.0);
}
