#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "formation/errors.hpp"
#include "formation/fisher.hpp"
#include "formation/presets.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace formation;

namespace {

Scenario with_sigma(Scenario s, double sigma) {
  s.graph = fully_connected_graph(s.tags, sigma);
  return s;
}

Scenario with_state(Scenario s, StateTuple x) {
  s.initial_state = std::move(x);
  return s;
}

Matrix oracle_fim(const Scenario& s) {
  const MeasurementModel model(s);
  const Matrix h = oracle::numeric_jacobian(model, s.initial_state, 1e-6);
  const Vector w = model.sigmas().array().square().inverse();
  return h.transpose() * w.asDiagonal() * h;
}

}  // namespace

TEST(Fim, PairIsFullRank) {
  const Scenario s = make_preset("pair2");
  const FisherInfo info = fim(s.initial_state, s);
  EXPECT_EQ(info.rank, 3);
  EXPECT_TRUE(info.full_rank());
  EXPECT_TRUE(j_est(info).is_finite());
  EXPECT_EQ(info.null_space.cols(), 0);
}

TEST(Fim, MatchesFiniteDifferenceInformation) {
  for (const char* name : {"triangle3", "heading3d", "experiment"}) {
    const Scenario s = make_preset(name);
    const Matrix lib = fim(s.initial_state, s).matrix;
    const Matrix ref = oracle_fim(s);
    EXPECT_LT((lib - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff(), 1e-7) << name;
  }
}

TEST(Fim, SymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const StateTuple x = oracle::random_state(GroupMode::SE3, 4, rng);
    const Scenario s = fixtures::two_tag_scenario(GroupMode::SE3, x.poses());
    const Matrix f = fim(x, s).matrix;
    EXPECT_EQ(f, f.transpose());
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(f).eigenvalues()(0), -1e-9 * f.norm());
  }
}

TEST(Fim, LogDetMatchesDeterminant) {
  const Scenario s = make_preset("triangle3");
  const FisherInfo info = fim(s.initial_state, s);
  EXPECT_NEAR(*info.log_det, std::log(info.matrix.determinant()), 1e-9);
  EXPECT_DOUBLE_EQ(j_est(info).value(), -*info.log_det);
}

TEST(Fim, CollinearTagsAreUnobservable) {
  const Scenario s = make_preset("collinear");
  const MeasurementModel model(s);
  const FisherInfo info = fim(s.initial_state, model);
  EXPECT_LT(info.rank, 3);
  EXPECT_FALSE(info.full_rank());
  EXPECT_TRUE(j_est(info).is_infinite());
  const Vector v = null_direction(info);
  EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  const Matrix h = model.stack_jacobian(s.initial_state);
  EXPECT_LT((h * v).norm(), 1e-8 * h.jacobiSvd().singularValues()(0));
  EXPECT_THROW(fim_inverse(info), ObservabilityError);
  EXPECT_THROW(crlb(s.initial_state, model), ObservabilityError);
}

TEST(Fim, ObservabilityErrorCarriesNullDirection) {
  const Scenario s = make_preset("collinear");
  try {
    fim_inverse(fim(s.initial_state, s));
    FAIL();
  } catch (const ObservabilityError& e) {
    EXPECT_NEAR(e.null_direction().norm(), 1.0, 1e-12);
  }
}

TEST(Fim, NullDirectionRefusedWhenFullRank) {
  const Scenario s = make_preset("pair2");
  EXPECT_THROW(null_direction(fim(s.initial_state, s)), InvalidArgument);
}

TEST(Fim, TwoTagAgentsCannotSeeRollAboutTheirTagAxis) {
  // Full SE(3): spinning an agent about the line through its two tags moves
  // neither tag. Agent 1's own axis adds a third, formation-wide direction.
  const Scenario s = fixtures::three_agent(GroupMode::SE3);
  const FisherInfo info = fim(s.initial_state, s);
  EXPECT_EQ(info.rank, 9);
  const MeasurementModel model(s);
  const Matrix h = model.stack_jacobian(s.initial_state);
  for (int a = 0; a < 2; ++a) {
    Vector v = Vector::Zero(12);
    v(6 * a + 1) = 1.0;                        // rotation about body y
    v.segment(6 * a + 3, 3) << 0.0, 0.0, 0.2;  // cancels the swing of x = 0.2
    EXPECT_LT((h * v).norm(), 1e-12);
  }
}

TEST(Fim, SigmaScaling) {
  const Scenario base = make_preset("triangle3");
  const Scenario doubled = with_sigma(base, 0.2);
  const FisherInfo a = fim(base.initial_state, base);
  const FisherInfo b = fim(doubled.initial_state, doubled);
  EXPECT_LT((a.matrix / 4.0 - b.matrix).cwiseAbs().maxCoeff(), 1e-12 * a.matrix.cwiseAbs().maxCoeff());
  const int dim = 3 * (base.agent_count - 1);
  EXPECT_NEAR(j_est(b).value() - j_est(a).value(), 2.0 * dim * std::log(2.0), 1e-9);
}

TEST(Fim, InverseIsInverse) {
  const Scenario s = make_preset("heading3d");
  const FisherInfo info = fim(s.initial_state, s);
  const Matrix inv = fim_inverse(info);
  const Matrix eye = info.matrix * inv;
  EXPECT_LT((eye - Matrix::Identity(eye.rows(), eye.cols())).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Fim, EdgeOrderDoesNotMatter) {
  // Same tags, graph listed through a different tag numbering.
  Scenario s = make_preset("triangle3");
  const Cost before = j_est(s.initial_state, s);
  std::vector<Edge> edges = s.graph.edges();
  std::reverse(edges.begin(), edges.end());
  s.graph = MeasurementGraph(edges);
  EXPECT_DOUBLE_EQ(j_est(s.initial_state, s).value(), before.value());
}

TEST(Fim, MoreEdgesNeverHurt) {
  const Scenario full = make_preset("square4");
  const Scenario ring = with_state(make_preset("sparse"), full.initial_state);
  EXPECT_LT(full.graph.size(), 25u);
  EXPECT_GT(full.graph.size(), ring.graph.size());
  EXPECT_LE(j_est(full.initial_state, full), j_est(ring.initial_state, ring));
}

TEST(Fim, TriangleBeatsLine) {
  const Scenario tri = make_preset("triangle3");
  const double side = (tri.initial_state.position(2) - tri.initial_state.position(3)).norm();
  const Scenario line = with_state(tri, near_line_state(GroupMode::SE2, 3, side));
  EXPECT_LT(j_est(tri.initial_state, tri), j_est(line.initial_state, line));
}

TEST(Crlb, EllipseGeometry) {
  const Scenario s = make_preset("triangle3");
  const MeasurementModel model(s);
  const auto ellipses = crlb(s.initial_state, model);
  ASSERT_EQ(ellipses.size(), 2u);
  const Matrix inv = fim_inverse(fim(s.initial_state, model));
  for (const CrlbEllipse& e : ellipses) {
    EXPECT_EQ(e.contour.size(), static_cast<std::size_t>(kContourPoints));
    EXPECT_EQ(e.center, s.initial_state.position(e.agent_id));
    const Matrix c = s.initial_state.pose(e.agent_id).rotation();
    const Matrix block = inv.block(3 * (e.agent_id - 2) + 1, 3 * (e.agent_id - 2) + 1, 2, 2);
    EXPECT_LT((e.covariance - c * block * c.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    const Matrix cov_inv = e.covariance.inverse();
    for (const Vector& p : e.contour) {
      const Vector d = p - e.center;
      EXPECT_NEAR(d.dot(cov_inv * d), 1.0, 1e-9);
    }
  }
}

TEST(Crlb, AxesScaleWithSigma) {
  const Scenario a = make_preset("triangle3");
  const Scenario b = with_sigma(a, 0.3);
  const auto ea = crlb(a.initial_state, a), eb = crlb(b.initial_state, b);
  for (std::size_t i = 0; i < ea.size(); ++i) {
    EXPECT_NEAR(eb[i].area() / ea[i].area(), 9.0, 1e-9);
    EXPECT_NEAR(eb[i].eccentricity(), ea[i].eccentricity(), 1e-9);
  }
}

TEST(Crlb, NearCollinearIsEccentric) {
  Scenario s = make_preset("collinear");
  s.initial_state = StateTuple(GroupMode::SE2, {fixtures::planar(GroupMode::SE2, 0.05, 0.0, 3.0)});
  const auto e = crlb(s.initial_state, s);
  EXPECT_GT(e.at(0).eccentricity(), 10.0);
}

TEST(Crlb, ThreeDimensionalContourSpansLargestAxes) {
  const Scenario s = make_preset("heading3d");
  for (const CrlbEllipse& e : crlb(s.initial_state, s)) {
    ASSERT_EQ(e.covariance.rows(), 3);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(e.covariance);
    const Vector smallest = eig.eigenvectors().col(0);
    for (const Vector& p : e.contour) EXPECT_NEAR((p - e.center).dot(smallest), 0.0, 1e-12);
  }
}
