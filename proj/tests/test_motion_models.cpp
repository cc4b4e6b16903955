#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "vtrack/motion_models.hpp"
#include "vtrack/rng.hpp"

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double max_abs_diff(const MatrixXd& a, const MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Continuous-time generators for the oracles, in the library's state layouts.
MatrixXd cv_generator(int axes) {
  MatrixXd f = MatrixXd::Zero(2 * axes, 2 * axes);
  for (int a = 0; a < axes; ++a) f(2 * a, 2 * a + 1) = 1;
  return f;
}

MatrixXd cv_noise_input(int axes) {
  MatrixXd g = MatrixXd::Zero(2 * axes, axes);
  for (int a = 0; a < axes; ++a) g(2 * a + 1, a) = 1;
  return g;
}

MatrixXd ca_generator(int axes) {
  MatrixXd f = MatrixXd::Zero(3 * axes, 3 * axes);
  for (int a = 0; a < axes; ++a) {
    f(3 * a, 3 * a + 1) = 1;
    f(3 * a + 1, 3 * a + 2) = 1;
  }
  return f;
}

MatrixXd ca_noise_input(int axes) {
  MatrixXd g = MatrixXd::Zero(3 * axes, axes);
  for (int a = 0; a < axes; ++a) g(3 * a + 2, a) = 1;
  return g;
}

// [x, vx, y, vy] with dvx/dt = -w vy, dvy/dt = w vx.
MatrixXd ct_generator(double w) {
  MatrixXd f = MatrixXd::Zero(4, 4);
  f(0, 1) = 1;
  f(1, 3) = -w;
  f(2, 3) = 1;
  f(3, 1) = w;
  return f;
}

TEST(CvModel, TransitionAndNoise) {
  const auto m = vtrack::cv_model(1.0, 1.0, 1);
  MatrixXd a(2, 2), q(2, 2);
  a << 1, 1, 0, 1;
  q << 1.0 / 3, 0.5, 0.5, 1;
  EXPECT_EQ(m.transition, a);
  EXPECT_LE(max_abs_diff(m.process_noise, q), 1e-15);
  EXPECT_EQ(vtrack::cv_model(0.5, 1.0, 1).transition(0, 1), 0.5);
}

TEST(CvModel, NoiseMatchesQuadrature) {
  for (double dt : {0.05, 0.5, 1.0, 3.0}) {
    const auto m = vtrack::cv_model(dt, 2.0, 2);
    EXPECT_LE(max_abs_diff(m.process_noise, oracle::discretized_noise(cv_generator(2), cv_noise_input(2), 2.0, dt)),
              1e-10 * std::max(1.0, dt * dt * dt));
  }
}

TEST(CvModel, ObservationSelectsPositions) {
  const auto m = vtrack::cv_model(1.0, 1.0, 2);
  MatrixXd h = MatrixXd::Zero(2, 4);
  h(0, 0) = 1;
  h(1, 2) = 1;
  EXPECT_EQ(m.observation, h);
}

TEST(CvModel, RejectsBadArguments) {
  EXPECT_THROW(vtrack::cv_model(0.0, 1.0), vtrack::ContractViolation);
  EXPECT_THROW(vtrack::cv_model(1.0, -1.0), vtrack::ContractViolation);
  EXPECT_THROW(vtrack::cv_model(1.0, 1.0, 3), vtrack::ContractViolation);
}

TEST(CaModel, TransitionAndKinematics) {
  const auto m = vtrack::ca_model(1.0, 1.0, 1);
  MatrixXd a(3, 3);
  a << 1, 1, 0.5, 0, 1, 1, 0, 0, 1;
  EXPECT_EQ(m.transition, a);
  const VectorXd x = m.transition * VectorXd::Unit(3, 2) * 2.0;
  EXPECT_EQ(x(0), 1.0);
  EXPECT_EQ(x(1), 2.0);
}

TEST(CaModel, NoiseMatchesQuadrature) {
  for (double dt : {0.05, 1.0, 2.0}) {
    const auto m = vtrack::ca_model(dt, 1.0, 2);
    EXPECT_LE(max_abs_diff(m.process_noise, oracle::discretized_noise(ca_generator(2), ca_noise_input(2), 1.0, dt)),
              1e-10 * std::max(1.0, std::pow(dt, 5)));
  }
}

TEST(CtModel, QuarterTurnByHand) {
  const auto m = vtrack::ct_model(1.0, std::numbers::pi / 2, 0.0);
  const VectorXd x = m.transition * VectorXd::Unit(4, 1);
  EXPECT_NEAR(x(0), 2 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(x(1), 0.0, 1e-15);
  EXPECT_NEAR(x(2), 2 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(x(3), 1.0, 1e-15);
}

TEST(CtModel, TransitionMatchesRk4) {
  vtrack::Rng rng(3);
  for (double w : {0.5, -0.5, 1.5, 1e-3}) {
    VectorXd x0(4);
    for (int i = 0; i < 4; ++i) x0(i) = rng.normal();
    const auto m = vtrack::ct_model(0.7, w, 1.0);
    EXPECT_LE((m.transition * x0 - oracle::rk4(ct_generator(w), x0, 0.7, 2000)).cwiseAbs().maxCoeff(), 1e-11);
  }
}

TEST(CtModel, NoiseMatchesQuadrature) {
  for (double w : {0.5, -1.0, 2.0}) {
    for (double dt : {0.05, 1.0}) {
      const auto m = vtrack::ct_model(dt, w, 1.5);
      EXPECT_LE(max_abs_diff(m.process_noise, oracle::discretized_noise(ct_generator(w), cv_noise_input(2), 1.5, dt)),
                1e-10)
          << "w=" << w << " dt=" << dt;
    }
  }
}

TEST(CtModel, PreservesSpeed) {
  vtrack::Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    VectorXd x(4);
    for (int j = 0; j < 4; ++j) x(j) = 10 * rng.normal();
    const auto m = vtrack::ct_model(0.1 + rng.uniform(), 4 * rng.uniform() - 2 + 1e-3, 1.0);
    const VectorXd y = m.transition * x;
    EXPECT_NEAR(std::hypot(y(1), y(3)), std::hypot(x(1), x(3)), 1e-12 * std::max(1.0, std::hypot(x(1), x(3))));
  }
}

TEST(CtModel, SmallTurnRateApproachesCv) {
  const auto ct = vtrack::ct_model(1.0, 1e-9, 1.0);
  const auto cv = vtrack::cv_model(1.0, 1.0, 2);
  EXPECT_LE(max_abs_diff(ct.transition, cv.transition), 1e-6);
  EXPECT_LE(max_abs_diff(ct.process_noise, cv.process_noise), 1e-6);
}

TEST(CtModel, RejectsZeroTurnRate) { EXPECT_THROW(vtrack::ct_model(1.0, 0.0, 1.0), vtrack::ContractViolation); }

TEST(CtModel, CircleInvariant) {
  const double w = 0.4;
  const auto m = vtrack::ct_model(0.25, w, 0.0);
  VectorXd x(4);
  x << 1, 3, -2, 4;
  const double radius = std::hypot(x(1), x(3)) / std::abs(w);
  // Centre sits a radius to the left of the velocity for w > 0.
  const Eigen::Vector2d centre(x(0) - x(3) / w, x(2) + x(1) / w);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    x = m.transition * x;
    worst = std::max(worst, std::abs(std::hypot(x(0) - centre.x(), x(2) - centre.y()) - radius));
  }
  EXPECT_LE(worst, 1e-9);
}

class Semigroup : public ::testing::TestWithParam<vtrack::MotionKind> {};

TEST_P(Semigroup, TransitionsCompose) {
  const auto build = [&](double dt) {
    return vtrack::build_model<double>({GetParam(), dt, 1.0, 0.8, 2}).transition;
  };
  for (auto [a, b] : {std::pair{0.1, 0.2}, {0.5, 1.5}, {1.0, 3.0}}) {
    EXPECT_LE(max_abs_diff(build(a) * build(b), build(a + b)), 1e-10);
  }
}

TEST_P(Semigroup, NoisePsdOverRange) {
  for (double dt = 0.01; dt <= 10.0; dt *= 1.3) {
    const MatrixXd q = vtrack::build_model<double>({GetParam(), dt, 1.0, 0.8, 2}).process_noise;
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(q);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12 * q.norm()) << "dt=" << dt;
    EXPECT_LE(max_abs_diff(q, q.transpose()), 0.0);
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, Semigroup,
                         ::testing::Values(vtrack::MotionKind::kConstantVelocity,
                                           vtrack::MotionKind::kConstantAcceleration,
                                           vtrack::MotionKind::kCoordinatedTurn));

TEST(MotionKind, NamesRoundTrip) {
  for (const char* name : {"cv", "ca", "ct"}) EXPECT_EQ(vtrack::to_string(*vtrack::parse_motion_kind(name)), name);
  EXPECT_FALSE(vtrack::parse_motion_kind("singer"));
}

}  // namespace
