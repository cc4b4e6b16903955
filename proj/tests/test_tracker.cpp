#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "vtrack/scenario_config.hpp"
#include "vtrack/tracker.hpp"

namespace {

using vtrack::FilterKind;
using vtrack::Measurement;
using vtrack::TrackerConfig;
using Eigen::Vector2d;

Measurement<double> at(double x, double y, double t = 0) { return {Vector2d(x, y), t}; }

struct Gating {
  vtrack::ImmPrediction<double> pred;
  Vector2d centre;
  Eigen::Matrix2d chol;  // lower factor of the innovation covariance
};

Gating prepare(FilterKind kind) {
  const TrackerConfig cfg;
  auto track = vtrack::start_track(1, at(1.0, 2.0), cfg, kind);
  auto pred = vtrack::imm_predict(track.bank, 0.05);
  const auto fused = pred.fused();
  const Eigen::MatrixXd h = pred.fused_observation();
  const Eigen::Matrix2d s = h * fused.covariance * h.transpose() + pred.bank.measurement_noise;
  return {pred, h * fused.mean, s.llt().matrixL()};
}

Measurement<double> at_distance(const Gating& g, double d, double angle) {
  return {g.centre + g.chol * Vector2d(d * std::cos(angle), d * std::sin(angle)), 0};
}

TEST(Gate, DetectionAtPredictionIsAssociated) {
  const auto g = prepare(FilterKind::kKalman);
  const std::vector<Measurement<double>> dets{{g.centre, 0}};
  const auto a = vtrack::gate_and_associate(g.pred, dets, 9.21);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->index, 0u);
  EXPECT_NEAR(a->mahalanobis_squared, 0.0, 1e-18);
}

TEST(Gate, OutsideGateRejected) {
  const auto g = prepare(FilterKind::kKalman);
  const std::vector<Measurement<double>> dets{at_distance(g, 5.0, 0.3)};
  EXPECT_FALSE(vtrack::gate_and_associate(g.pred, dets, 9.21));
  EXPECT_TRUE(vtrack::gate_and_associate(g.pred, dets, 25.5));
}

TEST(Gate, NearestWins) {
  const auto g = prepare(FilterKind::kKalman);
  const std::vector<Measurement<double>> dets{at_distance(g, 2.0, 1.0), at_distance(g, 1.0, -2.0)};
  const auto a = vtrack::gate_and_associate(g.pred, dets, 9.21);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->index, 1u);
  EXPECT_NEAR(a->mahalanobis_squared, 1.0, 1e-9);
}

TEST(Gate, EmptyListGivesNothing) {
  const auto g = prepare(FilterKind::kImm);
  EXPECT_FALSE(vtrack::gate_and_associate(g.pred, {}, 9.21));
}

TEST(Gate, PermutationInvariant) {
  vtrack::Rng rng(21);
  for (auto kind : {FilterKind::kKalman, FilterKind::kImm}) {
    const auto g = prepare(kind);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Measurement<double>> dets;
      const int n = 2 + trial % 6;
      for (int i = 0; i < n; ++i) dets.push_back(at_distance(g, 4.0 * rng.uniform(), 6.3 * rng.uniform()));
      if (trial % 4 == 0) dets.push_back(dets.front());  // exact duplicate
      const auto ref = vtrack::gate_and_associate(g.pred, dets, 9.21);
      std::vector<std::size_t> order(dets.size());
      std::iota(order.begin(), order.end(), 0);
      for (int shuffle = 0; shuffle < 5; ++shuffle) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
          std::swap(order[i], order[static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1))]);
        }
        std::vector<Measurement<double>> permuted;
        for (auto i : order) permuted.push_back(dets[i]);
        const auto got = vtrack::gate_and_associate(g.pred, permuted, 9.21);
        ASSERT_EQ(ref.has_value(), got.has_value());
        if (ref) {
          EXPECT_EQ(permuted[got->index].z, dets[ref->index].z);
          EXPECT_EQ(got->mahalanobis_squared, ref->mahalanobis_squared);
        }
      }
    }
  }
}

TEST(PipelineStep, CoastingGrowsCovarianceThenDrops) {
  TrackerConfig cfg;
  cfg.max_misses = 5;
  for (auto kind : {FilterKind::kKalman, FilterKind::kImm}) {
    auto track = vtrack::start_track(1, at(0, 0), cfg, kind);
    for (int k = 1; k <= 3; ++k) {
      const double t = 0.05 * k;
      track = vtrack::pipeline_step(track, std::vector{at(0.1 * t, 0, t)}, 0.05, cfg).track;
    }
    double trace = track.history.back().fused.covariance.trace();
    for (int miss = 1; miss <= 6; ++miss) {
      const auto out = vtrack::pipeline_step(track, std::span<const Measurement<double>>{}, 0.05, cfg);
      EXPECT_FALSE(out.report.association);
      EXPECT_EQ(out.track.consecutive_misses, miss);
      EXPECT_GT(out.track.history.back().fused.covariance.trace(), trace) << miss;
      EXPECT_EQ(out.report.dropped, miss > cfg.max_misses) << miss;
      trace = out.track.history.back().fused.covariance.trace();
      track = out.track;
    }
  }
}

TEST(PipelineStep, HitResetsMissCounter) {
  const TrackerConfig cfg;
  auto track = vtrack::start_track(1, at(0, 0), cfg, FilterKind::kImm);
  track = vtrack::pipeline_step(track, std::span<const Measurement<double>>{}, 0.05, cfg).track;
  EXPECT_EQ(track.consecutive_misses, 1);
  const auto out = vtrack::pipeline_step(track, std::vector{at(0, 0, 0.1)}, 0.05, cfg);
  EXPECT_TRUE(out.report.association);
  EXPECT_EQ(out.track.consecutive_misses, 0);
  EXPECT_DOUBLE_EQ(out.track.last_update, 0.1);
  EXPECT_GT(out.track.history.back().t, out.track.history[out.track.history.size() - 2].t);
}

TEST(PipelineStep, NoiselessConstantVelocityConverges) {
  TrackerConfig cfg;
  cfg.measurement_std = 1e-7;
  const Vector2d v(1.5, -0.7);
  const double dt = 0.05;
  for (auto kind : {FilterKind::kKalman, FilterKind::kImm}) {
    auto track = vtrack::start_track(1, at(2, 3), cfg, kind);
    for (int k = 1; k <= 10; ++k) {
      const Vector2d p = Vector2d(2, 3) + v * (k * dt);
      track = vtrack::pipeline_step(track, std::vector{Measurement<double>{p, k * dt}}, dt, cfg).track;
    }
    const auto& m = track.history.back().fused.mean;
    const Vector2d p = Vector2d(2, 3) + v * (10 * dt);
    EXPECT_LE(std::hypot(m(0) - p.x(), m(2) - p.y()), 1e-6) << vtrack::to_string(kind);
    EXPECT_LE(std::hypot(m(1) - v.x(), m(3) - v.y()), 1e-4) << vtrack::to_string(kind);
  }
}

TEST(PipelineStep, RejectsNonPositiveDt) {
  const TrackerConfig cfg;
  const auto track = vtrack::start_track(1, at(0, 0), cfg, FilterKind::kKalman);
  EXPECT_THROW(vtrack::pipeline_step(track, std::vector{at(0, 0)}, 0.0, cfg), vtrack::ContractViolation);
}

std::vector<vtrack::TrackPoint> points_with_errors(const std::vector<vtrack::GroundTruthSample>& truth,
                                                   const std::vector<double>& errors) {
  std::vector<vtrack::TrackPoint> history;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    vtrack::TrackPoint p;
    p.t = truth[k].t;
    p.fused.mean = Eigen::Vector4d(truth[k].position.x() + errors[k], 0, truth[k].position.y(), 0);
    p.fused.covariance = Eigen::Matrix4d::Identity();
    p.associated = true;
    history.push_back(p);
  }
  return history;
}

std::vector<vtrack::GroundTruthSample> line(int n, double dt) {
  std::vector<vtrack::GroundTruthSample> truth;
  for (int k = 0; k < n; ++k) truth.push_back({k * dt, Vector2d(0.3 * k, -0.1 * k), Vector2d(6, -2)});
  return truth;
}

TEST(ComputeMetrics, Arithmetic) {
  const auto truth = line(3, 0.05);
  const auto m = vtrack::compute_metrics(points_with_errors(truth, {1, 2, 3}), truth);
  EXPECT_DOUBLE_EQ(m.max_error, 3.0);
  EXPECT_NEAR(m.rmse, std::sqrt(14.0 / 3.0), 1e-15);
  const auto perfect = vtrack::compute_metrics(points_with_errors(truth, {0, 0, 0}), truth);
  EXPECT_EQ(perfect.max_error, 0.0);
  EXPECT_EQ(perfect.rmse, 0.0);
}

TEST(ComputeMetrics, RmseNeverExceedsMax) {
  vtrack::Rng rng(3);
  const auto truth = line(50, 0.1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> e;
    for (int k = 0; k < 50; ++k) e.push_back(rng.normal());
    const auto m = vtrack::compute_metrics(points_with_errors(truth, e), truth);
    EXPECT_LE(m.rmse, m.max_error);
    EXPECT_GE(m.rmse, 0.0);
  }
}

TEST(ComputeMetrics, MisalignedTimelines) {
  const auto truth = line(5, 0.05);
  auto history = points_with_errors(truth, {0, 0, 0});
  history[1].t += 0.02;
  EXPECT_THROW(vtrack::compute_metrics(history, truth), vtrack::ContractViolation);
  history = points_with_errors(truth, {0, 0, 0});
  history[2].t = 1.0;
  EXPECT_THROW(vtrack::compute_metrics(history, truth), vtrack::ContractViolation);
}

// Streaks of more than max_misses dropouts force a drop by design, so the
// suite counts only runs whose stream never has such a streak, and checks
// that every such streak does end the track.
TEST(RunTracker, SingleLiveTrackUnderDropout) {
  auto cfg = vtrack::load_scenario("moving-pillar", {"sensor.dropout_prob=0.2"});
  const auto truth = vtrack::simulate_trajectory(cfg.scenario);
  int clean_runs = 0;
  for (int run = 0; run < 100; ++run) {
    const auto z = vtrack::sense_all(truth, cfg.scenario.sensor, vtrack::derive_seed(500, run));
    int streak = 0, longest = 0;
    for (const auto& m : z) {
      streak = m ? 0 : streak + 1;
      longest = std::max(longest, streak);
    }
    for (auto kind : {FilterKind::kKalman, FilterKind::kImm}) {
      const auto result = vtrack::run_tracker(truth, z, cfg.tracker, kind);
      if (longest <= cfg.tracker.max_misses) {
        EXPECT_EQ(result.tracks_started, 1) << run;
        EXPECT_EQ(result.tracks_dropped, 0) << run;
      } else {
        EXPECT_GE(result.tracks_dropped, 1) << run;
      }
    }
    clean_runs += longest <= cfg.tracker.max_misses ? 1 : 0;
  }
  EXPECT_GE(clean_runs, 90);
}

TEST(RunTracker, ImmBeatsKalmanOnTurnPreset) {
  const auto cfg = vtrack::load_scenario("moving-platform-turn");
  const auto truth = vtrack::simulate_trajectory(cfg.scenario);
  const auto z = vtrack::sense_all(truth, cfg.scenario.sensor, vtrack::derive_seed(cfg.scenario.seed, 0));
  const auto kf = vtrack::run_tracker(truth, z, cfg.tracker, FilterKind::kKalman);
  const auto imm = vtrack::run_tracker(truth, z, cfg.tracker, FilterKind::kImm);
  EXPECT_LT(imm.metrics.max_error, kf.metrics.max_error);
  EXPECT_EQ(imm.tracks_started, 1);
  EXPECT_EQ(kf.tracks_started, 1);
}

TEST(FilterKind, NamesRoundTrip) {
  for (const char* name : {"kf", "imm"}) EXPECT_EQ(vtrack::to_string(*vtrack::parse_filter_kind(name)), name);
  EXPECT_FALSE(vtrack::parse_filter_kind("ukf"));
}

}  // namespace
