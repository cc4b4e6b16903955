#pragma once

// Discrete-time motion hypotheses with exact continuous white-noise
// discretization of the process noise.
//
// State layouts per axis count:
//   cv: [x, vx]            / [x, vx, y, vy]
//   ca: [x, vx, ax]        / [x, vx, ax, y, vy, ay]
//   ct: [x, vx, y, vy]     (always planar, turn rate fixed per model)
// The observation matrix selects the position components.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "vtrack/gaussian.hpp"

namespace vtrack {

enum class MotionKind { kConstantVelocity, kConstantAcceleration, kCoordinatedTurn };

inline std::string_view to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::kConstantVelocity: return "cv";
    case MotionKind::kConstantAcceleration: return "ca";
    case MotionKind::kCoordinatedTurn: return "ct";
  }
  return "?";
}

inline std::optional<MotionKind> parse_motion_kind(std::string_view name) {
  if (name == "cv") return MotionKind::kConstantVelocity;
  if (name == "ca") return MotionKind::kConstantAcceleration;
  if (name == "ct") return MotionKind::kCoordinatedTurn;
  return std::nullopt;
}

template <typename Scalar = double>
struct MotionModelSpec {
  MotionKind kind = MotionKind::kConstantVelocity;
  Scalar dt = Scalar(1);
  Scalar q = Scalar(1);           // continuous white-noise intensity
  Scalar turn_rate = Scalar(0);   // rad/s, ct only
  int axes = 2;
};

/// Per-axis state dimension (order of the kinematic chain).
inline int per_axis_order(MotionKind kind) {
  return kind == MotionKind::kConstantAcceleration ? 3 : 2;
}

namespace detail {

template <typename Scalar>
void check_motion_args(Scalar dt, Scalar q, int axes) {
  require(dt > Scalar(0), "motion model dt must be > 0");
  require(q >= Scalar(0), "process intensity q must be >= 0");
  require(axes == 1 || axes == 2, "axes must be 1 or 2");
}

template <typename Scalar>
MatrixX<Scalar> block_diag(const MatrixX<Scalar>& block, int copies) {
  const auto b = block.rows();
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(b * copies, b * copies);
  for (int i = 0; i < copies; ++i) out.block(i * b, i * b, b, b) = block;
  return out;
}

template <typename Scalar>
MatrixX<Scalar> position_selector(int order, int axes) {
  MatrixX<Scalar> h = MatrixX<Scalar>::Zero(axes, order * axes);
  for (int a = 0; a < axes; ++a) h(a, a * order) = Scalar(1);
  return h;
}

// x - sin(x), accurate near zero.
template <typename Scalar>
Scalar x_minus_sin(Scalar x) {
  if (std::abs(x) < Scalar(0.1)) {
    const Scalar x2 = x * x;
    // x^3/3! - x^5/5! + x^7/7! - x^9/9! + x^11/11!
    return x * x2 *
           (Scalar(1) / 6 -
            x2 * (Scalar(1) / 120 - x2 * (Scalar(1) / 5040 - x2 * (Scalar(1) / 362880 - x2 / 39916800))));
  }
  return x - std::sin(x);
}

// 1 - cos(x) without cancellation.
template <typename Scalar>
Scalar one_minus_cos(Scalar x) {
  const Scalar s = std::sin(x / 2);
  return Scalar(2) * s * s;
}

}  // namespace detail

/// Constant velocity. Per axis A = [[1, dt], [0, 1]], Q = q [[dt³/3, dt²/2], [dt²/2, dt]].
template <typename Scalar = double>
LinearGaussianModel<Scalar> cv_model(Scalar dt, Scalar q, int axes = 2, Scalar measurement_var = Scalar(1)) {
  detail::check_motion_args(dt, q, axes);
  MatrixX<Scalar> a(2, 2);
  a << 1, dt, 0, 1;
  MatrixX<Scalar> qb(2, 2);
  qb << dt * dt * dt / 3, dt * dt / 2, dt * dt / 2, dt;
  const int n = 2 * axes;
  return {detail::block_diag<Scalar>(a, axes), MatrixX<Scalar>(n, 0), detail::position_selector<Scalar>(2, axes),
          detail::block_diag<Scalar>(MatrixX<Scalar>(q * qb), axes),
          MatrixX<Scalar>::Identity(axes, axes) * measurement_var};
}

/// Constant acceleration with white-noise jerk.
template <typename Scalar = double>
LinearGaussianModel<Scalar> ca_model(Scalar dt, Scalar q, int axes = 2, Scalar measurement_var = Scalar(1)) {
  detail::check_motion_args(dt, q, axes);
  const Scalar dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
  MatrixX<Scalar> a(3, 3);
  a << 1, dt, dt2 / 2, 0, 1, dt, 0, 0, 1;
  MatrixX<Scalar> qb(3, 3);
  qb << dt5 / 20, dt4 / 8, dt3 / 6,
        dt4 / 8, dt3 / 3, dt2 / 2,
        dt3 / 6, dt2 / 2, dt;
  const int n = 3 * axes;
  return {detail::block_diag<Scalar>(a, axes), MatrixX<Scalar>(n, 0), detail::position_selector<Scalar>(3, axes),
          detail::block_diag<Scalar>(MatrixX<Scalar>(q * qb), axes),
          MatrixX<Scalar>::Identity(axes, axes) * measurement_var};
}

/// Coordinated turn with known rate `omega` over [x, vx, y, vy]. The
/// process noise is the exact discretization of isotropic white
/// acceleration driven through the rotating dynamics.
template <typename Scalar = double>
LinearGaussianModel<Scalar> ct_model(Scalar dt, Scalar omega, Scalar q, Scalar measurement_var = Scalar(1)) {
  detail::check_motion_args(dt, q, 2);
  require(omega != Scalar(0) && std::isfinite(omega), "coordinated turn needs a finite nonzero turn rate; use cv");
  const Scalar wt = omega * dt;
  const Scalar s = std::sin(wt), c = std::cos(wt);
  const Scalar sw = s / omega;                          // sin(wt)/w
  const Scalar cw = detail::one_minus_cos(wt) / omega;  // (1-cos(wt))/w

  MatrixX<Scalar> a(4, 4);
  a << 1, sw, 0, -cw,
       0, c, 0, -s,
       0, cw, 1, sw,
       0, s, 0, c;

  const Scalar w2 = omega * omega;
  const Scalar pp = Scalar(2) * detail::x_minus_sin(wt) / (w2 * omega);
  const Scalar pv = detail::one_minus_cos(wt) / w2;
  const Scalar cross = detail::x_minus_sin(wt) / w2;
  MatrixX<Scalar> qm(4, 4);
  qm << pp, pv, 0, cross,
        pv, dt, -cross, 0,
        0, -cross, pp, pv,
        cross, 0, pv, dt;

  return {a, MatrixX<Scalar>(4, 0), detail::position_selector<Scalar>(2, 2), MatrixX<Scalar>(q * qm),
          MatrixX<Scalar>::Identity(2, 2) * measurement_var};
}

template <typename Scalar = double>
LinearGaussianModel<Scalar> build_model(const MotionModelSpec<Scalar>& spec, Scalar measurement_var = Scalar(1)) {
  switch (spec.kind) {
    case MotionKind::kConstantVelocity: return cv_model(spec.dt, spec.q, spec.axes, measurement_var);
    case MotionKind::kConstantAcceleration: return ca_model(spec.dt, spec.q, spec.axes, measurement_var);
    case MotionKind::kCoordinatedTurn:
      require(spec.axes == 2, "coordinated turn is planar (axes = 2)");
      return ct_model(spec.dt, spec.turn_rate, spec.q, measurement_var);
  }
  throw ContractViolation("unknown motion kind");
}

}  // namespace vtrack
