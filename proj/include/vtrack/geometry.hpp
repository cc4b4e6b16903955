#pragma once

// Pinhole camera and rigid camera-to-world transforms.
//
// Convention: a pose maps camera-frame points to the world frame,
// p_world = R * p_cam + t. No lens distortion.

#include <Eigen/Dense>

#include <cmath>

#include "vtrack/errors.hpp"

namespace vtrack {

template <typename Scalar = double>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar = double>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar = double>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar = double>
struct CameraIntrinsics {
  Scalar fx = Scalar(500);
  Scalar fy = Scalar(500);
  Scalar cx = Scalar(320);
  Scalar cy = Scalar(240);

  void validate() const { require(fx > Scalar(0) && fy > Scalar(0), "focal lengths must be > 0"); }
};

template <typename Scalar = double>
class RigidPose {
 public:
  RigidPose() : rotation_(Matrix3<Scalar>::Identity()), translation_(Vector3<Scalar>::Zero()) {}

  /// Throws ContractViolation unless `rotation` is orthonormal with det +1 (within 1e-9).
  RigidPose(const Matrix3<Scalar>& rotation, const Vector3<Scalar>& translation)
      : rotation_(rotation), translation_(translation) {
    const Scalar ortho_err = (rotation.transpose() * rotation - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff();
    require(ortho_err <= Scalar(1e-9), "pose rotation is not orthonormal");
    require(std::abs(rotation.determinant() - Scalar(1)) <= Scalar(1e-9), "pose rotation must have det = +1");
    require(translation.allFinite(), "pose translation must be finite");
  }

  const Matrix3<Scalar>& rotation() const { return rotation_; }
  const Vector3<Scalar>& translation() const { return translation_; }

  Vector3<Scalar> apply(const Vector3<Scalar>& p) const { return rotation_ * p + translation_; }
  Vector3<Scalar> apply_inverse(const Vector3<Scalar>& p) const { return rotation_.transpose() * (p - translation_); }

  /// (this ∘ inner)(p) = this(inner(p))
  RigidPose compose(const RigidPose& inner) const {
    RigidPose out;
    out.rotation_ = rotation_ * inner.rotation_;
    out.translation_ = rotation_ * inner.translation_ + translation_;
    return out;
  }

 private:
  Matrix3<Scalar> rotation_;
  Vector3<Scalar> translation_;
};

template <typename Scalar = double>
struct PixelObservation {
  Vector2<Scalar> pixel;
  Scalar depth;
};

template <typename Scalar>
Vector3<Scalar> back_project(const Vector2<Scalar>& px, Scalar depth, const CameraIntrinsics<Scalar>& k) {
  k.validate();
  require(depth > Scalar(0) && std::isfinite(depth), "back-projection depth must be > 0");
  return {(px.x() - k.cx) * depth / k.fx, (px.y() - k.cy) * depth / k.fy, depth};
}

template <typename Scalar>
Vector3<Scalar> transform_to_world(const Vector3<Scalar>& p_cam, const RigidPose<Scalar>& pose) {
  return pose.apply(p_cam);
}

template <typename Scalar>
PixelObservation<Scalar> project(const Vector3<Scalar>& p_world, const RigidPose<Scalar>& pose,
                                 const CameraIntrinsics<Scalar>& k) {
  k.validate();
  const Vector3<Scalar> pc = pose.apply_inverse(p_world);
  if (!(pc.z() > Scalar(0))) throw BehindCameraError("point is behind the camera (camera-frame z <= 0)");
  return {{k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy}, pc.z()};
}

/// Camera at `height` metres above the ground plane z = 0, looking straight
/// down, with image x along world +x and image y along world -y.
template <typename Scalar = double>
RigidPose<Scalar> nadir_pose(Scalar x, Scalar y, Scalar height) {
  Matrix3<Scalar> r = Matrix3<Scalar>::Zero();
  r(0, 0) = 1;
  r(1, 1) = -1;
  r(2, 2) = -1;
  return RigidPose<Scalar>(r, Vector3<Scalar>(x, y, height));
}

}  // namespace vtrack
