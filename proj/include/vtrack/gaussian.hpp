#pragma once

// Linear-Gaussian Kalman filter primitives.
//
// Every function here is pure: beliefs and models are values, nothing is
// mutated in place. Covariances leaving predict/update are symmetrized and
// small negative eigenvalues (>= -kPsdTolerance) are clamped to zero.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <string>

#include "vtrack/errors.hpp"

namespace vtrack {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kPsdTolerance = 1e-9;

template <typename Scalar = double>
struct GaussianBelief {
  VectorX<Scalar> mean;
  MatrixX<Scalar> covariance;

  Eigen::Index dim() const { return mean.size(); }
};

/// One motion/measurement hypothesis. `control` may have zero columns.
template <typename Scalar = double>
struct LinearGaussianModel {
  MatrixX<Scalar> transition;         // A, n x n
  MatrixX<Scalar> control;            // B, n x m
  MatrixX<Scalar> observation;        // H, p x n
  MatrixX<Scalar> process_noise;      // Q, n x n
  MatrixX<Scalar> measurement_noise;  // R, p x p

  Eigen::Index state_dim() const { return transition.rows(); }
  Eigen::Index measurement_dim() const { return observation.rows(); }
};

template <typename Scalar = double>
struct ControlInput {
  VectorX<Scalar> u;
};

template <typename Scalar = double>
struct Measurement {
  VectorX<Scalar> z;
  double timestamp = 0.0;
};

template <typename Scalar = double>
struct KalmanGain {
  MatrixX<Scalar> gain;  // n x p
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* name) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + name);
}

}  // namespace detail

template <typename Scalar>
void validate(const LinearGaussianModel<Scalar>& model) {
  const auto n = model.transition.rows();
  const auto p = model.observation.rows();
  require(model.transition.cols() == n, "transition matrix must be square");
  require(model.control.rows() == n || model.control.size() == 0,
          "control matrix row count must match state dimension");
  require(model.observation.cols() == n, "observation matrix column count must match state dimension");
  require(model.process_noise.rows() == n && model.process_noise.cols() == n,
          "process noise must be n x n");
  require(model.measurement_noise.rows() == p && model.measurement_noise.cols() == p,
          "measurement noise must be p x p");
}

template <typename Scalar>
void validate(const GaussianBelief<Scalar>& belief, Eigen::Index n) {
  require(belief.mean.size() == n, "belief mean dimension does not match model");
  require(belief.covariance.rows() == n && belief.covariance.cols() == n,
          "belief covariance dimension does not match model");
  detail::require_finite(belief.mean, "belief mean");
  detail::require_finite(belief.covariance, "belief covariance");
}

/// (P + Pᵀ)/2
template <typename Scalar>
MatrixX<Scalar> symmetrize(const MatrixX<Scalar>& p) {
  return (p + p.transpose()) * Scalar(0.5);
}

/// Symmetrizes and clamps eigenvalues in [-kPsdTolerance, 0) to zero. A more
/// negative eigenvalue means the filter has diverged and is reported.
template <typename Scalar>
MatrixX<Scalar> enforce_psd(const MatrixX<Scalar>& p) {
  MatrixX<Scalar> sym = symmetrize(p);
  if (sym.size() == 0) return sym;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
  const Scalar min_eig = eig.eigenvalues().minCoeff();
  if (min_eig >= Scalar(0)) return sym;
  if (min_eig < Scalar(-kPsdTolerance)) {
    throw NumericError("covariance is not positive semi-definite (min eigenvalue " +
                       std::to_string(static_cast<double>(min_eig)) + ")");
  }
  VectorX<Scalar> clamped = eig.eigenvalues().cwiseMax(Scalar(0));
  return symmetrize(MatrixX<Scalar>(eig.eigenvectors() * clamped.asDiagonal() *
                                    eig.eigenvectors().transpose()));
}

template <typename Scalar>
GaussianBelief<Scalar> predict(const GaussianBelief<Scalar>& belief,
                               const LinearGaussianModel<Scalar>& model,
                               const ControlInput<Scalar>& control) {
  validate(model);
  validate(belief, model.state_dim());
  require(control.u.size() == model.control.cols(), "control input dimension must match B's columns");
  detail::require_finite(control.u, "control input");

  GaussianBelief<Scalar> out;
  out.mean = model.transition * belief.mean;
  if (model.control.cols() > 0) out.mean += model.control * control.u;
  out.covariance = enforce_psd<Scalar>(model.transition * belief.covariance * model.transition.transpose() +
                                       model.process_noise);
  return out;
}

template <typename Scalar>
GaussianBelief<Scalar> predict(const GaussianBelief<Scalar>& belief,
                               const LinearGaussianModel<Scalar>& model) {
  return predict(belief, model, ControlInput<Scalar>{VectorX<Scalar>(model.control.cols()).setZero()});
}

/// Innovation ν = z − H·mean and its covariance S = H P Hᵀ + R, with S
/// factorized once so gain, likelihood and gating share it.
template <typename Scalar = double>
struct Innovation {
  VectorX<Scalar> residual;
  MatrixX<Scalar> covariance;
  Eigen::LLT<MatrixX<Scalar>> factor;

  /// νᵀ S⁻¹ ν
  Scalar mahalanobis_squared() const { return residual.dot(factor.solve(residual)); }

  Scalar log_likelihood() const {
    const auto p = static_cast<Scalar>(residual.size());
    const Scalar log_det = Scalar(2) * factor.matrixLLT().diagonal().array().log().sum();
    return Scalar(-0.5) * (mahalanobis_squared() + log_det + p * std::log(Scalar(2) * std::numbers::pi_v<Scalar>));
  }
};

template <typename Scalar>
MatrixX<Scalar> innovation_covariance(const GaussianBelief<Scalar>& prior,
                                      const LinearGaussianModel<Scalar>& model) {
  const auto& h = model.observation;
  return symmetrize<Scalar>(h * prior.covariance * h.transpose() + model.measurement_noise);
}

namespace detail {

template <typename Scalar>
Eigen::LLT<MatrixX<Scalar>> factor_innovation(const MatrixX<Scalar>& s) {
  Eigen::LLT<MatrixX<Scalar>> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericError("innovation covariance S = H P' H^T + R is not positive definite");
  }
  return llt;
}

}  // namespace detail

template <typename Scalar>
Innovation<Scalar> innovation(const GaussianBelief<Scalar>& prior, const Measurement<Scalar>& z,
                              const LinearGaussianModel<Scalar>& model) {
  validate(model);
  validate(prior, model.state_dim());
  require(z.z.size() == model.measurement_dim(), "measurement dimension must match H's rows");
  detail::require_finite(z.z, "measurement");
  Innovation<Scalar> out;
  out.residual = z.z - model.observation * prior.mean;
  out.covariance = innovation_covariance(prior, model);
  out.factor = detail::factor_innovation(out.covariance);
  return out;
}

namespace detail {

// K = P' Hᵀ S⁻¹, evaluated as (S⁻¹ H P')ᵀ since S and P' are symmetric.
template <typename Scalar>
MatrixX<Scalar> gain_from_factor(const GaussianBelief<Scalar>& prior, const LinearGaussianModel<Scalar>& model,
                                 const Eigen::LLT<MatrixX<Scalar>>& factor) {
  const MatrixX<Scalar> hp = model.observation * prior.covariance;
  return factor.solve(hp).transpose();
}

template <typename Scalar>
GaussianBelief<Scalar> apply_update(const GaussianBelief<Scalar>& prior, const LinearGaussianModel<Scalar>& model,
                                    const Innovation<Scalar>& inn) {
  const MatrixX<Scalar> k = gain_from_factor(prior, model, inn.factor);
  const auto n = model.state_dim();
  GaussianBelief<Scalar> out;
  out.mean = prior.mean + k * inn.residual;
  const MatrixX<Scalar> i_kh = MatrixX<Scalar>::Identity(n, n) - k * model.observation;
  out.covariance = enforce_psd<Scalar>(i_kh * prior.covariance);
  return out;
}

}  // namespace detail

template <typename Scalar>
KalmanGain<Scalar> kalman_gain(const GaussianBelief<Scalar>& prior, const LinearGaussianModel<Scalar>& model) {
  validate(model);
  validate(prior, model.state_dim());
  const auto factor = detail::factor_innovation(innovation_covariance(prior, model));
  return {detail::gain_from_factor(prior, model, factor)};
}

template <typename Scalar>
GaussianBelief<Scalar> update(const GaussianBelief<Scalar>& prior, const Measurement<Scalar>& z,
                              const LinearGaussianModel<Scalar>& model) {
  return detail::apply_update(prior, model, innovation(prior, z, model));
}

/// Gaussian density of the innovation under S. Always >= 0; may underflow to 0.
template <typename Scalar>
Scalar innovation_likelihood(const GaussianBelief<Scalar>& prior, const Measurement<Scalar>& z,
                             const LinearGaussianModel<Scalar>& model) {
  return std::exp(innovation(prior, z, model).log_likelihood());
}

}  // namespace vtrack
