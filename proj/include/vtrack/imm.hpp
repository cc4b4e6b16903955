#pragma once

// Interacting multiple-model estimator over a bank of linear Kalman filters.
//
// One cycle is mix -> per-mode predict/update -> mode probability update ->
// moment-matched combination. Modes with different state layouts (cv/ct on
// [x, vx, y, vy], ca on [x, vx, ax, y, vy, ay]) are mixed in the union
// layout. A component a source mode lacks is filled either from the
// receiving mode's own estimate (default) or with zero mean and
// `padding_variance`. The fused output lives on the components every mode
// shares.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "vtrack/gaussian.hpp"
#include "vtrack/motion_models.hpp"

namespace vtrack {

inline constexpr double kLikelihoodFloor = 1e-300;
inline constexpr double kDefaultPaddingVariance = 1e6;

/// How a component missing from a source mode enters the mixture of a
/// receiving mode that has it.
enum class MissingFill { kOwnEstimate, kPadding };

/// Maps each component of a mode's state to its index in the union layout.
using StateEmbedding = std::vector<Eigen::Index>;

/// Union layout is [x, vx, ax] per axis; cv and ct omit the acceleration.
inline StateEmbedding union_embedding(MotionKind kind, int axes) {
  StateEmbedding e;
  for (int a = 0; a < axes; ++a) {
    e.push_back(3 * a);
    e.push_back(3 * a + 1);
    if (kind == MotionKind::kConstantAcceleration) e.push_back(3 * a + 2);
  }
  return e;
}

template <typename Scalar = double>
struct ImmMode {
  MotionModelSpec<Scalar> motion;
  GaussianBelief<Scalar> belief;
};

template <typename Scalar = double>
struct ImmBank {
  std::vector<ImmMode<Scalar>> modes;
  VectorX<Scalar> probabilities;      // mu, length M
  MatrixX<Scalar> transition;         // pi, M x M, row-stochastic
  MatrixX<Scalar> measurement_noise;  // R shared by all modes
  MissingFill missing_fill = MissingFill::kOwnEstimate;
  Scalar padding_variance = Scalar(kDefaultPaddingVariance);

  std::size_t size() const { return modes.size(); }
};

template <typename Scalar>
void validate_probabilities(const VectorX<Scalar>& mu) {
  require(mu.size() >= 1, "mode probabilities must be non-empty");
  require((mu.array() >= Scalar(0)).all() && (mu.array() <= Scalar(1)).all(),
          "mode probabilities must lie in [0, 1]");
  require(std::abs(mu.sum() - Scalar(1)) <= Scalar(1e-9), "mode probabilities must sum to 1");
}

template <typename Scalar>
void validate_transition(const MatrixX<Scalar>& pi) {
  require(pi.rows() == pi.cols() && pi.rows() >= 1, "transition matrix must be square");
  require((pi.array() >= Scalar(0)).all() && (pi.array() <= Scalar(1)).all(),
          "transition probabilities must lie in [0, 1]");
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    require(std::abs(pi.row(i).sum() - Scalar(1)) <= Scalar(1e-12), "transition matrix rows must sum to 1");
  }
}

/// `self` on the diagonal, the remainder spread uniformly over other modes.
template <typename Scalar = double>
MatrixX<Scalar> uniform_switching(Eigen::Index modes, Scalar self = Scalar(0.95)) {
  require(modes >= 1, "need at least one mode");
  if (modes == 1) return MatrixX<Scalar>::Ones(1, 1);
  MatrixX<Scalar> pi = MatrixX<Scalar>::Constant(modes, modes, (Scalar(1) - self) / Scalar(modes - 1));
  pi.diagonal().setConstant(self);
  return pi;
}

template <typename Scalar>
StateEmbedding embedding_of(const ImmMode<Scalar>& mode) {
  return union_embedding(mode.motion.kind, mode.motion.axes);
}

template <typename Scalar = double>
struct MixResult {
  std::vector<GaussianBelief<Scalar>> mixed;
  VectorX<Scalar> predicted_probabilities;  // c_j = sum_i pi_ij mu_i
  std::vector<bool> degenerate;             // c_j == 0, mixed_j is the mode's own prior
  bool any_degenerate() const { return std::find(degenerate.begin(), degenerate.end(), true) != degenerate.end(); }
};

namespace detail {

// Belief of `source` re-expressed on the components of `to`. Missing
// components come from `own` (the receiving mode's belief, uncorrelated with
// the rest) when given, else zero mean and `padding_variance`.
template <typename Scalar>
GaussianBelief<Scalar> reexpress(const GaussianBelief<Scalar>& source, const StateEmbedding& from,
                                 const StateEmbedding& to, Scalar padding_variance,
                                 const GaussianBelief<Scalar>* own = nullptr) {
  const auto n = static_cast<Eigen::Index>(to.size());
  std::vector<Eigen::Index> where(to.size(), -1);
  for (std::size_t t = 0; t < to.size(); ++t) {
    auto it = std::find(from.begin(), from.end(), to[t]);
    if (it != from.end()) where[t] = it - from.begin();
  }
  GaussianBelief<Scalar> out{VectorX<Scalar>::Zero(n), MatrixX<Scalar>::Zero(n, n)};
  for (Eigen::Index r = 0; r < n; ++r) {
    if (where[r] < 0) {
      if (own == nullptr) {
        out.covariance(r, r) = padding_variance;
        continue;
      }
      out.mean(r) = own->mean(r);
      for (Eigen::Index c = 0; c < n; ++c) {
        if (where[c] < 0) out.covariance(r, c) = own->covariance(r, c);
      }
      continue;
    }
    out.mean(r) = source.mean(where[r]);
    for (Eigen::Index c = 0; c < n; ++c) {
      if (where[c] >= 0) out.covariance(r, c) = source.covariance(where[r], where[c]);
    }
  }
  return out;
}

template <typename Scalar>
StateEmbedding identity_embedding(Eigen::Index n) {
  StateEmbedding e(static_cast<std::size_t>(n));
  std::iota(e.begin(), e.end(), Eigen::Index{0});
  return e;
}

}  // namespace detail

/// Interaction step. `embeddings` may be empty when all beliefs share one layout.
template <typename Scalar>
MixResult<Scalar> mix(std::span<const GaussianBelief<Scalar>> beliefs, const VectorX<Scalar>& mu,
                      const MatrixX<Scalar>& pi, std::span<const StateEmbedding> embeddings = {},
                      MissingFill fill = MissingFill::kOwnEstimate,
                      Scalar padding_variance = Scalar(kDefaultPaddingVariance)) {
  const auto m = static_cast<Eigen::Index>(beliefs.size());
  require(m >= 1 && mu.size() == m && pi.rows() == m, "mode count mismatch between beliefs, mu and pi");
  validate_probabilities(mu);
  validate_transition(pi);
  std::vector<StateEmbedding> emb;
  if (embeddings.empty()) {
    for (const auto& b : beliefs) {
      require(b.dim() == beliefs.front().dim(), "beliefs of different dimension need explicit embeddings");
      emb.push_back(detail::identity_embedding<Scalar>(b.dim()));
    }
  } else {
    require(static_cast<Eigen::Index>(embeddings.size()) == m, "one embedding per mode required");
    emb.assign(embeddings.begin(), embeddings.end());
  }

  MixResult<Scalar> out;
  out.predicted_probabilities = pi.transpose() * mu;
  out.degenerate.assign(static_cast<std::size_t>(m), false);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const Scalar cj = out.predicted_probabilities(j);
    if (!(cj > Scalar(0))) {
      out.degenerate[jj] = true;
      out.mixed.push_back(beliefs[jj]);
      continue;
    }
    std::vector<GaussianBelief<Scalar>> sources;
    sources.reserve(beliefs.size());
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const auto* own = fill == MissingFill::kOwnEstimate ? &beliefs[jj] : nullptr;
      sources.push_back(i == j ? beliefs[ii]
                               : detail::reexpress(beliefs[ii], emb[ii], emb[jj], padding_variance, own));
    }
    const auto n = beliefs[jj].dim();
    VectorX<Scalar> mean = VectorX<Scalar>::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Scalar w = pi(i, j) * mu(i) / cj;
      mean += w * sources[static_cast<std::size_t>(i)].mean;
    }
    MatrixX<Scalar> cov = MatrixX<Scalar>::Zero(n, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Scalar w = pi(i, j) * mu(i) / cj;
      const auto& s = sources[static_cast<std::size_t>(i)];
      const VectorX<Scalar> d = s.mean - mean;
      cov += w * (s.covariance + d * d.transpose());
    }
    out.mixed.push_back({std::move(mean), enforce_psd<Scalar>(cov)});
  }
  return out;
}

template <typename Scalar>
MixResult<Scalar> mix(const ImmBank<Scalar>& bank) {
  std::vector<GaussianBelief<Scalar>> beliefs;
  std::vector<StateEmbedding> emb;
  for (const auto& mode : bank.modes) {
    beliefs.push_back(mode.belief);
    emb.push_back(embedding_of(mode));
  }
  return mix<Scalar>(beliefs, bank.probabilities, bank.transition, emb, bank.missing_fill, bank.padding_variance);
}

template <typename Scalar = double>
struct ModeFilterResult {
  std::vector<GaussianBelief<Scalar>> priors;
  std::vector<GaussianBelief<Scalar>> posteriors;
  VectorX<Scalar> likelihoods;
};

/// Predict then update every mode independently against one measurement.
template <typename Scalar>
ModeFilterResult<Scalar> filter_modes(std::span<const GaussianBelief<Scalar>> mixed,
                                      std::span<const LinearGaussianModel<Scalar>> models,
                                      const Measurement<Scalar>& z) {
  require(mixed.size() == models.size(), "one model per mixed belief required");
  ModeFilterResult<Scalar> out;
  out.likelihoods.resize(static_cast<Eigen::Index>(mixed.size()));
  for (std::size_t j = 0; j < mixed.size(); ++j) {
    require(models[j].measurement_dim() == z.z.size(), "measurement dimension must match every mode's H");
    auto prior = predict(mixed[j], models[j]);
    const auto inn = innovation(prior, z, models[j]);
    out.posteriors.push_back(detail::apply_update(prior, models[j], inn));
    out.likelihoods(static_cast<Eigen::Index>(j)) = std::exp(inn.log_likelihood());
    out.priors.push_back(std::move(prior));
  }
  return out;
}

template <typename Scalar = double>
struct ProbabilityUpdate {
  VectorX<Scalar> probabilities;
  bool degenerate = false;  // every likelihood underflowed; probabilities == c
};

/// mu_j proportional to likelihood_j * c_j.
template <typename Scalar>
ProbabilityUpdate<Scalar> update_mode_probabilities(const VectorX<Scalar>& c, const VectorX<Scalar>& likelihoods) {
  require(c.size() == likelihoods.size(), "likelihood count must match mode count");
  require((likelihoods.array() >= Scalar(0)).all(), "likelihoods must be non-negative");
  if ((likelihoods.array() <= Scalar(0)).all()) return {c, true};
  const VectorX<Scalar> weighted =
      likelihoods.cwiseMax(Scalar(kLikelihoodFloor)).cwiseProduct(c);
  const Scalar total = weighted.sum();
  if (!(total > Scalar(0))) return {c, true};
  return {weighted / total, false};
}

/// Moment-matched mixture: mean = sum mu_j x_j, covariance = sum mu_j (P_j + d_j d_jᵀ).
template <typename Scalar>
GaussianBelief<Scalar> combine(std::span<const GaussianBelief<Scalar>> beliefs, const VectorX<Scalar>& mu) {
  require(!beliefs.empty() && static_cast<Eigen::Index>(beliefs.size()) == mu.size(),
          "one probability per belief required");
  const auto n = beliefs.front().dim();
  for (const auto& b : beliefs) validate(b, n);
  VectorX<Scalar> mean = VectorX<Scalar>::Zero(n);
  for (std::size_t j = 0; j < beliefs.size(); ++j) mean += mu(static_cast<Eigen::Index>(j)) * beliefs[j].mean;
  MatrixX<Scalar> cov = MatrixX<Scalar>::Zero(n, n);
  for (std::size_t j = 0; j < beliefs.size(); ++j) {
    const VectorX<Scalar> d = beliefs[j].mean - mean;
    cov += mu(static_cast<Eigen::Index>(j)) * (beliefs[j].covariance + d * d.transpose());
  }
  return {std::move(mean), enforce_psd<Scalar>(cov)};
}

/// Union-layout indices shared by every mode, in ascending order.
template <typename Scalar>
StateEmbedding common_components(const ImmBank<Scalar>& bank) {
  StateEmbedding common = embedding_of(bank.modes.front());
  for (const auto& mode : bank.modes) {
    const auto e = embedding_of(mode);
    std::erase_if(common, [&](Eigen::Index idx) { return std::find(e.begin(), e.end(), idx) == e.end(); });
  }
  std::sort(common.begin(), common.end());
  return common;
}

template <typename Scalar>
GaussianBelief<Scalar> fuse_common(const ImmBank<Scalar>& bank, std::span<const GaussianBelief<Scalar>> beliefs,
                                   const VectorX<Scalar>& mu) {
  const auto common = common_components(bank);
  std::vector<GaussianBelief<Scalar>> projected;
  for (std::size_t j = 0; j < beliefs.size(); ++j) {
    projected.push_back(detail::reexpress(beliefs[j], embedding_of(bank.modes[j]), common, Scalar(0)));
  }
  return combine<Scalar>(projected, mu);
}

template <typename Scalar>
void validate(const ImmBank<Scalar>& bank) {
  require(bank.modes.size() >= 1, "IMM bank needs at least one mode");
  require(static_cast<std::size_t>(bank.probabilities.size()) == bank.modes.size(),
          "mode probability count must match mode count");
  require(static_cast<std::size_t>(bank.transition.rows()) == bank.modes.size(),
          "transition matrix size must match mode count");
  validate_probabilities(bank.probabilities);
  validate_transition(bank.transition);
  const int axes = bank.modes.front().motion.axes;
  for (const auto& mode : bank.modes) {
    require(mode.motion.axes == axes, "all modes must share the same axis count");
    require(mode.belief.dim() == static_cast<Eigen::Index>(embedding_of(mode).size()),
            "mode belief dimension does not match its motion model");
  }
  require(bank.measurement_noise.rows() == axes && bank.measurement_noise.cols() == axes,
          "measurement noise must be axes x axes");
}

/// Step flags surfaced to callers.
struct ImmStepReport {
  bool mixing_degenerate = false;
  bool likelihood_degenerate = false;
  bool coasted = false;
};

/// Mixed and predicted bank state for one step, before any measurement.
template <typename Scalar = double>
struct ImmPrediction {
  ImmBank<Scalar> bank;  // carries the mode specs with dt applied
  std::vector<LinearGaussianModel<Scalar>> models;
  std::vector<GaussianBelief<Scalar>> priors;
  VectorX<Scalar> predicted_probabilities;
  bool mixing_degenerate = false;

  /// Fused prior over the shared components, e.g. for gating.
  GaussianBelief<Scalar> fused() const { return fuse_common<Scalar>(bank, priors, predicted_probabilities); }

  /// Observation matrix acting on the fused (shared-component) state.
  MatrixX<Scalar> fused_observation() const {
    const auto common = common_components(bank);
    const auto axes = bank.measurement_noise.rows();
    MatrixX<Scalar> h = MatrixX<Scalar>::Zero(axes, static_cast<Eigen::Index>(common.size()));
    for (Eigen::Index a = 0; a < axes; ++a) {
      auto it = std::find(common.begin(), common.end(), 3 * a);
      h(a, it - common.begin()) = Scalar(1);
    }
    return h;
  }
};

template <typename Scalar = double>
struct ImmStepResult {
  ImmBank<Scalar> bank;
  GaussianBelief<Scalar> fused;
  ImmStepReport report;
};

template <typename Scalar>
ImmPrediction<Scalar> imm_predict(const ImmBank<Scalar>& bank, Scalar dt) {
  require(dt > Scalar(0), "IMM step dt must be > 0");
  validate(bank);
  ImmPrediction<Scalar> out{bank, {}, {}, {}, false};
  auto mixed = mix(bank);
  out.mixing_degenerate = mixed.any_degenerate();
  out.predicted_probabilities = mixed.predicted_probabilities;
  const Scalar r_var = bank.measurement_noise(0, 0);
  for (std::size_t j = 0; j < bank.modes.size(); ++j) {
    auto& spec = out.bank.modes[j].motion;
    spec.dt = dt;
    auto model = build_model(spec, r_var);
    model.measurement_noise = bank.measurement_noise;
    out.priors.push_back(predict(mixed.mixed[j], model));
    out.models.push_back(std::move(model));
  }
  return out;
}

template <typename Scalar>
ImmStepResult<Scalar> imm_update(const ImmPrediction<Scalar>& pred, const Measurement<Scalar>& z) {
  ImmStepResult<Scalar> out{pred.bank, {}, {}};
  out.report.mixing_degenerate = pred.mixing_degenerate;
  const auto m = pred.priors.size();
  std::vector<GaussianBelief<Scalar>> posteriors;
  VectorX<Scalar> likelihoods(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const auto inn = innovation(pred.priors[j], z, pred.models[j]);
    posteriors.push_back(detail::apply_update(pred.priors[j], pred.models[j], inn));
    likelihoods(static_cast<Eigen::Index>(j)) = std::exp(inn.log_likelihood());
  }
  auto probs = update_mode_probabilities(pred.predicted_probabilities, likelihoods);
  out.report.likelihood_degenerate = probs.degenerate;
  for (std::size_t j = 0; j < m; ++j) out.bank.modes[j].belief = posteriors[j];
  out.bank.probabilities = probs.probabilities;
  out.fused = fuse_common<Scalar>(out.bank, posteriors, out.bank.probabilities);
  return out;
}

/// No measurement this step: keep the predicted beliefs and c as the new state.
template <typename Scalar>
ImmStepResult<Scalar> imm_coast(const ImmPrediction<Scalar>& pred) {
  ImmStepResult<Scalar> out{pred.bank, pred.fused(), {}};
  out.report.mixing_degenerate = pred.mixing_degenerate;
  out.report.coasted = true;
  for (std::size_t j = 0; j < pred.priors.size(); ++j) out.bank.modes[j].belief = pred.priors[j];
  out.bank.probabilities = pred.predicted_probabilities;
  return out;
}

template <typename Scalar>
ImmStepResult<Scalar> imm_step(const ImmBank<Scalar>& bank, const Measurement<Scalar>& z, Scalar dt) {
  return imm_update(imm_predict(bank, dt), z);
}

/// Bank whose modes all start from `initial`, a belief over [x, vx] per
/// axis. Acceleration components of ca modes start at zero with variance
/// `accel_variance`.
template <typename Scalar = double>
ImmBank<Scalar> make_bank(const std::vector<MotionModelSpec<Scalar>>& specs, const GaussianBelief<Scalar>& initial,
                          const MatrixX<Scalar>& transition, const VectorX<Scalar>& initial_probabilities,
                          const MatrixX<Scalar>& measurement_noise, Scalar accel_variance = Scalar(1)) {
  require(!specs.empty(), "IMM bank needs at least one mode");
  ImmBank<Scalar> bank;
  const int axes = specs.front().axes;
  const auto cv_layout = union_embedding(MotionKind::kConstantVelocity, axes);
  require(initial.dim() == static_cast<Eigen::Index>(cv_layout.size()), "initial belief must be [x, vx] per axis");
  for (const auto& spec : specs) {
    auto target = union_embedding(spec.kind, spec.axes);
    auto belief = detail::reexpress(initial, cv_layout, target, accel_variance);
    bank.modes.push_back({spec, std::move(belief)});
  }
  bank.transition = transition;
  bank.probabilities = initial_probabilities;
  bank.measurement_noise = measurement_noise;
  validate(bank);
  return bank;
}

}  // namespace vtrack
