#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cjcrf/core.hpp"

namespace cjcrf {

/// Gaussian-Bernoulli RBM over shape coordinates x (unit variance) and AU
/// labels a, with K binary hidden units:
///   E(a, x, h) = sum_j (x_j - bx_j)^2 / 2 - ba'a - c'h - x'Wx h - a'Wa h
struct RBMParams {
  Eigen::MatrixXd Wx;  // 2D x K
  Eigen::MatrixXd Wa;  // N x K
  Eigen::VectorXd bx;  // 2D
  Eigen::VectorXd ba;  // N
  Eigen::VectorXd c;   // K

  /// Zero-initialised parameters.
  static RBMParams zeros(std::size_t shape_dim, std::size_t n_aus, std::size_t hidden);

  std::size_t shape_dim() const { return static_cast<std::size_t>(Wx.rows()); }
  std::size_t n_aus() const { return static_cast<std::size_t>(Wa.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(c.size()); }

  /// Throws DimensionMismatch on inconsistent shapes, invalid_argument on
  /// non-finite entries.
  void validate() const;
};

struct CDConfig {
  int epochs = 800;
  double learning_rate = 0.01;
  int batch_size = 64;
  int cd_steps = 1;
  double momentum = 0.5;
  double weight_decay = 1e-4;
  std::size_t hidden = 150;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One (labels, shape) training pair in RBM visible space.
struct JointExample {
  Eigen::VectorXd a;
  Eigen::VectorXd x;
};

double softplus(double z);

double energy(const Eigen::VectorXd& a, const Eigen::VectorXd& x, const Eigen::VectorXd& h,
              const RBMParams& theta);

/// -log sum_h exp(-E(a, x, h)), hidden units marginalised in closed form.
double free_energy(const Eigen::VectorXd& a, const Eigen::VectorXd& x, const RBMParams& theta);

/// CD-k training. Weights start uniform in (-0.01, 0.01), biases at zero.
RBMParams cd_train(std::span<const JointExample> data, const CDConfig& cfg);

struct AUPosterior {
  AUProbVector probs;
  bool exact = true;
  bool converged = true;  // false only if mean-field hit its iteration cap
};

inline constexpr std::size_t kExactPosteriorMaxAUs = 20;

/// Marginals P(a_i = 1 | x). For N <= exact_threshold the hidden layer is
/// summed out analytically and all 2^N label vectors are enumerated, so
///   P(a | x) ~ exp(ba'a) * prod_k (1 + exp(c_k + x'Wx_k + a'Wa_k)).
/// Larger N falls back to damped mean-field over (mu_a, mu_h).
AUPosterior au_posterior(const Eigen::VectorXd& x, const RBMParams& theta,
                         std::size_t exact_threshold = kExactPosteriorMaxAUs);

/// Full conditional distribution P(a | x) over the 2^N label vectors, indexed
/// by bit mask (bit i = a_i). Only for N <= kExactPosteriorMaxAUs.
Eigen::VectorXd label_distribution(const Eigen::VectorXd& x, const RBMParams& theta);

/// Per-coordinate affine map applied to shapes before they reach the RBM.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  static Standardization fit(std::span<const Eigen::VectorXd> xs);
  static Standardization identity(std::size_t dim);
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd invert(const Eigen::VectorXd& z) const;
};

struct AUShapes {
  std::vector<FaceShape> shapes;  // Canonical
  std::vector<bool> absent;       // true where no training sample had the AU
};

/// Class-conditional mean shapes E[x | a_i = 1], with `mean` substituted for
/// AUs that never occur.
AUShapes au_dependent_shapes(std::span<const AULabelVector> labels,
                             std::span<const FaceShape> shapes, const FaceShape& mean);

struct JointPrior {
  RBMParams rbm;
  Standardization standardization;
  std::vector<FaceShape> au_shapes;
  std::vector<bool> au_absent;
  FaceShape fallback_shape;
  CDConfig trained_with;

  std::size_t n_aus() const { return au_shapes.size(); }
  /// AU marginals for a canonical shape, via the standardised RBM input.
  AUPosterior posterior(const FaceShape& shape) const;
};

/// Weighted prior shape sum_i au_shapes[i] * p_i / sum_l p_l; falls back to
/// prior.fallback_shape when sum_l p_l < 1e-9.
FaceShape shape_prior(const AUProbVector& p, const JointPrior& prior);

/// Standardises shapes, runs cd_train, and fills the AU-dependent shapes.
JointPrior train_joint_prior(std::span<const AULabelVector> labels,
                             std::span<const FaceShape> canonical_shapes, const CDConfig& cfg);

}  // namespace cjcrf
