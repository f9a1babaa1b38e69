#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "cjcrf/core.hpp"
#include "cjcrf/features.hpp"
#include "cjcrf/jointmodel.hpp"

namespace cjcrf {

/// Which of the two joint-prior constraints are active.
enum class Variant { NoConstraint, ConstraintLandmark, ConstraintAU, Full };

std::string_view variant_name(Variant v);
/// Accepts the CLI spellings: full, noconstraint, constraint-landmark, constraint-au.
Variant parse_variant(std::string_view name);

struct CascadeConfig {
  int stages = 4;
  double lambda_shape = 0.5;
  double lambda_prob = 0.5;
  double ridge = 1e-3;  // relative to the mean diagonal of the Gram matrix
  int augmentations = 10;
  double perturb_scale = 0.1;
  double perturb_rotation = 15.0;  // degrees
  double perturb_translation = 0.05;  // fraction of face size
  Variant variant = Variant::Full;
  std::uint64_t seed = 0;

  void validate() const;
  double effective_lambda_shape() const;
  double effective_lambda_prob() const;
};

struct StageModel {
  Eigen::MatrixXd R;  // 2D x (F*D + 1)
  Eigen::MatrixXd T;  // N  x (F*D + 1)
};

struct CascadeModel {
  CascadeConfig config;
  FaceShape mean;  // Canonical
  JointPrior prior;
  std::vector<StageModel> stages;
  DescriptorConfig descriptor;
  EyeIndices eye_indices{0, 1};

  std::size_t landmarks() const { return mean.size(); }
  std::size_t n_aus() const { return prior.n_aus(); }
  /// Throws DimensionMismatch if the parts disagree.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Closed-form pieces

/// Ridge least squares from a Cholesky-factorised Gram matrix. Features are stored
/// one instance per column (P x M), so the same factorisation can serve
/// several target sets.
class RidgeSolver {
 public:
  RidgeSolver(const Eigen::MatrixXd& features_by_column, double ridge);
  /// features_by_column must be the matrix the solver was built from;
  /// targets_by_column is Q x M. Returns W (Q x P).
  Eigen::MatrixXd solve(const Eigen::MatrixXd& features_by_column,
                        const Eigen::MatrixXd& targets_by_column) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// argmin_W sum_m ||target_m - W feature_m||^2 + ridge ||W||_F^2, with
/// features M x P and targets M x Q (one instance per row).
Eigen::MatrixXd fit_linear_stage(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                                 double ridge);

/// x_t = (x_prev + g + lambda x_bar) / (1 + lambda), g = R phi.
Eigen::VectorXd constrained_shape_update(const Eigen::VectorXd& x_prev, const Eigen::VectorXd& g,
                                         const Eigen::VectorXd& x_bar, double lambda);
FaceShape constrained_shape_update(const FaceShape& x_prev, const Eigen::VectorXd& phi,
                                   const Eigen::MatrixXd& R, const FaceShape& x_bar, double lambda);

/// p_t = clamp((p_prev + d + lambda q) / (1 + lambda), 0, 1), d = T phi.
Eigen::VectorXd constrained_prob_update(const Eigen::VectorXd& p_prev, const Eigen::VectorXd& d,
                                        const Eigen::VectorXd& q, double lambda);
AUProbVector constrained_prob_update(const AUProbVector& p_prev, const Eigen::VectorXd& phi,
                                     const Eigen::MatrixXd& T, const AUProbVector& q,
                                     double lambda);

// ---------------------------------------------------------------------------
// Training and inference

/// Optional instrumentation for the cascade loops.
struct CascadeObserver {
  /// Called with the initial state (stage 0) and after every stage.
  std::function<void(int stage, const FaceShape& canonical, const AUProbVector& p)> on_stage;
  std::function<void()> on_shape_prior;
  std::function<void()> on_au_posterior;
};

struct TrainReport {
  /// Mean Euclidean landmark residual (canonical units) over augmented
  /// instances before the first stage and after each stage.
  std::vector<double> residual_per_stage;
};

CascadeModel train(std::span<const Sample> samples, const CascadeConfig& cfg,
                   const DescriptorConfig& desc_cfg, const JointPrior& prior,
                   const EyeIndices& eye_indices = {0, 1}, TrainReport* report = nullptr);

struct Detection {
  FaceShape shape;  // ImagePixels
  AUProbVector probs;
  AULabelVector labels;
};

Detection infer(const GrayImage& image, const FaceBox& box, const CascadeModel& model,
                double threshold = 0.5, const CascadeObserver* observer = nullptr);

/// Shape-only cascade with lambda = 0 at every stage.
FaceShape infer_sdm(const GrayImage& image, const FaceBox& box, const CascadeModel& model);

/// Similarity perturbation of a canonical shape about its centroid.
FaceShape perturb_shape(const FaceShape& shape, double scale, double rotation_deg, double tx,
                        double ty);

}  // namespace cjcrf
