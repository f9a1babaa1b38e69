#include "cjcrf/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "cjcrf/random.hpp"

namespace cjcrf {

namespace {

void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) throw DimensionMismatch(what);
}

Eigen::MatrixXd gram_with_ridge(const Eigen::MatrixXd& phi, double ridge) {
  const auto p = phi.rows();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(phi);
  gram.diagonal().array() += ridge;
  return gram;
}

// Relative ridge: cfg.ridge times the mean diagonal of the Gram matrix
// (squared feature norm over feature count).
double scaled_ridge(double ridge, const Eigen::MatrixXd& phi) {
  return ridge * phi.squaredNorm() / static_cast<double>(phi.rows());
}

// Stacked features of every instance, one per column.
Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& shapes, std::span<const GradientField> grads,
                               std::span<const Sample> samples, std::size_t per_sample,
                               const DescriptorConfig& cfg) {
  const auto m = shapes.cols();
  const std::size_t d = static_cast<std::size_t>(shapes.rows() / 2);
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(cfg.stacked_dimension(d)), m);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index j = 0; j < m; ++j) {
    const std::size_t s = static_cast<std::size_t>(j) / per_sample;
    const FaceShape canonical = FaceShape::from_flat(shapes.col(j), Frame::Canonical);
    stacked_features_into(grads[s], from_canonical(canonical, samples[s].box), samples[s].box, cfg,
                          phi.col(j));
  }
  return phi;
}

double mean_point_residual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) {
  double acc = 0.0;
  const auto pts = x.rows() / 2;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < pts; ++i) {
      acc += std::hypot(x(2 * i, j) - target(2 * i, j), x(2 * i + 1, j) - target(2 * i + 1, j));
    }
  }
  return acc / static_cast<double>(x.cols() * pts);
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::NoConstraint: return "noconstraint";
    case Variant::ConstraintLandmark: return "constraint-landmark";
    case Variant::ConstraintAU: return "constraint-au";
    case Variant::Full: return "full";
  }
  return "full";
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::Full;
  if (name == "noconstraint") return Variant::NoConstraint;
  if (name == "constraint-landmark") return Variant::ConstraintLandmark;
  if (name == "constraint-au") return Variant::ConstraintAU;
  throw std::invalid_argument("unknown variant: " + std::string(name));
}

void CascadeConfig::validate() const {
  if (stages < 1) throw std::invalid_argument("CascadeConfig: stages must be >= 1");
  if (!(lambda_shape >= 0.0) || !(lambda_prob >= 0.0)) {
    throw std::invalid_argument("CascadeConfig: lambdas must be >= 0");
  }
  if (!(ridge > 0.0)) throw std::invalid_argument("CascadeConfig: ridge must be positive");
  if (augmentations < 1) throw std::invalid_argument("CascadeConfig: augmentations must be >= 1");
  if (!(perturb_scale >= 0.0 && perturb_scale < 1.0) || !(perturb_rotation >= 0.0) ||
      !(perturb_translation >= 0.0)) {
    throw std::invalid_argument("CascadeConfig: invalid perturbation ranges");
  }
}

double CascadeConfig::effective_lambda_shape() const {
  return (variant == Variant::Full || variant == Variant::ConstraintLandmark) ? lambda_shape : 0.0;
}

double CascadeConfig::effective_lambda_prob() const {
  return (variant == Variant::Full || variant == Variant::ConstraintAU) ? lambda_prob : 0.0;
}

void CascadeModel::validate() const {
  config.validate();
  descriptor.validate();
  const auto dims = static_cast<Eigen::Index>(2 * mean.size());
  const auto n = static_cast<Eigen::Index>(n_aus());
  const auto p = static_cast<Eigen::Index>(descriptor.stacked_dimension(mean.size()));
  if (stages.size() != static_cast<std::size_t>(config.stages)) {
    throw DimensionMismatch("CascadeModel: stage count differs from config");
  }
  for (const auto& s : stages) {
    if (s.R.rows() != dims || s.R.cols() != p || s.T.rows() != n || s.T.cols() != p) {
      throw DimensionMismatch("CascadeModel: stage matrix dimensions");
    }
  }
  prior.rbm.validate();
  if (prior.rbm.shape_dim() != static_cast<std::size_t>(dims) ||
      prior.rbm.n_aus() != static_cast<std::size_t>(n) ||
      prior.au_absent.size() != prior.au_shapes.size() ||
      prior.fallback_shape.size() != mean.size() ||
      prior.standardization.mean.size() != dims || prior.standardization.stddev.size() != dims) {
    throw DimensionMismatch("CascadeModel: joint prior dimensions");
  }
  for (const auto& s : prior.au_shapes) {
    if (s.size() != mean.size()) throw DimensionMismatch("CascadeModel: AU shape length");
  }
  if (eye_indices.first >= mean.size() || eye_indices.second >= mean.size() ||
      eye_indices.first == eye_indices.second) {
    throw std::invalid_argument("CascadeModel: invalid eye indices");
  }
}

RidgeSolver::RidgeSolver(const Eigen::MatrixXd& features_by_column, double ridge) {
  if (!(ridge > 0.0)) throw std::invalid_argument("RidgeSolver: ridge must be positive");
  if (features_by_column.cols() < 1) throw std::invalid_argument("RidgeSolver: no instances");
  if (!features_by_column.allFinite()) throw std::invalid_argument("RidgeSolver: non-finite features");
  llt_.compute(gram_with_ridge(features_by_column, ridge));
  if (llt_.info() != Eigen::Success) throw std::runtime_error("RidgeSolver: factorisation failed");
}

Eigen::MatrixXd RidgeSolver::solve(const Eigen::MatrixXd& features_by_column,
                                   const Eigen::MatrixXd& targets_by_column) const {
  require_same_size(features_by_column.cols(), targets_by_column.cols(),
                    "RidgeSolver: feature and target instance counts differ");
  require_same_size(features_by_column.rows(), llt_.rows(), "RidgeSolver: feature dimension");
  if (!targets_by_column.allFinite()) throw std::invalid_argument("RidgeSolver: non-finite targets");
  const Eigen::MatrixXd rhs = features_by_column * targets_by_column.transpose();  // P x Q
  return llt_.solve(rhs).transpose();
}

Eigen::MatrixXd fit_linear_stage(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                                 double ridge) {
  require_same_size(features.rows(), targets.rows(), "fit_linear_stage: row counts differ");
  const Eigen::MatrixXd phi = features.transpose();
  return RidgeSolver(phi, ridge).solve(phi, targets.transpose());
}

Eigen::VectorXd constrained_shape_update(const Eigen::VectorXd& x_prev, const Eigen::VectorXd& g,
                                         const Eigen::VectorXd& x_bar, double lambda) {
  require_same_size(x_prev.size(), g.size(), "constrained_shape_update: update length");
  require_same_size(x_prev.size(), x_bar.size(), "constrained_shape_update: prior length");
  if (!(lambda >= 0.0)) throw std::invalid_argument("constrained_shape_update: lambda < 0");
  if (lambda == 0.0) return x_prev + g;
  return (x_prev + g + lambda * x_bar) / (1.0 + lambda);
}

FaceShape constrained_shape_update(const FaceShape& x_prev, const Eigen::VectorXd& phi,
                                   const Eigen::MatrixXd& R, const FaceShape& x_bar, double lambda) {
  require_same_size(R.cols(), phi.size(), "constrained_shape_update: R columns != feature length");
  return FaceShape::from_flat(constrained_shape_update(x_prev.flat(), R * phi, x_bar.flat(), lambda),
                              Frame::Canonical);
}

Eigen::VectorXd constrained_prob_update(const Eigen::VectorXd& p_prev, const Eigen::VectorXd& d,
                                        const Eigen::VectorXd& q, double lambda) {
  require_same_size(p_prev.size(), d.size(), "constrained_prob_update: update length");
  require_same_size(p_prev.size(), q.size(), "constrained_prob_update: constraint length");
  if (!(lambda >= 0.0)) throw std::invalid_argument("constrained_prob_update: lambda < 0");
  const Eigen::VectorXd raw = lambda == 0.0 ? Eigen::VectorXd(p_prev + d)
                                            : Eigen::VectorXd((p_prev + d + lambda * q) / (1.0 + lambda));
  return raw.cwiseMax(0.0).cwiseMin(1.0);
}

AUProbVector constrained_prob_update(const AUProbVector& p_prev, const Eigen::VectorXd& phi,
                                     const Eigen::MatrixXd& T, const AUProbVector& q,
                                     double lambda) {
  require_same_size(T.cols(), phi.size(), "constrained_prob_update: T columns != feature length");
  return {constrained_prob_update(p_prev.values, T * phi, q.values, lambda)};
}

FaceShape perturb_shape(const FaceShape& shape, double scale, double rotation_deg, double tx,
                        double ty) {
  double cx = 0.0;
  double cy = 0.0;
  for (const auto& p : shape.points()) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(shape.size());
  cy /= static_cast<double>(shape.size());
  const double th = rotation_deg * std::numbers::pi / 180.0;
  const double cs = scale * std::cos(th);
  const double sn = scale * std::sin(th);
  std::vector<Point2> out(shape.size());
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const double dx = shape[i].x - cx;
    const double dy = shape[i].y - cy;
    out[i] = {cx + cs * dx - sn * dy + tx, cy + sn * dx + cs * dy + ty};
  }
  return FaceShape(std::move(out), shape.frame());
}

CascadeModel train(std::span<const Sample> samples, const CascadeConfig& cfg,
                   const DescriptorConfig& desc_cfg, const JointPrior& prior,
                   const EyeIndices& eye_indices, TrainReport* report) {
  cfg.validate();
  desc_cfg.validate();
  if (samples.empty()) throw std::invalid_argument("train: no samples");
  const std::size_t d = samples.front().gt_shape.size();
  const std::size_t n = prior.n_aus();
  if (prior.fallback_shape.size() != d || prior.rbm.shape_dim() != 2 * d || prior.rbm.n_aus() != n) {
    throw DimensionMismatch("train: joint prior does not match the landmark/AU schema");
  }

  std::vector<FaceShape> canonical_gt;
  canonical_gt.reserve(samples.size());
  std::vector<GradientField> grads;
  grads.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.gt_shape.size() != d) throw DimensionMismatch("train: landmark count varies");
    if (s.gt_labels.size() != n) throw DimensionMismatch("train: AU label length != prior N");
    validate_labels(s.gt_labels);
    canonical_gt.push_back(to_canonical(s.gt_shape, s.box));
    grads.emplace_back(s.image);
  }

  CascadeModel model;
  model.config = cfg;
  model.descriptor = desc_cfg;
  model.prior = prior;
  model.mean = mean_shape(canonical_gt);
  model.eye_indices = eye_indices;

  const auto per_sample = static_cast<std::size_t>(cfg.augmentations);
  const auto m = static_cast<Eigen::Index>(samples.size() * per_sample);
  const auto dims = static_cast<Eigen::Index>(2 * d);
  const auto na = static_cast<Eigen::Index>(n);

  Eigen::MatrixXd x(dims, m);
  Eigen::MatrixXd x_star(dims, m);
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(na, m, 0.5);
  Eigen::MatrixXd p_star(na, m);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    Rng rng = Rng::stream(cfg.seed, StreamDomain::Augment, s);
    const Eigen::VectorXd gt = canonical_gt[s].flat();
    const Eigen::VectorXd labels = samples[s].gt_labels.as_vector();
    for (std::size_t k = 0; k < per_sample; ++k) {
      const auto j = static_cast<Eigen::Index>(s * per_sample + k);
      const double scale = rng.uniform(1.0 - cfg.perturb_scale, 1.0 + cfg.perturb_scale);
      const double rot = rng.uniform(-cfg.perturb_rotation, cfg.perturb_rotation);
      const double tx = rng.uniform(-cfg.perturb_translation, cfg.perturb_translation);
      const double ty = rng.uniform(-cfg.perturb_translation, cfg.perturb_translation);
      x.col(j) = perturb_shape(model.mean, scale, rot, tx, ty).flat();
      x_star.col(j) = gt;
      p_star.col(j) = labels;
    }
  }

  const double lambda_shape = cfg.effective_lambda_shape();
  const double lambda_prob = cfg.effective_lambda_prob();
  if (report) report->residual_per_stage = {mean_point_residual(x, x_star)};

  Eigen::MatrixXd phi = feature_matrix(x, grads, samples, per_sample, desc_cfg);
  auto solver = std::make_unique<RidgeSolver>(phi, scaled_ridge(cfg.ridge, phi));
  for (int t = 0; t < cfg.stages; ++t) {
    StageModel stage;
    stage.R = solver->solve(phi, x_star - x);
    const Eigen::MatrixXd g = stage.R * phi;
    if (lambda_shape > 0.0) {
#pragma omp parallel for schedule(dynamic, 16)
      for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::VectorXd x_bar = shape_prior(AUProbVector{p.col(j)}, prior).flat();
        x.col(j) = constrained_shape_update(x.col(j), g.col(j), x_bar, lambda_shape);
      }
    } else {
      x += g;
    }

    phi = feature_matrix(x, grads, samples, per_sample, desc_cfg);
    solver.reset();
    solver = std::make_unique<RidgeSolver>(phi, scaled_ridge(cfg.ridge, phi));
    stage.T = solver->solve(phi, p_star - p);
    const Eigen::MatrixXd dp = stage.T * phi;
    if (lambda_prob > 0.0) {
#pragma omp parallel for schedule(dynamic, 16)
      for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::VectorXd q =
            prior.posterior(FaceShape::from_flat(x.col(j), Frame::Canonical)).probs.values;
        p.col(j) = constrained_prob_update(p.col(j), dp.col(j), q, lambda_prob);
      }
    } else {
      p = (p + dp).cwiseMax(0.0).cwiseMin(1.0);
    }
    model.stages.push_back(std::move(stage));
    if (report) report->residual_per_stage.push_back(mean_point_residual(x, x_star));
  }
  return model;
}

Detection infer(const GrayImage& image, const FaceBox& box, const CascadeModel& model,
                double threshold, const CascadeObserver* observer) {
  box.validate();
  const GradientField grad(image);
  const CascadeConfig& cfg = model.config;
  const double lambda_shape = cfg.effective_lambda_shape();
  const double lambda_prob = cfg.effective_lambda_prob();

  Eigen::VectorXd x = model.mean.flat();
  AUProbVector p{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(model.n_aus()), 0.5)};
  if (observer && observer->on_stage) observer->on_stage(0, model.mean, p);

  for (std::size_t t = 0; t < model.stages.size(); ++t) {
    const StageModel& stage = model.stages[t];
    const FaceShape current = FaceShape::from_flat(x, Frame::Canonical);
    Eigen::VectorXd phi = stacked_features(grad, from_canonical(current, box), box, model.descriptor);
    require_same_size(stage.R.cols(), phi.size(), "infer: model feature length != descriptor");
    const Eigen::VectorXd g = stage.R * phi;
    if (lambda_shape > 0.0) {
      if (observer && observer->on_shape_prior) observer->on_shape_prior();
      x = constrained_shape_update(x, g, shape_prior(p, model.prior).flat(), lambda_shape);
    } else {
      x += g;
    }

    const FaceShape updated = FaceShape::from_flat(x, Frame::Canonical);
    phi = stacked_features(grad, from_canonical(updated, box), box, model.descriptor);
    const Eigen::VectorXd dp = stage.T * phi;
    if (lambda_prob > 0.0) {
      if (observer && observer->on_au_posterior) observer->on_au_posterior();
      p.values = constrained_prob_update(p.values, dp, model.prior.posterior(updated).probs.values,
                                         lambda_prob);
    } else {
      p.values = (p.values + dp).cwiseMax(0.0).cwiseMin(1.0);
    }
    if (observer && observer->on_stage) observer->on_stage(static_cast<int>(t) + 1, updated, p);
  }

  Detection out;
  out.shape = from_canonical(FaceShape::from_flat(x, Frame::Canonical), box);
  out.labels = p.threshold(threshold);
  out.probs = std::move(p);
  return out;
}

FaceShape infer_sdm(const GrayImage& image, const FaceBox& box, const CascadeModel& model) {
  box.validate();
  const GradientField grad(image);
  Eigen::VectorXd x = model.mean.flat();
  for (const auto& stage : model.stages) {
    const FaceShape current = FaceShape::from_flat(x, Frame::Canonical);
    const Eigen::VectorXd phi =
        stacked_features(grad, from_canonical(current, box), box, model.descriptor);
    require_same_size(stage.R.cols(), phi.size(), "infer_sdm: model feature length != descriptor");
    x += stage.R * phi;
  }
  return from_canonical(FaceShape::from_flat(x, Frame::Canonical), box);
}

}  // namespace cjcrf
