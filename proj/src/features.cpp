#include "cjcrf/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace cjcrf {

namespace {

// Below this norm a window is treated as having no gradient energy.
constexpr double kZeroEnergy = 1e-12;

void normalize_and_clip(Eigen::Ref<Eigen::VectorXd> h, double clip) {
  double norm = h.norm();
  if (norm < kZeroEnergy) {
    h.setZero();
    return;
  }
  h /= norm;
  h = h.cwiseMin(clip);
  norm = h.norm();
  h /= norm;
}

void accumulate_descriptor(const GradientField& grad, Point2 center, double radius,
                           const DescriptorConfig& cfg, Eigen::Ref<Eigen::VectorXd> hist) {
  const int cells = cfg.grid_cells;
  const int bins = cfg.orientation_bins;
  hist.setZero();

  const int cx = static_cast<int>(std::floor(center.x + 0.5));
  const int cy = static_cast<int>(std::floor(center.y + 0.5));
  const int reach = static_cast<int>(std::ceil(radius)) + 1;
  const double sigma = 0.5 * radius;
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const double cell_scale = cells / (2.0 * radius);
  const double bin_scale = bins / (2.0 * std::numbers::pi);

  // The Gaussian and the cell coordinate are separable in x and y.
  struct Axis {
    double gauss;
    int c0;
    double f;
    bool inside;
  };
  const auto axis = [&](double d) {
    const double r = (d + radius) * cell_scale - 0.5;  // cell centres at integers
    const int c0 = static_cast<int>(std::floor(r));
    return Axis{std::exp(-d * d * inv_two_sigma2), c0, r - c0, std::abs(d) <= radius};
  };
  const int span = 2 * reach + 1;
  std::vector<Axis> xs(static_cast<std::size_t>(span));
  std::vector<Axis> ys(static_cast<std::size_t>(span));
  for (int k = 0; k < span; ++k) {
    xs[static_cast<std::size_t>(k)] = axis(cx - reach + k - center.x);
    ys[static_cast<std::size_t>(k)] = axis(cy - reach + k - center.y);
  }

  for (int v = 0; v < span; ++v) {
    const Axis& ay = ys[static_cast<std::size_t>(v)];
    if (!ay.inside) continue;
    const int py = cy - reach + v;
    for (int u = 0; u < span; ++u) {
      const Axis& ax = xs[static_cast<std::size_t>(u)];
      if (!ax.inside) continue;

      double mag = 0.0;
      double angle = 0.0;
      grad.polar(cx - reach + u, py, mag, angle);
      if (mag == 0.0) continue;

      const double weight = mag * ax.gauss * ay.gauss;
      const double ro = angle * bin_scale;
      const int o0 = static_cast<int>(std::floor(ro));
      const double fo = ro - o0;
      const int ob0 = ((o0 % bins) + bins) % bins;
      const int ob1 = (ob0 + 1) % bins;

      for (int iy = 0; iy <= 1; ++iy) {
        const int yb = ay.c0 + iy;
        if (yb < 0 || yb >= cells) continue;
        const double wy = iy ? ay.f : 1.0 - ay.f;
        for (int ix = 0; ix <= 1; ++ix) {
          const int xb = ax.c0 + ix;
          if (xb < 0 || xb >= cells) continue;
          const double w = weight * wy * (ix ? ax.f : 1.0 - ax.f);
          const Eigen::Index base = (yb * cells + xb) * bins;
          hist[base + ob0] += w * (1.0 - fo);
          hist[base + ob1] += w * fo;
        }
      }
    }
  }
  normalize_and_clip(hist, cfg.clip_threshold);
}

}  // namespace

void DescriptorConfig::validate() const {
  if (!(radius_fraction > 0.0)) throw std::invalid_argument("radius_fraction must be positive");
  if (grid_cells < 1) throw std::invalid_argument("grid_cells must be at least 1");
  if (orientation_bins < 2) throw std::invalid_argument("orientation_bins must be at least 2");
  if (!(clip_threshold > 0.0)) throw std::invalid_argument("clip_threshold must be positive");
}

namespace {

void to_polar(double gx, double gy, double& mag, double& angle) {
  mag = std::hypot(gx, gy);
  angle = std::atan2(gy, gx);
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
}

}  // namespace

GradientField::GradientField(const GrayImage& image) : image_(&image) {
  const int w = image.width();
  const int h = image.height();
  gx_.resize(static_cast<std::size_t>(w) * h);
  gy_.resize(gx_.size());
  mag_.resize(gx_.size());
  angle_.resize(gx_.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx_[i] = 0.5 * (image.clamped(x + 1, y) - image.clamped(x - 1, y));
      gy_[i] = 0.5 * (image.clamped(x, y + 1) - image.clamped(x, y - 1));
      to_polar(gx_[i], gy_[i], mag_[i], angle_[i]);
    }
  }
}

void GradientField::at(int x, int y, double& gx, double& gy) const {
  const GrayImage& img = *image_;
  if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) {
    const std::size_t i = static_cast<std::size_t>(y) * img.width() + x;
    gx = gx_[i];
    gy = gy_[i];
    return;
  }
  gx = 0.5 * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
  gy = 0.5 * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
}

void GradientField::polar(int x, int y, double& mag, double& angle) const {
  const GrayImage& img = *image_;
  if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) {
    const std::size_t i = static_cast<std::size_t>(y) * img.width() + x;
    mag = mag_[i];
    angle = angle_[i];
    return;
  }
  double gx = 0.0;
  double gy = 0.0;
  at(x, y, gx, gy);
  to_polar(gx, gy, mag, angle);
}

Eigen::VectorXd extract_descriptor(const GradientField& grad, Point2 center, double radius,
                                   const DescriptorConfig& cfg) {
  cfg.validate();
  if (!(radius > 0.0)) throw std::invalid_argument("extract_descriptor: radius must be positive");
  Eigen::VectorXd hist(static_cast<Eigen::Index>(cfg.dimension()));
  accumulate_descriptor(grad, center, radius, cfg, hist);
  return hist;
}

Eigen::VectorXd extract_descriptor(const GrayImage& image, Point2 center, double radius,
                                   const DescriptorConfig& cfg) {
  const GradientField grad(image);
  return extract_descriptor(grad, center, radius, cfg);
}

void stacked_features_into(const GradientField& grad, const FaceShape& shape, const FaceBox& box,
                           const DescriptorConfig& cfg, Eigen::Ref<Eigen::VectorXd> out) {
  cfg.validate();
  box.validate();
  if (shape.frame() != Frame::ImagePixels) {
    throw std::invalid_argument("stacked_features: shape must be in the image-pixel frame");
  }
  const auto f = static_cast<Eigen::Index>(cfg.dimension());
  if (out.size() != static_cast<Eigen::Index>(cfg.stacked_dimension(shape.size()))) {
    throw DimensionMismatch("stacked_features: output buffer has the wrong length");
  }
  const double radius = cfg.radius_fraction * box.face_size();
  for (std::size_t i = 0; i < shape.size(); ++i) {
    accumulate_descriptor(grad, shape[i], radius, cfg,
                          out.segment(static_cast<Eigen::Index>(i) * f, f));
  }
  out[out.size() - 1] = 1.0;
}

Eigen::VectorXd stacked_features(const GradientField& grad, const FaceShape& shape,
                                 const FaceBox& box, const DescriptorConfig& cfg) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(cfg.stacked_dimension(shape.size())));
  stacked_features_into(grad, shape, box, cfg, out);
  return out;
}

Eigen::VectorXd stacked_features(const GrayImage& image, const FaceShape& shape, const FaceBox& box,
                                 const DescriptorConfig& cfg) {
  const GradientField grad(image);
  return stacked_features(grad, shape, box, cfg);
}

}  // namespace cjcrf
