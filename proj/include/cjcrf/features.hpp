#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "cjcrf/core.hpp"

namespace cjcrf {

struct DescriptorConfig {
  double radius_fraction = 0.166;  // of face_size
  int grid_cells = 4;
  int orientation_bins = 8;
  double clip_threshold = 0.2;

  void validate() const;
  /// Per-landmark descriptor length.
  std::size_t dimension() const {
    return static_cast<std::size_t>(grid_cells * grid_cells * orientation_bins);
  }
  /// Stacked length for `landmarks` points, bias included.
  std::size_t stacked_dimension(std::size_t landmarks) const {
    return dimension() * landmarks + 1;
  }

  friend bool operator==(const DescriptorConfig&, const DescriptorConfig&) = default;
};

/// Central-difference gradients of a replicate-padded image. Inside the
/// image they are cached; outside they are evaluated on demand from the
/// padded intensities.
class GradientField {
 public:
  explicit GradientField(const GrayImage& image);

  /// Gradient (d/dx, d/dy) at integer pixel (x, y), any coordinates.
  void at(int x, int y, double& gx, double& gy) const;
  /// Magnitude and orientation in [0, 2pi) of the same gradient.
  void polar(int x, int y, double& mag, double& angle) const;

 private:
  const GrayImage* image_;
  std::vector<double> gx_;
  std::vector<double> gy_;
  std::vector<double> mag_;
  std::vector<double> angle_;
};

/// Gradient-orientation histogram of the square window [center +- radius].
/// Samples lie on the pixel lattice anchored at floor(center + 0.5); spatial
/// and Gaussian weights use the real-valued center. Result has unit L2 norm
/// after clipping, or is all zero for a window without gradient energy.
Eigen::VectorXd extract_descriptor(const GrayImage& image, Point2 center, double radius,
                                   const DescriptorConfig& cfg);
Eigen::VectorXd extract_descriptor(const GradientField& grad, Point2 center, double radius,
                                   const DescriptorConfig& cfg);

/// Concatenated per-landmark descriptors followed by a constant 1.
Eigen::VectorXd stacked_features(const GrayImage& image, const FaceShape& shape, const FaceBox& box,
                                 const DescriptorConfig& cfg);
Eigen::VectorXd stacked_features(const GradientField& grad, const FaceShape& shape,
                                 const FaceBox& box, const DescriptorConfig& cfg);

/// Writes stacked features into an existing row/column buffer of length
/// cfg.stacked_dimension(shape.size()).
void stacked_features_into(const GradientField& grad, const FaceShape& shape, const FaceBox& box,
                           const DescriptorConfig& cfg, Eigen::Ref<Eigen::VectorXd> out);

}  // namespace cjcrf
