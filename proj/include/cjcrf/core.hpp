#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cjcrf {

/// Landmark count used by the synthetic template and the default model.
inline constexpr std::size_t kDefaultLandmarks = 28;

// ---------------------------------------------------------------------------
// Errors

class InvalidBox : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateGroundTruth : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Value types

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

enum class Frame { ImagePixels, Canonical };

/// Ordered landmark set. Canonical shapes are centred on the face box and
/// divided by its larger side.
class FaceShape {
 public:
  FaceShape() = default;
  FaceShape(std::vector<Point2> points, Frame frame);

  /// Builds a shape from interleaved coordinates (x0, y0, x1, y1, ...).
  static FaceShape from_flat(const Eigen::VectorXd& flat, Frame frame);

  Eigen::VectorXd flat() const;

  std::size_t size() const { return points_.size(); }
  Frame frame() const { return frame_; }
  const std::vector<Point2>& points() const { return points_; }
  const Point2& operator[](std::size_t i) const { return points_[i]; }

  friend bool operator==(const FaceShape&, const FaceShape&) = default;

 private:
  std::vector<Point2> points_;
  Frame frame_ = Frame::ImagePixels;
};

struct FaceBox {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;

  /// Throws InvalidBox unless width and height are positive and finite.
  void validate() const;
  Point2 center() const { return {left + 0.5 * width, top + 0.5 * height}; }
  double face_size() const { return width > height ? width : height; }

  friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

/// Row-major grayscale image with intensities in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  /// Replicate-padded access.
  double clamped(int x, int y) const;
  std::span<const double> pixels() const { return pixels_; }
  std::span<double> pixels() { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

struct AULabelVector {
  std::vector<int> values;

  std::size_t size() const { return values.size(); }
  Eigen::VectorXd as_vector() const;

  friend bool operator==(const AULabelVector&, const AULabelVector&) = default;
};

struct AUProbVector {
  Eigen::VectorXd values;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  AULabelVector threshold(double t) const;
};

struct Sample {
  GrayImage image;
  FaceBox box;
  FaceShape gt_shape;  // ImagePixels
  AULabelVector gt_labels;
};

using EyeIndices = std::pair<std::size_t, std::size_t>;

// ---------------------------------------------------------------------------
// Operations

FaceShape to_canonical(const FaceShape& shape, const FaceBox& box);
FaceShape from_canonical(const FaceShape& shape, const FaceBox& box);

FaceShape mean_shape(std::span<const FaceShape> shapes);

double interocular_distance(const FaceShape& shape, std::size_t left_eye, std::size_t right_eye);

/// Throws std::invalid_argument if any entry is not 0 or 1.
void validate_labels(const AULabelVector& labels);

}  // namespace cjcrf
