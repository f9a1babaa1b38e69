#include "cjcrf/core.hpp"

#include <algorithm>
#include <cmath>

namespace cjcrf {

namespace {

constexpr double kCanonicalBound = 4.0;

void require_finite(const std::vector<Point2>& points) {
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw std::invalid_argument("FaceShape: non-finite landmark coordinate");
    }
  }
}

}  // namespace

FaceShape::FaceShape(std::vector<Point2> points, Frame frame)
    : points_(std::move(points)), frame_(frame) {
  require_finite(points_);
}

FaceShape FaceShape::from_flat(const Eigen::VectorXd& flat, Frame frame) {
  if (flat.size() % 2 != 0) {
    throw DimensionMismatch("FaceShape::from_flat: odd coordinate count");
  }
  std::vector<Point2> pts(static_cast<std::size_t>(flat.size() / 2));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = {flat[2 * i], flat[2 * i + 1]};
  }
  return FaceShape(std::move(pts), frame);
}

Eigen::VectorXd FaceShape::flat() const {
  Eigen::VectorXd v(2 * points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    v[2 * i] = points_[i].x;
    v[2 * i + 1] = points_[i].y;
  }
  return v;
}

void FaceBox::validate() const {
  if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height) ||
      !std::isfinite(left) || !std::isfinite(top)) {
    throw InvalidBox("face box must have positive finite width and height");
  }
}

GrayImage::GrayImage(int width, int height, double fill)
    : GrayImage(width, height,
                std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                        static_cast<std::size_t>(std::max(height, 0)),
                                    fill)) {}

GrayImage::GrayImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("GrayImage: dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DimensionMismatch("GrayImage: pixel count does not match dimensions");
  }
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("GrayImage: intensities must lie in [0, 1]");
    }
  }
}

double GrayImage::clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y);
}

Eigen::VectorXd AULabelVector::as_vector() const {
  Eigen::VectorXd v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v[i] = values[i];
  return v;
}

AULabelVector AUProbVector::threshold(double t) const {
  AULabelVector out;
  out.values.resize(size());
  for (std::size_t i = 0; i < size(); ++i) out.values[i] = values[i] >= t ? 1 : 0;
  return out;
}

void validate_labels(const AULabelVector& labels) {
  for (int v : labels.values) {
    if (v != 0 && v != 1) throw std::invalid_argument("AU labels must be 0 or 1");
  }
}

FaceShape to_canonical(const FaceShape& shape, const FaceBox& box) {
  box.validate();
  if (shape.frame() != Frame::ImagePixels) {
    throw std::invalid_argument("to_canonical: shape is not in the image-pixel frame");
  }
  const Point2 c = box.center();
  const double s = box.face_size();
  std::vector<Point2> out(shape.size());
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out[i] = {(shape[i].x - c.x) / s, (shape[i].y - c.y) / s};
    if (std::abs(out[i].x) > kCanonicalBound || std::abs(out[i].y) > kCanonicalBound) {
      throw std::domain_error("to_canonical: landmark far outside the face box");
    }
  }
  return FaceShape(std::move(out), Frame::Canonical);
}

FaceShape from_canonical(const FaceShape& shape, const FaceBox& box) {
  box.validate();
  if (shape.frame() != Frame::Canonical) {
    throw std::invalid_argument("from_canonical: shape is not in the canonical frame");
  }
  const Point2 c = box.center();
  const double s = box.face_size();
  std::vector<Point2> out(shape.size());
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out[i] = {shape[i].x * s + c.x, shape[i].y * s + c.y};
  }
  return FaceShape(std::move(out), Frame::ImagePixels);
}

FaceShape mean_shape(std::span<const FaceShape> shapes) {
  if (shapes.empty()) throw std::invalid_argument("mean_shape: empty shape list");
  const std::size_t d = shapes.front().size();
  const Frame frame = shapes.front().frame();
  std::vector<Point2> acc(d);
  for (const auto& s : shapes) {
    if (s.size() != d) throw DimensionMismatch("mean_shape: landmark counts differ");
    if (s.frame() != frame) throw std::invalid_argument("mean_shape: mixed coordinate frames");
    for (std::size_t i = 0; i < d; ++i) {
      acc[i].x += s[i].x;
      acc[i].y += s[i].y;
    }
  }
  const double n = static_cast<double>(shapes.size());
  for (auto& p : acc) {
    p.x /= n;
    p.y /= n;
  }
  return FaceShape(std::move(acc), frame);
}

double interocular_distance(const FaceShape& shape, std::size_t left_eye, std::size_t right_eye) {
  if (left_eye == right_eye) {
    throw std::invalid_argument("interocular_distance: eye indices must differ");
  }
  if (left_eye >= shape.size() || right_eye >= shape.size()) {
    throw std::out_of_range("interocular_distance: eye index out of range");
  }
  return std::hypot(shape[left_eye].x - shape[right_eye].x, shape[left_eye].y - shape[right_eye].y);
}

}  // namespace cjcrf
