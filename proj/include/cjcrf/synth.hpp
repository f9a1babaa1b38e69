#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cjcrf/core.hpp"

namespace cjcrf::synth {

/// Outer eye corners of the 28-point template.
inline constexpr std::size_t kLeftEyeOuter = 6;
inline constexpr std::size_t kRightEyeOuter = 12;
inline constexpr EyeIndices kEyeIndices{kLeftEyeOuter, kRightEyeOuter};
inline constexpr std::size_t kTemplateLandmarks = 28;
inline constexpr std::size_t kMaxAUs = 20;

struct AUCoupling {
  std::size_t i = 0;
  std::size_t j = 0;
  double strength = 0.0;

  friend bool operator==(const AUCoupling&, const AUCoupling&) = default;
};

struct SynthConfig {
  std::size_t n_samples = 100;
  std::size_t n_aus = 8;
  std::size_t d_landmarks = kTemplateLandmarks;
  int image_size = 128;
  double shape_noise = 0.01;      // canonical units, per coordinate
  std::vector<AUCoupling> au_pair_coupling = default_coupling();
  double deform_magnitude = 0.08;  // canonical units, norm of each AU's deformation
  std::uint64_t seed = 0;

  // Generator knobs beyond the core schema.
  std::uint64_t world_seed = 0;   // AU deformations and ridges; shared by train and test sets
  double au_bias = -1.5;          // Ising field, shared by every AU
  double rotation_deg = 0.0;      // pose rotation range, +-
  double face_fraction_min = 0.55;  // face box side relative to image side
  double face_fraction_max = 0.70;
  double center_jitter = 0.06;    // fraction of image side
  double stroke_width = 0.012;    // canonical units
  double stroke_contrast = 0.2;
  double appearance_contrast = 0.06;
  double pixel_noise = 0.25;

  static std::vector<AUCoupling> default_coupling();
  void validate() const;
  /// One-line `key=value` echo used in dataset manifests.
  std::string echo() const;
};

/// Canonical 28-point template (centre-origin, larger bounding-box side
/// equal to 1 / 1.2 so that the inflated box has unit face size).
const std::vector<Point2>& face_template();

/// Landmark index pairs drawn as strokes.
const std::vector<std::pair<std::size_t, std::size_t>>& template_edges();

/// Per-AU deformation vectors (2D x N), mutually orthogonal, each of norm
/// cfg.deform_magnitude. Depends on cfg.world_seed only, not on cfg.seed.
Eigen::MatrixXd au_deformations(const SynthConfig& cfg);

/// Exact label distribution of the Ising sampler over all 2^N label vectors,
/// indexed by bit mask.
Eigen::VectorXd label_distribution(const SynthConfig& cfg);

std::vector<Sample> generate(const SynthConfig& cfg);

}  // namespace cjcrf::synth
