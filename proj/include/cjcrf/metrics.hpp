#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cjcrf/core.hpp"

namespace cjcrf {

/// Mean point-to-point distance divided by the ground-truth interocular
/// distance. Throws DegenerateGroundTruth when the eyes coincide.
double normalized_error(const FaceShape& pred, const FaceShape& gt, const EyeIndices& eyes);

struct F1Scores {
  std::vector<double> per_au;
  std::vector<std::size_t> positives;  // ground-truth positive count per AU
  double weighted = 0.0;
};

/// Per-AU F1 at `threshold` (0 when precision + recall is 0), averaged with
/// weights equal to each AU's positive count; AUs without positives are
/// left out of the average.
F1Scores f1_scores(std::span<const AUProbVector> pred, std::span<const AULabelVector> gt,
                   double threshold = 0.5);

struct AUCScores {
  std::vector<std::optional<double>> per_au;  // empty when an AU lacks a class
  std::vector<std::size_t> positives;
  double weighted = 0.0;
};

/// Mann-Whitney AUC per AU with ties counted one half.
AUCScores auc_scores(std::span<const AUProbVector> pred, std::span<const AULabelVector> gt);

struct EvalReport {
  double mean_normalized_error = 0.0;
  std::vector<double> per_au_f1;
  double weighted_f1 = 0.0;
  std::vector<std::optional<double>> per_au_auc;
  double weighted_auc = 0.0;
  std::vector<double> per_stage_error;
  std::size_t samples = 0;
};

EvalReport evaluate(std::span<const FaceShape> pred_shapes, std::span<const FaceShape> gt_shapes,
                    std::span<const AUProbVector> pred_probs, std::span<const AULabelVector> gt_labels,
                    const EyeIndices& eyes, double threshold = 0.5);

}  // namespace cjcrf
