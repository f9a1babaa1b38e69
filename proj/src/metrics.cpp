#include "cjcrf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cjcrf {

namespace {

std::size_t checked_au_count(std::span<const AUProbVector> pred, std::span<const AULabelVector> gt) {
  if (pred.empty()) throw std::invalid_argument("metrics: empty prediction list");
  if (pred.size() != gt.size()) throw DimensionMismatch("metrics: prediction/label counts differ");
  const std::size_t n = gt.front().size();
  for (std::size_t m = 0; m < pred.size(); ++m) {
    if (pred[m].size() != n || gt[m].size() != n) {
      throw DimensionMismatch("metrics: AU vector lengths differ");
    }
  }
  return n;
}

}  // namespace

double normalized_error(const FaceShape& pred, const FaceShape& gt, const EyeIndices& eyes) {
  if (pred.size() != gt.size() || gt.size() == 0) {
    throw DimensionMismatch("normalized_error: landmark counts differ");
  }
  const double iod = interocular_distance(gt, eyes.first, eyes.second);
  if (!(iod > 0.0)) throw DegenerateGroundTruth("normalized_error: coincident eye landmarks");
  double acc = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    acc += std::hypot(pred[i].x - gt[i].x, pred[i].y - gt[i].y);
  }
  return acc / static_cast<double>(gt.size()) / iod;
}

F1Scores f1_scores(std::span<const AUProbVector> pred, std::span<const AULabelVector> gt,
                   double threshold) {
  const std::size_t n = checked_au_count(pred, gt);
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("f1_scores: threshold must lie in (0, 1)");
  }
  F1Scores out;
  out.per_au.assign(n, 0.0);
  out.positives.assign(n, 0);
  double weighted = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t m = 0; m < pred.size(); ++m) {
      const bool predicted = pred[m].values[static_cast<Eigen::Index>(i)] >= threshold;
      const bool actual = gt[m].values[i] == 1;
      tp += predicted && actual;
      fp += predicted && !actual;
      fn += !predicted && actual;
    }
    // F1 = 2 tp / (2 tp + fp + fn), equal to 2PR / (P + R) whenever defined.
    const std::size_t denom = 2 * tp + fp + fn;
    out.per_au[i] = (tp == 0 || denom == 0) ? 0.0 : 2.0 * tp / static_cast<double>(denom);
    out.positives[i] = tp + fn;
    weighted += static_cast<double>(out.positives[i]) * out.per_au[i];
    total += out.positives[i];
  }
  out.weighted = total ? weighted / static_cast<double>(total) : 0.0;
  return out;
}

AUCScores auc_scores(std::span<const AUProbVector> pred, std::span<const AULabelVector> gt) {
  const std::size_t n = checked_au_count(pred, gt);
  const std::size_t count = pred.size();
  AUCScores out;
  out.per_au.assign(n, std::nullopt);
  out.positives.assign(n, 0);
  double weighted = 0.0;
  std::size_t total = 0;
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < n; ++i) {
    const auto score = [&](std::size_t m) { return pred[m].values[static_cast<Eigen::Index>(i)]; };
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return score(l) < score(r); });

    // Sum of midranks of the positives.
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t start = 0; start < count;) {
      std::size_t end = start;
      while (end < count && score(order[end]) == score(order[start])) ++end;
      const double midrank = 0.5 * static_cast<double>(start + 1 + end);
      for (std::size_t k = start; k < end; ++k) {
        if (gt[order[k]].values[i] == 1) {
          rank_sum += midrank;
          ++pos;
        }
      }
      start = end;
    }
    const std::size_t neg = count - pos;
    out.positives[i] = pos;
    if (pos == 0 || neg == 0) continue;
    const double u = rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
    const double auc = u / (static_cast<double>(pos) * static_cast<double>(neg));
    out.per_au[i] = auc;
    weighted += static_cast<double>(pos) * auc;
    total += pos;
  }
  out.weighted = total ? weighted / static_cast<double>(total) : 0.0;
  return out;
}

EvalReport evaluate(std::span<const FaceShape> pred_shapes, std::span<const FaceShape> gt_shapes,
                    std::span<const AUProbVector> pred_probs, std::span<const AULabelVector> gt_labels,
                    const EyeIndices& eyes, double threshold) {
  if (pred_shapes.size() != gt_shapes.size() || pred_shapes.empty()) {
    throw DimensionMismatch("evaluate: shape lists misaligned or empty");
  }
  EvalReport report;
  report.samples = gt_shapes.size();
  double err = 0.0;
  for (std::size_t m = 0; m < gt_shapes.size(); ++m) {
    err += normalized_error(pred_shapes[m], gt_shapes[m], eyes);
  }
  report.mean_normalized_error = err / static_cast<double>(gt_shapes.size());
  const F1Scores f1 = f1_scores(pred_probs, gt_labels, threshold);
  report.per_au_f1 = f1.per_au;
  report.weighted_f1 = f1.weighted;
  const AUCScores auc = auc_scores(pred_probs, gt_labels);
  report.per_au_auc = auc.per_au;
  report.weighted_auc = auc.weighted;
  return report;
}

}  // namespace cjcrf
