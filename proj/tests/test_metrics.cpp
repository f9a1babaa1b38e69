#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"

#include "cjcrf/metrics.hpp"
#include "oracles.hpp"

using namespace cjcrf;

namespace {

struct AUCase {
  std::vector<AUProbVector> pred;
  std::vector<AULabelVector> gt;
};

// Scores drawn from a coarse grid so that ties occur.
AUCase random_case(Rng& r, std::size_t samples, std::size_t n_aus, bool coarse) {
  AUCase c;
  for (std::size_t m = 0; m < samples; ++m) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(n_aus));
    AULabelVector l;
    for (std::size_t i = 0; i < n_aus; ++i) {
      const int label = r.bernoulli(0.1 + 0.08 * static_cast<double>(i));
      const double s = std::clamp(0.5 + 0.3 * (label - 0.5) + 0.3 * r.normal(), 0.0, 1.0);
      p[static_cast<Eigen::Index>(i)] = coarse ? std::round(s * 10.0) / 10.0 : s;
      l.values.push_back(label);
    }
    c.pred.push_back(AUProbVector{p});
    c.gt.push_back(l);
  }
  return c;
}

std::vector<double> column(const AUCase& c, std::size_t i) {
  std::vector<double> v;
  for (const auto& p : c.pred) v.push_back(p.values[static_cast<Eigen::Index>(i)]);
  return v;
}

std::vector<int> labels(const AUCase& c, std::size_t i) {
  std::vector<int> v;
  for (const auto& l : c.gt) v.push_back(l.values[i]);
  return v;
}

FaceShape random_shape(Rng& r, std::size_t d) {
  std::vector<Point2> pts(d);
  for (auto& p : pts) p = {r.uniform(0, 100), r.uniform(0, 100)};
  return FaceShape(pts, Frame::ImagePixels);
}

FaceShape similarity(const FaceShape& s, double scale, double angle, double tx, double ty) {
  std::vector<Point2> out;
  for (const auto& p : s.points()) {
    out.push_back({scale * (std::cos(angle) * p.x - std::sin(angle) * p.y) + tx,
                   scale * (std::sin(angle) * p.x + std::cos(angle) * p.y) + ty});
  }
  return FaceShape(out, s.frame());
}

}  // namespace

TEST_CASE("normalized error worked examples") {
  Rng r = oracle::rng(50);
  const FaceShape gt = random_shape(r, 28);
  CHECK(normalized_error(gt, gt, {0, 1}) == 0.0);

  std::vector<Point2> pts(28, Point2{10, 10});
  pts[0] = {0, 0};
  pts[1] = {50, 0};
  const FaceShape truth(pts, Frame::ImagePixels);
  pts[5].x += 5.0;
  const FaceShape pred(pts, Frame::ImagePixels);
  CHECK(normalized_error(pred, truth, {0, 1}) == doctest::Approx(5.0 / 50.0 / 28.0).epsilon(1e-14));
}

TEST_CASE("normalized error matches a scalar loop") {
  Rng r = oracle::rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    const FaceShape gt = random_shape(r, 28);
    const FaceShape pred = random_shape(r, 28);
    double acc = 0.0;
    for (std::size_t i = 0; i < 28; ++i) {
      const double dx = pred[i].x - gt[i].x;
      const double dy = pred[i].y - gt[i].y;
      acc += std::sqrt(dx * dx + dy * dy);
    }
    const double dx = gt[6].x - gt[12].x;
    const double dy = gt[6].y - gt[12].y;
    const double expected = acc / 28.0 / std::sqrt(dx * dx + dy * dy);
    CHECK(std::abs(normalized_error(pred, gt, {6, 12}) - expected) < 1e-12);
  }
}

TEST_CASE("normalized error is similarity invariant") {
  Rng r = oracle::rng(52);
  for (int trial = 0; trial < 50; ++trial) {
    const FaceShape gt = random_shape(r, 28);
    const FaceShape pred = random_shape(r, 28);
    const double scale = r.uniform(0.1, 10.0);
    const double angle = r.uniform(-std::numbers::pi, std::numbers::pi);
    const double tx = r.uniform(-500, 500);
    const double ty = r.uniform(-500, 500);
    const double a = normalized_error(pred, gt, {6, 12});
    const double b = normalized_error(similarity(pred, scale, angle, tx, ty),
                                      similarity(gt, scale, angle, tx, ty), {6, 12});
    CHECK(std::abs(a - b) < 1e-9);
  }
}

TEST_CASE("normalized error rejects degenerate ground truth") {
  const FaceShape gt({{1, 1}, {1, 1}, {3, 3}}, Frame::ImagePixels);
  CHECK_THROWS_AS(normalized_error(gt, gt, {0, 1}), DegenerateGroundTruth);
  CHECK_THROWS_AS(normalized_error(FaceShape({{1, 1}}, Frame::ImagePixels), gt, {0, 2}), DimensionMismatch);
}

TEST_CASE("F1 worked examples") {
  const std::vector<AULabelVector> gt{{{1, 0}}, {{0, 1}}, {{1, 1}}, {{0, 0}}};
  std::vector<AUProbVector> perfect;
  for (const auto& l : gt) perfect.push_back(AUProbVector{l.as_vector()});
  const F1Scores f = f1_scores(perfect, gt);
  CHECK(f.per_au == std::vector<double>{1.0, 1.0});
  CHECK(f.weighted == 1.0);

  std::vector<AUProbVector> negative(4, AUProbVector{Eigen::Vector2d(0.1, 0.2)});
  const F1Scores z = f1_scores(negative, gt);
  CHECK(z.per_au == std::vector<double>{0.0, 0.0});
  CHECK(z.weighted == 0.0);
  CHECK_THROWS(f1_scores(perfect, gt, 0.0));
  CHECK_THROWS(f1_scores(perfect, gt, 1.0));
}

TEST_CASE("F1 matches explicit confusion counting") {
  Rng r = oracle::rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const AUCase c = random_case(r, 60, 5, trial % 2 == 0);
    const double threshold = r.uniform(0.2, 0.8);
    const F1Scores f = f1_scores(c.pred, c.gt, threshold);
    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      const oracle::Confusion conf = oracle::count_confusion(column(c, i), labels(c, i), threshold);
      const double expected = oracle::f1_from_confusion(conf);
      CHECK(std::abs(f.per_au[i] - expected) < 1e-12);
      CHECK(f.positives[i] == static_cast<std::size_t>(conf.tp + conf.fn));
      weighted += (conf.tp + conf.fn) * expected;
      total += conf.tp + conf.fn;
    }
    CHECK(std::abs(f.weighted - weighted / total) < 1e-12);
  }
}

TEST_CASE("AUC worked examples") {
  const std::vector<AULabelVector> gt{{{1}}, {{1}}, {{0}}, {{0}}};
  const std::vector<AUProbVector> separated{AUProbVector{Eigen::VectorXd::Constant(1, 0.9)},
                                            AUProbVector{Eigen::VectorXd::Constant(1, 0.8)},
                                            AUProbVector{Eigen::VectorXd::Constant(1, 0.3)},
                                            AUProbVector{Eigen::VectorXd::Constant(1, 0.1)}};
  CHECK(auc_scores(separated, gt).per_au[0] == 1.0);
  const std::vector<AUProbVector> tied(4, AUProbVector{Eigen::VectorXd::Constant(1, 0.4)});
  CHECK(auc_scores(tied, gt).per_au[0] == 0.5);
  const std::vector<AULabelVector> one_class(4, AULabelVector{{1}});
  const AUCScores undefined = auc_scores(tied, one_class);
  CHECK_FALSE(undefined.per_au[0].has_value());
  CHECK(undefined.weighted == 0.0);
}

TEST_CASE("AUC matches the pairwise brute force") {
  Rng r = oracle::rng(54);
  for (int trial = 0; trial < 50; ++trial) {
    const AUCase c = random_case(r, 80, 4, trial % 2 == 0);
    const AUCScores a = auc_scores(c.pred, c.gt);
    for (std::size_t i = 0; i < 4; ++i) {
      const std::vector<int> l = labels(c, i);
      const auto pos = std::count(l.begin(), l.end(), 1);
      if (pos == 0 || pos == static_cast<long>(l.size())) {
        CHECK_FALSE(a.per_au[i].has_value());
        continue;
      }
      REQUIRE(a.per_au[i].has_value());
      CHECK(std::abs(*a.per_au[i] - oracle::pairwise_auc(column(c, i), l)) < 1e-12);
    }
  }
}

TEST_CASE("AUC is invariant under increasing transforms") {
  Rng r = oracle::rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const AUCase c = random_case(r, 50, 3, trial % 2 == 0);
    AUCase e = c;
    AUCase lin = c;
    for (std::size_t m = 0; m < c.pred.size(); ++m) {
      e.pred[m].values = c.pred[m].values.array().exp();
      lin.pred[m].values = (3.0 * c.pred[m].values.array() + 7.0);
    }
    const AUCScores a = auc_scores(c.pred, c.gt);
    const AUCScores b = auc_scores(e.pred, e.gt);
    const AUCScores d = auc_scores(lin.pred, lin.gt);
    for (std::size_t i = 0; i < 3; ++i) {
      REQUIRE(a.per_au[i].has_value());
      CHECK(*a.per_au[i] == *b.per_au[i]);
      CHECK(*a.per_au[i] == *d.per_au[i]);
    }
  }
}

TEST_CASE("weighted scores lie between their per-AU constituents") {
  Rng r = oracle::rng(56);
  for (int trial = 0; trial < 30; ++trial) {
    const AUCase c = random_case(r, 40, 6, trial % 2 == 0);
    const F1Scores f = f1_scores(c.pred, c.gt);
    double lo = 2.0, hi = -1.0;
    for (std::size_t i = 0; i < 6; ++i) {
      if (f.positives[i] == 0) continue;
      lo = std::min(lo, f.per_au[i]);
      hi = std::max(hi, f.per_au[i]);
    }
    CHECK(f.weighted >= lo - 1e-15);
    CHECK(f.weighted <= hi + 1e-15);
    const AUCScores a = auc_scores(c.pred, c.gt);
    lo = 2.0;
    hi = -1.0;
    for (const auto& v : a.per_au) {
      if (!v) continue;
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
    CHECK(a.weighted >= lo - 1e-15);
    CHECK(a.weighted <= hi + 1e-15);
  }
}

TEST_CASE("evaluate combines the metrics") {
  Rng r = oracle::rng(57);
  const AUCase c = random_case(r, 30, 4, false);
  std::vector<FaceShape> gt, pred;
  for (int m = 0; m < 30; ++m) {
    gt.push_back(random_shape(r, 28));
    pred.push_back(random_shape(r, 28));
  }
  const EvalReport rep = evaluate(pred, gt, c.pred, c.gt, {6, 12}, 0.5);
  double err = 0.0;
  for (int m = 0; m < 30; ++m) err += normalized_error(pred[m], gt[m], {6, 12});
  CHECK(rep.samples == 30);
  CHECK(std::abs(rep.mean_normalized_error - err / 30.0) < 1e-14);
  CHECK(rep.weighted_f1 == f1_scores(c.pred, c.gt, 0.5).weighted);
  CHECK(rep.weighted_auc == auc_scores(c.pred, c.gt).weighted);
}
