#include "cjcrf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cjcrf/random.hpp"

namespace cjcrf::synth {

namespace {

// Landmark groups; AU i deforms group (i mod 4).
const std::vector<std::vector<std::size_t>>& regions() {
  static const std::vector<std::vector<std::size_t>> r = {
      {0, 1, 2, 3, 4, 5},                           // brows
      {6, 7, 8, 9, 10, 11, 12, 13},                 // eyes
      {14, 15, 16, 17},                             // nose
      {18, 19, 20, 21, 22, 23, 24, 25, 26, 27},     // mouth
  };
  return r;
}

std::vector<Point2> build_template() {
  // Raw layout, y pointing down.
  std::vector<Point2> t = {
      // brows: left outer -> inner, right inner -> outer
      {-0.32, -0.22}, {-0.20, -0.27}, {-0.08, -0.23},
      {0.08, -0.23}, {0.20, -0.27}, {0.32, -0.22},
      // left eye: outer, top, inner, bottom
      {-0.28, -0.12}, {-0.18, -0.16}, {-0.08, -0.12}, {-0.18, -0.09},
      // right eye: inner, top, outer, bottom
      {0.08, -0.12}, {0.18, -0.16}, {0.28, -0.12}, {0.18, -0.09},
      // nose: bridge, tip, left wing, right wing
      {0.0, -0.10}, {0.0, 0.06}, {-0.07, 0.09}, {0.07, 0.09},
      // outer lips: left corner, upper-left, upper-mid, upper-right,
      // right corner, lower-right, lower-mid, lower-left
      {-0.16, 0.22}, {-0.08, 0.18}, {0.0, 0.19}, {0.08, 0.18},
      {0.16, 0.22}, {0.08, 0.28}, {0.0, 0.30}, {-0.08, 0.28},
      // inner lips: upper, lower
      {0.0, 0.215}, {0.0, 0.235},
  };
  double minx = 1e9, maxx = -1e9, miny = 1e9, maxy = -1e9;
  for (const auto& p : t) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const double cx = 0.5 * (minx + maxx);
  const double cy = 0.5 * (miny + maxy);
  const double s = (1.0 / 1.2) / std::max(maxx - minx, maxy - miny);
  for (auto& p : t) p = {(p.x - cx) * s, (p.y - cy) * s};
  return t;
}

double segment_distance2(double px, double py, const Point2& a, const Point2& b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (a.x + t * vx);
  const double dy = py - (a.y + t * vy);
  return dx * dx + dy * dy;
}

struct Stroke {
  Point2 a;
  Point2 b;
  double width;     // pixels
  double contrast;  // subtracted intensity at the centre line
};

void draw_strokes(GrayImage& img, const std::vector<Stroke>& strokes) {
  for (const auto& s : strokes) {
    if (s.contrast == 0.0) continue;
    const double reach = 4.0 * s.width;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(s.a.x, s.b.x) - reach)));
    const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(std::max(s.a.x, s.b.x) + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(s.a.y, s.b.y) - reach)));
    const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max(s.a.y, s.b.y) + reach)));
    const double inv = 1.0 / (2.0 * s.width * s.width);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        img.at(x, y) -= s.contrast * std::exp(-segment_distance2(x, y, s.a, s.b) * inv);
      }
    }
  }
}

// AU appearance ridge: a short segment offset from two landmarks of the AU's region.
struct Ridge {
  std::size_t k1;
  std::size_t k2;
  Point2 offset;  // template units
};

std::vector<Ridge> au_ridges(const SynthConfig& cfg) {
  Rng rng = Rng::stream(cfg.world_seed, StreamDomain::SynthDeformation, 1);
  std::vector<Ridge> out;
  for (std::size_t i = 0; i < cfg.n_aus; ++i) {
    const auto& region = regions()[i % regions().size()];
    const std::size_t a = region[rng.below(region.size())];
    std::size_t b = region[rng.below(region.size())];
    if (b == a) b = region[(std::find(region.begin(), region.end(), a) - region.begin() + 1) % region.size()];
    const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
    out.push_back({a, b, {0.06 * std::cos(ang), 0.06 * std::sin(ang)}});
  }
  return out;
}

}  // namespace

std::vector<AUCoupling> SynthConfig::default_coupling() {
  return {{0, 1, 2.5}, {2, 3, 2.0}, {4, 5, 2.0}, {5, 6, 1.0}};
}

void SynthConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("SynthConfig: n_samples must be >= 1");
  if (n_aus < 1 || n_aus > kMaxAUs) throw std::invalid_argument("SynthConfig: n_aus must be in [1, 20]");
  if (d_landmarks != kTemplateLandmarks) {
    throw std::invalid_argument("SynthConfig: the template has exactly 28 landmarks");
  }
  if (image_size < 32) throw std::invalid_argument("SynthConfig: image_size must be >= 32");
  if (!(deform_magnitude > 0.0)) throw std::invalid_argument("SynthConfig: deform_magnitude must be > 0");
  if (!(shape_noise >= 0.0) || !(pixel_noise >= 0.0)) {
    throw std::invalid_argument("SynthConfig: noise levels must be >= 0");
  }
  if (!(face_fraction_min > 0.0) || face_fraction_max < face_fraction_min || face_fraction_max > 0.9) {
    throw std::invalid_argument("SynthConfig: invalid face size range");
  }
  for (const auto& c : au_pair_coupling) {
    if (c.i >= n_aus || c.j >= n_aus || c.i == c.j) {
      throw std::invalid_argument("SynthConfig: coupling refers to an invalid AU pair");
    }
  }
}

std::string SynthConfig::echo() const {
  std::ostringstream os;
  os.precision(17);
  os << "n_samples=" << n_samples << " n_aus=" << n_aus << " d_landmarks=" << d_landmarks
     << " image_size=" << image_size << " shape_noise=" << shape_noise
     << " deform_magnitude=" << deform_magnitude << " seed=" << seed << " world_seed=" << world_seed
     << " au_bias=" << au_bias << " rotation_deg=" << rotation_deg << " face_fraction=" << face_fraction_min
     << ".." << face_fraction_max << " center_jitter=" << center_jitter << " stroke_width=" << stroke_width
     << " stroke_contrast=" << stroke_contrast << " appearance_contrast=" << appearance_contrast
     << " pixel_noise=" << pixel_noise << " coupling=";
  for (std::size_t k = 0; k < au_pair_coupling.size(); ++k) {
    if (k) os << ',';
    os << au_pair_coupling[k].i << ':' << au_pair_coupling[k].j << ':' << au_pair_coupling[k].strength;
  }
  return os.str();
}

const std::vector<Point2>& face_template() {
  static const std::vector<Point2> t = build_template();
  return t;
}

const std::vector<std::pair<std::size_t, std::size_t>>& template_edges() {
  static const std::vector<std::pair<std::size_t, std::size_t>> e = {
      {0, 1}, {1, 2}, {3, 4}, {4, 5},                     // brows
      {6, 7}, {7, 8}, {8, 9}, {9, 6},                     // left eye
      {10, 11}, {11, 12}, {12, 13}, {13, 10},             // right eye
      {14, 15}, {16, 15}, {15, 17},                       // nose
      {18, 19}, {19, 20}, {20, 21}, {21, 22},             // upper lip
      {22, 23}, {23, 24}, {24, 25}, {25, 18},             // lower lip
      {18, 26}, {26, 22}, {18, 27}, {27, 22},             // inner lips
  };
  return e;
}

Eigen::MatrixXd au_deformations(const SynthConfig& cfg) {
  const auto dims = static_cast<Eigen::Index>(2 * kTemplateLandmarks);
  Eigen::MatrixXd dirs = Eigen::MatrixXd::Zero(dims, static_cast<Eigen::Index>(cfg.n_aus));
  Rng rng = Rng::stream(cfg.world_seed, StreamDomain::SynthDeformation, 0);
  for (Eigen::Index i = 0; i < dirs.cols(); ++i) {
    const auto& region = regions()[static_cast<std::size_t>(i) % regions().size()];
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dims);
    for (std::size_t k : region) {
      v[static_cast<Eigen::Index>(2 * k)] = rng.normal();
      v[static_cast<Eigen::Index>(2 * k + 1)] = rng.normal();
    }
    for (Eigen::Index j = 0; j < i; ++j) v -= dirs.col(j).dot(v) * dirs.col(j);
    dirs.col(i) = v.normalized();
  }
  return dirs * cfg.deform_magnitude;
}

Eigen::VectorXd label_distribution(const SynthConfig& cfg) {
  const std::size_t n = cfg.n_aus;
  const unsigned count = 1u << n;
  Eigen::VectorXd logw(count);
  for (unsigned mask = 0; mask < count; ++mask) {
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) e += cfg.au_bias;
    }
    for (const auto& c : cfg.au_pair_coupling) {
      if ((mask & (1u << c.i)) && (mask & (1u << c.j))) e += c.strength;
    }
    logw[mask] = e;
  }
  const Eigen::VectorXd w = (logw.array() - logw.maxCoeff()).exp();
  return w / w.sum();
}

std::vector<Sample> generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto& tmpl = face_template();
  const Eigen::MatrixXd deform = au_deformations(cfg);
  const std::vector<Ridge> ridges = au_ridges(cfg);
  const Eigen::VectorXd dist = label_distribution(cfg);
  std::vector<double> cumulative(static_cast<std::size_t>(dist.size()));
  double acc = 0.0;
  for (Eigen::Index k = 0; k < dist.size(); ++k) cumulative[static_cast<std::size_t>(k)] = acc += dist[k];

  const int size = cfg.image_size;
  std::vector<Sample> out(cfg.n_samples);

#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t idx = 0; idx < cfg.n_samples; ++idx) {
    Rng label_rng = Rng::stream(cfg.seed, StreamDomain::SynthLabels, idx);
    const double u = label_rng.uniform() * acc;
    const auto mask = static_cast<unsigned>(
        std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin(),
                                 static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
    AULabelVector labels;
    labels.values.resize(cfg.n_aus);
    for (std::size_t i = 0; i < cfg.n_aus; ++i) labels.values[i] = (mask >> i) & 1u;

    Rng rng = Rng::stream(cfg.seed, StreamDomain::SynthSample, idx);
    Eigen::VectorXd local(static_cast<Eigen::Index>(2 * tmpl.size()));
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
      local[static_cast<Eigen::Index>(2 * k)] = tmpl[k].x;
      local[static_cast<Eigen::Index>(2 * k + 1)] = tmpl[k].y;
    }
    for (std::size_t i = 0; i < cfg.n_aus; ++i) {
      if (labels.values[i]) local += deform.col(static_cast<Eigen::Index>(i));
    }
    for (Eigen::Index k = 0; k < local.size(); ++k) local[k] += cfg.shape_noise * rng.normal();

    const double face_px = size * rng.uniform(cfg.face_fraction_min, cfg.face_fraction_max);
    const double theta = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg) * std::numbers::pi / 180.0;
    const double ox = size * (0.5 + rng.uniform(-cfg.center_jitter, cfg.center_jitter));
    const double oy = size * (0.5 + rng.uniform(-cfg.center_jitter, cfg.center_jitter));
    const double cs = face_px * std::cos(theta);
    const double sn = face_px * std::sin(theta);
    const auto to_pixels = [&](double lx, double ly) {
      return Point2{ox + cs * lx - sn * ly, oy + sn * lx + cs * ly};
    };

    std::vector<Point2> pts(tmpl.size());
    double minx = 1e300, maxx = -1e300, miny = 1e300, maxy = -1e300;
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
      pts[k] = to_pixels(local[static_cast<Eigen::Index>(2 * k)], local[static_cast<Eigen::Index>(2 * k + 1)]);
      pts[k].x = std::clamp(pts[k].x, 0.0, size - 1.0);
      pts[k].y = std::clamp(pts[k].y, 0.0, size - 1.0);
      minx = std::min(minx, pts[k].x);
      maxx = std::max(maxx, pts[k].x);
      miny = std::min(miny, pts[k].y);
      maxy = std::max(maxy, pts[k].y);
    }
    FaceBox box;
    box.width = 1.2 * (maxx - minx);
    box.height = 1.2 * (maxy - miny);
    box.left = 0.5 * (minx + maxx) - 0.5 * box.width;
    box.top = 0.5 * (miny + maxy) - 0.5 * box.height;

    // Render: background, soft face ellipse, feature strokes, AU ridges, noise.
    GrayImage img(size, size, 0.25);
    const Point2 fc = to_pixels(0.0, 0.02);
    const double ax = 0.47 * face_px;
    const double ay = 0.58 * face_px;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = x - fc.x;
        const double dy = y - fc.y;
        const double rx = (std::cos(theta) * dx + std::sin(theta) * dy) / ax;
        const double ry = (-std::sin(theta) * dx + std::cos(theta) * dy) / ay;
        const double r = std::sqrt(rx * rx + ry * ry);
        const double inside = 1.0 / (1.0 + std::exp((r - 1.0) * 40.0));
        img.at(x, y) = 0.25 + 0.45 * inside;
      }
    }
    std::vector<Stroke> strokes;
    const double w = cfg.stroke_width * face_px;
    for (const auto& [a, b] : template_edges()) strokes.push_back({pts[a], pts[b], w, cfg.stroke_contrast});
    for (std::size_t i = 0; i < cfg.n_aus; ++i) {
      if (!labels.values[i]) continue;
      const Ridge& r = ridges[i];
      const auto lx = [&](std::size_t k) { return local[static_cast<Eigen::Index>(2 * k)]; };
      const auto ly = [&](std::size_t k) { return local[static_cast<Eigen::Index>(2 * k + 1)]; };
      strokes.push_back({to_pixels(lx(r.k1) + r.offset.x, ly(r.k1) + r.offset.y),
                         to_pixels(lx(r.k2) + r.offset.x, ly(r.k2) + r.offset.y), 1.5 * w,
                         cfg.appearance_contrast});
    }
    draw_strokes(img, strokes);
    for (double& v : img.pixels()) {
      v = std::clamp(v + cfg.pixel_noise * rng.normal(), 0.0, 1.0);
      v = std::round(v * 255.0) / 255.0;
    }

    Sample& s = out[idx];
    s.image = std::move(img);
    s.box = box;
    s.gt_shape = FaceShape(std::move(pts), Frame::ImagePixels);
    s.gt_labels = std::move(labels);
  }
  return out;
}

}  // namespace cjcrf::synth
