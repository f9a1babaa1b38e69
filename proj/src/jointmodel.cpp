#include "cjcrf/jointmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cjcrf/random.hpp"

namespace cjcrf {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

Eigen::MatrixXd sample_bernoulli(const Eigen::MatrixXd& probs, Rng& rng) {
  Eigen::MatrixXd out(probs.rows(), probs.cols());
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      out(i, j) = rng.bernoulli(probs(i, j)) ? 1.0 : 0.0;
    }
  }
  return out;
}

void check_visible(const Eigen::VectorXd& a, const Eigen::VectorXd& x, const RBMParams& theta) {
  if (static_cast<std::size_t>(a.size()) != theta.n_aus() ||
      static_cast<std::size_t>(x.size()) != theta.shape_dim()) {
    throw DimensionMismatch("RBM: visible vector dimensions do not match parameters");
  }
}

// Log of the unnormalised label weight exp(ba'a) prod_k (1 + exp(pre_k + a'Wa_k)).
// Unnormalised log-weights of all 2^N label vectors with h summed out:
// b_a.a + sum_k softplus(pre_k + (W_a^T a)_k), one column per bit mask.
Eigen::VectorXd log_label_weights(const Eigen::VectorXd& pre, const RBMParams& theta) {
  const auto n = static_cast<Eigen::Index>(theta.n_aus());
  const Eigen::Index count = Eigen::Index{1} << n;
  Eigen::MatrixXd bits(n, count);
  for (Eigen::Index mask = 0; mask < count; ++mask) {
    for (Eigen::Index i = 0; i < n; ++i) bits(i, mask) = (mask >> i) & 1 ? 1.0 : 0.0;
  }
  Eigen::ArrayXXd act = (theta.Wa.transpose() * bits).colwise() + pre;
  act = act.max(0.0) + ((-act.abs()).exp() + 1.0).log();
  return (bits.transpose() * theta.ba).array() + act.colwise().sum().transpose();
}

}  // namespace

RBMParams RBMParams::zeros(std::size_t shape_dim, std::size_t n_aus, std::size_t hidden) {
  const auto d = static_cast<Eigen::Index>(shape_dim);
  const auto n = static_cast<Eigen::Index>(n_aus);
  const auto k = static_cast<Eigen::Index>(hidden);
  return {Eigen::MatrixXd::Zero(d, k), Eigen::MatrixXd::Zero(n, k), Eigen::VectorXd::Zero(d),
          Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(k)};
}

void RBMParams::validate() const {
  const auto k = c.size();
  if (Wx.cols() != k || Wa.cols() != k || bx.size() != Wx.rows() || ba.size() != Wa.rows()) {
    throw DimensionMismatch("RBMParams: inconsistent parameter shapes");
  }
  if (!Wx.allFinite() || !Wa.allFinite() || !bx.allFinite() || !ba.allFinite() || !c.allFinite()) {
    throw std::invalid_argument("RBMParams: non-finite parameter");
  }
}

void CDConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("CDConfig: epochs must be >= 1");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("CDConfig: learning_rate must be >= 0");
  if (cd_steps < 1) throw std::invalid_argument("CDConfig: cd_steps must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("CDConfig: batch_size must be >= 1");
  if (hidden < 1) throw std::invalid_argument("CDConfig: hidden must be >= 1");
}

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double energy(const Eigen::VectorXd& a, const Eigen::VectorXd& x, const Eigen::VectorXd& h,
              const RBMParams& theta) {
  check_visible(a, x, theta);
  if (static_cast<std::size_t>(h.size()) != theta.hidden()) {
    throw DimensionMismatch("energy: hidden vector dimension does not match parameters");
  }
  return 0.5 * (x - theta.bx).squaredNorm() - theta.ba.dot(a) - theta.c.dot(h) -
         x.dot(theta.Wx * h) - a.dot(theta.Wa * h);
}

double free_energy(const Eigen::VectorXd& a, const Eigen::VectorXd& x, const RBMParams& theta) {
  check_visible(a, x, theta);
  const Eigen::VectorXd act = theta.c + theta.Wx.transpose() * x + theta.Wa.transpose() * a;
  double sp = 0.0;
  for (Eigen::Index k = 0; k < act.size(); ++k) sp += softplus(act[k]);
  return 0.5 * (x - theta.bx).squaredNorm() - theta.ba.dot(a) - sp;
}

RBMParams cd_train(std::span<const JointExample> data, const CDConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("cd_train: empty training set");
  const auto dim = data.front().x.size();
  const auto n_aus = data.front().a.size();
  const auto m = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd xs(dim, m);
  Eigen::MatrixXd as(n_aus, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& ex = data[static_cast<std::size_t>(j)];
    if (ex.x.size() != dim || ex.a.size() != n_aus) {
      throw DimensionMismatch("cd_train: inconsistent example dimensions");
    }
    xs.col(j) = ex.x;
    as.col(j) = ex.a;
  }

  RBMParams theta = RBMParams::zeros(static_cast<std::size_t>(dim), static_cast<std::size_t>(n_aus),
                                     cfg.hidden);
  {
    Rng init = Rng::stream(cfg.seed, StreamDomain::CdInit);
    for (Eigen::Index k = 0; k < theta.Wx.cols(); ++k) {
      for (Eigen::Index i = 0; i < dim; ++i) theta.Wx(i, k) = init.uniform(-0.01, 0.01);
      for (Eigen::Index i = 0; i < n_aus; ++i) theta.Wa(i, k) = init.uniform(-0.01, 0.01);
    }
  }
  if (cfg.learning_rate == 0.0) return theta;

  Eigen::MatrixXd vWx = Eigen::MatrixXd::Zero(theta.Wx.rows(), theta.Wx.cols());
  Eigen::MatrixXd vWa = Eigen::MatrixXd::Zero(theta.Wa.rows(), theta.Wa.cols());
  Eigen::VectorXd vbx = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd vba = Eigen::VectorXd::Zero(n_aus);
  Eigen::VectorXd vc = Eigen::VectorXd::Zero(theta.c.size());

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = Rng::stream(cfg.seed, StreamDomain::CdEpoch, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    rng.shuffle(order);

    for (Eigen::Index start = 0; start < m; start += batch) {
      const Eigen::Index b = std::min(batch, m - start);
      Eigen::MatrixXd xb(dim, b);
      Eigen::MatrixXd ab(n_aus, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        xb.col(j) = xs.col(order[static_cast<std::size_t>(start + j)]);
        ab.col(j) = as.col(order[static_cast<std::size_t>(start + j)]);
      }

      Eigen::MatrixXd h_pos = sigmoid(
          ((theta.Wx.transpose() * xb + theta.Wa.transpose() * ab).colwise() + theta.c).eval());
      Eigen::MatrixXd h_state = sample_bernoulli(h_pos, rng);
      Eigen::MatrixXd x_neg;
      Eigen::MatrixXd a_neg;
      Eigen::MatrixXd h_neg;
      for (int step = 0; step < cfg.cd_steps; ++step) {
        x_neg = (theta.Wx * h_state).colwise() + theta.bx;
        a_neg = sample_bernoulli(sigmoid(((theta.Wa * h_state).colwise() + theta.ba).eval()), rng);
        h_neg = sigmoid(
            ((theta.Wx.transpose() * x_neg + theta.Wa.transpose() * a_neg).colwise() + theta.c)
                .eval());
        if (step + 1 < cfg.cd_steps) h_state = sample_bernoulli(h_neg, rng);
      }

      const double inv_b = 1.0 / static_cast<double>(b);
      const Eigen::MatrixXd gWx = (xb * h_pos.transpose() - x_neg * h_neg.transpose()) * inv_b;
      const Eigen::MatrixXd gWa = (ab * h_pos.transpose() - a_neg * h_neg.transpose()) * inv_b;
      const Eigen::VectorXd gbx = (xb - x_neg).rowwise().sum() * inv_b;
      const Eigen::VectorXd gba = (ab - a_neg).rowwise().sum() * inv_b;
      const Eigen::VectorXd gc = (h_pos - h_neg).rowwise().sum() * inv_b;

      vWx = cfg.momentum * vWx + cfg.learning_rate * (gWx - cfg.weight_decay * theta.Wx);
      vWa = cfg.momentum * vWa + cfg.learning_rate * (gWa - cfg.weight_decay * theta.Wa);
      vbx = cfg.momentum * vbx + cfg.learning_rate * gbx;
      vba = cfg.momentum * vba + cfg.learning_rate * gba;
      vc = cfg.momentum * vc + cfg.learning_rate * gc;
      theta.Wx += vWx;
      theta.Wa += vWa;
      theta.bx += vbx;
      theta.ba += vba;
      theta.c += vc;
    }
  }
  return theta;
}

Eigen::VectorXd label_distribution(const Eigen::VectorXd& x, const RBMParams& theta) {
  const std::size_t n = theta.n_aus();
  if (n > kExactPosteriorMaxAUs) {
    throw std::invalid_argument("label_distribution: too many AUs for exact enumeration");
  }
  if (static_cast<std::size_t>(x.size()) != theta.shape_dim()) {
    throw DimensionMismatch("label_distribution: shape dimension does not match parameters");
  }
  const Eigen::VectorXd pre = theta.c + theta.Wx.transpose() * x;
  const Eigen::VectorXd logw = log_label_weights(pre, theta);
  const double top = logw.maxCoeff();
  Eigen::VectorXd w = (logw.array() - top).exp();
  return w / w.sum();
}

AUPosterior au_posterior(const Eigen::VectorXd& x, const RBMParams& theta,
                         std::size_t exact_threshold) {
  const std::size_t n = theta.n_aus();
  if (static_cast<std::size_t>(x.size()) != theta.shape_dim()) {
    throw DimensionMismatch("au_posterior: shape dimension does not match parameters");
  }
  AUPosterior out;
  out.probs.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

  if (n <= std::min(exact_threshold, kExactPosteriorMaxAUs)) {
    const Eigen::VectorXd dist = label_distribution(x, theta);
    for (Eigen::Index mask = 0; mask < dist.size(); ++mask) {
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (Eigen::Index{1} << i)) out.probs.values[static_cast<Eigen::Index>(i)] += dist[mask];
      }
    }
    return out;
  }

  // Damped mean-field fixed point.
  out.exact = false;
  out.converged = false;
  const Eigen::VectorXd pre = theta.c + theta.Wx.transpose() * x;
  Eigen::VectorXd mu_a = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 0.5);
  Eigen::VectorXd mu_h = sigmoid((pre + theta.Wa.transpose() * mu_a).eval());
  constexpr double damping = 0.5;
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd h_new =
        (1.0 - damping) * sigmoid((pre + theta.Wa.transpose() * mu_a).eval()) + damping * mu_h;
    const Eigen::VectorXd a_new =
        (1.0 - damping) * sigmoid((theta.ba + theta.Wa * h_new).eval()) + damping * mu_a;
    const double change = std::max((h_new - mu_h).cwiseAbs().maxCoeff(),
                                   (a_new - mu_a).cwiseAbs().maxCoeff());
    mu_h = h_new;
    mu_a = a_new;
    if (change < 1e-8) {
      out.converged = true;
      break;
    }
  }
  out.probs.values = mu_a;
  return out;
}

Standardization Standardization::fit(std::span<const Eigen::VectorXd> xs) {
  if (xs.empty()) throw std::invalid_argument("Standardization::fit: no data");
  const auto dim = xs.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& x : xs) var += (x - mean).cwiseAbs2();
  var /= static_cast<double>(xs.size());
  Eigen::VectorXd sd = var.cwiseSqrt();
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!(sd[i] > 1e-12)) sd[i] = 1.0;
  }
  return {std::move(mean), std::move(sd)};
}

Standardization Standardization::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
}

Eigen::VectorXd Standardization::apply(const Eigen::VectorXd& x) const {
  return (x - mean).cwiseQuotient(stddev);
}

Eigen::VectorXd Standardization::invert(const Eigen::VectorXd& z) const {
  return z.cwiseProduct(stddev) + mean;
}

AUShapes au_dependent_shapes(std::span<const AULabelVector> labels,
                             std::span<const FaceShape> shapes, const FaceShape& mean) {
  if (labels.empty() || labels.size() != shapes.size()) {
    throw std::invalid_argument("au_dependent_shapes: need equally many labels and shapes");
  }
  const std::size_t n = labels.front().size();
  AUShapes out;
  out.shapes.reserve(n);
  out.absent.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<FaceShape> active;
    for (std::size_t m = 0; m < labels.size(); ++m) {
      if (labels[m].size() != n) throw DimensionMismatch("au_dependent_shapes: label length varies");
      if (labels[m].values[i] == 1) active.push_back(shapes[m]);
    }
    if (active.empty()) {
      out.shapes.push_back(mean);
      out.absent[i] = true;
    } else {
      out.shapes.push_back(mean_shape(active));
    }
  }
  return out;
}

AUPosterior JointPrior::posterior(const FaceShape& shape) const {
  return au_posterior(standardization.apply(shape.flat()), rbm);
}

FaceShape shape_prior(const AUProbVector& p, const JointPrior& prior) {
  if (p.size() != prior.n_aus()) throw DimensionMismatch("shape_prior: probability length != N");
  const double total = p.values.sum();
  if (total < 1e-9) return prior.fallback_shape;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * prior.fallback_shape.size()));
  for (std::size_t i = 0; i < prior.n_aus(); ++i) {
    acc += prior.au_shapes[i].flat() * (p.values[static_cast<Eigen::Index>(i)] / total);
  }
  return FaceShape::from_flat(acc, Frame::Canonical);
}

JointPrior train_joint_prior(std::span<const AULabelVector> labels,
                             std::span<const FaceShape> canonical_shapes, const CDConfig& cfg) {
  if (labels.empty() || labels.size() != canonical_shapes.size()) {
    throw std::invalid_argument("train_joint_prior: need equally many labels and shapes");
  }
  std::vector<Eigen::VectorXd> flats;
  flats.reserve(canonical_shapes.size());
  for (const auto& s : canonical_shapes) {
    if (s.frame() != Frame::Canonical) {
      throw std::invalid_argument("train_joint_prior: shapes must be canonical");
    }
    flats.push_back(s.flat());
  }
  JointPrior prior;
  prior.standardization = Standardization::fit(flats);
  std::vector<JointExample> examples;
  examples.reserve(flats.size());
  for (std::size_t m = 0; m < flats.size(); ++m) {
    validate_labels(labels[m]);
    examples.push_back({labels[m].as_vector(), prior.standardization.apply(flats[m])});
  }
  prior.rbm = cd_train(examples, cfg);
  prior.trained_with = cfg;
  prior.fallback_shape = mean_shape(canonical_shapes);
  AUShapes au = au_dependent_shapes(labels, canonical_shapes, prior.fallback_shape);
  prior.au_shapes = std::move(au.shapes);
  prior.au_absent = std::move(au.absent);
  return prior;
}

}  // namespace cjcrf
