#include <cmath>
#include <filesystem>
#include <limits>
#include <string>

#include "doctest.h"
#include "oracles.hpp"

#include "cjcrf/io.hpp"
#include "cjcrf/model_file.hpp"
#include "cjcrf/synth.hpp"

using namespace cjcrf;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cjcrf_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

FaceShape random_canonical(Rng& r, std::size_t d) {
  return FaceShape::from_flat(oracle::random_vector(r, static_cast<Eigen::Index>(2 * d), 0.3),
                              Frame::Canonical);
}

// A structurally valid model with random parameters, including awkward reals.
CascadeModel random_model(std::uint64_t index) {
  Rng r = oracle::rng(index);
  const std::size_t d = 5;
  const std::size_t n = 3;
  CascadeModel m;
  m.descriptor.grid_cells = 2;
  m.descriptor.orientation_bins = 4;
  m.config.stages = 2;
  m.config.variant = Variant::ConstraintAU;
  m.config.seed = 0xFFFFFFFFFFFFFFFFull;
  m.config.ridge = 0.1;
  m.mean = random_canonical(r, d);
  const auto p = static_cast<Eigen::Index>(m.descriptor.stacked_dimension(d));
  for (int s = 0; s < m.config.stages; ++s) {
    m.stages.push_back({oracle::random_matrix(r, 2 * d, p), oracle::random_matrix(r, n, p)});
  }
  m.stages[0].R(0, 0) = 0.1;
  m.stages[0].R(0, 1) = -0.0;
  m.stages[0].R(1, 0) = 1e-300;
  m.stages[0].R(1, 1) = std::numeric_limits<double>::denorm_min();
  m.stages[0].T(0, 0) = std::numeric_limits<double>::max();
  m.stages[0].T(0, 1) = 1.0 / 3.0;
  m.prior.rbm = oracle::random_rbm(r, 2 * d, n, 4, 0.5);
  m.prior.standardization.mean = oracle::random_vector(r, 2 * d);
  m.prior.standardization.stddev = oracle::random_vector(r, 2 * d).cwiseAbs();
  for (std::size_t i = 0; i < n; ++i) {
    m.prior.au_shapes.push_back(random_canonical(r, d));
    m.prior.au_absent.push_back(i == 1);
  }
  m.prior.fallback_shape = random_canonical(r, d);
  m.prior.trained_with.hidden = 4;
  m.prior.trained_with.epochs = 7;
  m.prior.trained_with.seed = 99;
  m.eye_indices = {1, 3};
  m.validate();
  return m;
}

bool bit_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    const double y = b.data()[i];
    if (x != y || std::signbit(x) != std::signbit(y)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("format_real reads back to the same binary64 value") {
  CHECK(io::format_real(0.5) == "0.5");
  CHECK(io::format_real(0.1) == "0.1");
  CHECK(io::format_real(-2.0) == "-2");
  Rng r = oracle::rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double v = r.normal() * std::pow(10.0, r.uniform(-30.0, 30.0));
    CHECK(std::stod(io::format_real(v)) == v);
  }
}

TEST_CASE("shape text round trip and errors") {
  const FaceShape s({{1.5, -2.25}, {0.1, 1e-7}, {320.0, 240.0}}, Frame::ImagePixels);
  const std::string text = io::shape_to_text(s);
  CHECK(text.rfind("3\n", 0) == 0);
  CHECK(io::shape_from_text(text) == s);
  CHECK_THROWS_AS(io::shape_from_text("3\n1 2\n3 4\n"), io::FormatError);
  CHECK_THROWS_AS(io::shape_from_text("1\n1 abc\n"), io::FormatError);
  CHECK_THROWS_AS(io::shape_from_text(""), io::FormatError);
}

TEST_CASE("label and probability text round trip and errors") {
  const AULabelVector labels{{1, 0, 0, 1}};
  CHECK(io::labels_to_text(labels) == "1 0 0 1\n");
  CHECK(io::labels_from_text("1 0 0 1\n") == labels);
  CHECK_THROWS_AS(io::labels_from_text("1 2 0\n"), io::FormatError);

  AUProbVector probs;
  probs.values = Eigen::Vector3d(0.0, 0.25, 1.0);
  const AUProbVector back = io::probs_from_text(io::probs_to_text(probs));
  CHECK(back.values == probs.values);
  CHECK_THROWS_AS(io::probs_from_text("0.5 1.5\n"), io::FormatError);
  CHECK_THROWS_AS(io::probs_from_text("-0.1\n"), io::FormatError);
}

TEST_CASE("box text round trip and validation") {
  const FaceBox b{10.5, 20.0, 64.0, 70.0};
  CHECK(io::box_from_text(io::box_to_text(b)) == b);
  CHECK_THROWS_AS(io::box_from_text("1 2 3\n"), io::FormatError);
  CHECK_THROWS_AS(io::box_from_text("0 0 -4 4\n"), InvalidBox);
}

TEST_CASE("PGM round trip quantises to k/255") {
  const fs::path dir = scratch_dir("pgm");
  GrayImage img(7, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 7; ++x) img.at(x, y) = (x * 3 + y * 17) / 255.0;
  }
  img.at(0, 0) = 1.0;
  io::write_pgm(dir / "a.pgm", img);
  CHECK(io::read_pgm(dir / "a.pgm") == img);

  io::write_file(dir / "bad.pgm", "P2\n1 1\n255\n0\n");
  CHECK_THROWS_AS(io::read_pgm(dir / "bad.pgm"), io::FormatError);
  io::write_file(dir / "short.pgm", "P5\n4 4\n255\nab");
  CHECK_THROWS_AS(io::read_pgm(dir / "short.pgm"), io::FormatError);
  CHECK_THROWS(io::read_pgm(dir / "missing.pgm"));
}

TEST_CASE("dataset write and read back") {
  synth::SynthConfig cfg;
  cfg.n_samples = 6;
  cfg.n_aus = 4;
  cfg.au_pair_coupling = {{0, 1, 2.0}};
  cfg.image_size = 48;
  cfg.seed = 3;
  const auto samples = synth::generate(cfg);
  const fs::path dir = scratch_dir("dataset");
  io::write_dataset(dir, samples, synth::kEyeIndices, cfg.echo());

  const std::string manifest = io::read_file(dir / "manifest.txt");
  CHECK(manifest.find("0005 0005.pgm 0005.pts 0005.au 0005.box") != std::string::npos);

  const io::Dataset ds = io::read_dataset(dir);
  REQUIRE(ds.entries.size() == samples.size());
  CHECK(ds.n_aus == 4);
  CHECK(ds.d_landmarks == synth::kTemplateLandmarks);
  CHECK(ds.eye_indices == synth::kEyeIndices);
  CHECK(ds.config_echo == cfg.echo());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(ds.entries[i].sample.image == samples[i].image);
    CHECK(ds.entries[i].sample.gt_shape == samples[i].gt_shape);
    CHECK(ds.entries[i].sample.gt_labels == samples[i].gt_labels);
    CHECK(ds.entries[i].sample.box == samples[i].box);
  }

  fs::remove(dir / "0002.au");
  CHECK_THROWS(io::read_dataset(dir));
}

TEST_CASE("model file round trip is bit-exact") {
  for (std::uint64_t k = 0; k < 3; ++k) {
    const CascadeModel m = random_model(10 + k);
    const std::string text = save_model_json(m);
    const CascadeModel back = load_model_json(text);

    CHECK(back.config.stages == m.config.stages);
    CHECK(back.config.variant == m.config.variant);
    CHECK(back.config.seed == m.config.seed);
    CHECK(back.config.ridge == m.config.ridge);
    CHECK(back.descriptor.grid_cells == 2);
    CHECK(back.prior.trained_with.epochs == 7);
    CHECK(back.prior.trained_with.seed == 99);
    CHECK(back.eye_indices == m.eye_indices);
    CHECK(back.mean == m.mean);
    CHECK(back.prior.fallback_shape == m.prior.fallback_shape);
    CHECK(back.prior.au_shapes == m.prior.au_shapes);
    CHECK(back.prior.au_absent == m.prior.au_absent);
    CHECK(bit_equal(back.prior.rbm.Wx, m.prior.rbm.Wx));
    CHECK(bit_equal(back.prior.rbm.Wa, m.prior.rbm.Wa));
    CHECK(bit_equal(back.prior.rbm.c, m.prior.rbm.c));
    CHECK(bit_equal(back.prior.standardization.stddev, m.prior.standardization.stddev));
    REQUIRE(back.stages.size() == m.stages.size());
    for (std::size_t s = 0; s < m.stages.size(); ++s) {
      CHECK(bit_equal(back.stages[s].R, m.stages[s].R));
      CHECK(bit_equal(back.stages[s].T, m.stages[s].T));
    }
    CHECK(save_model_json(back) == text);
  }
}

TEST_CASE("model file errors") {
  const std::string text = save_model_json(random_model(20));
  CHECK_THROWS_AS(load_model_json("{not json"), io::FormatError);
  CHECK_THROWS_AS(load_model_json("{}"), io::FormatError);

  std::string wrong_version = text;
  const auto pos = wrong_version.find("\"format_version\":1");
  REQUIRE(pos != std::string::npos);
  wrong_version.replace(pos, 18, "\"format_version\":9");
  CHECK_THROWS_AS(load_model_json(wrong_version), io::FormatError);

  CascadeModel bad = random_model(21);
  bad.stages.pop_back();
  CHECK_THROWS_AS(load_model_json(save_model_json(bad)), DimensionMismatch);
}
