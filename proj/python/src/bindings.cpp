#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cjcrf/commands.hpp"
#include "cjcrf/io.hpp"
#include "cjcrf/model_file.hpp"

namespace py = pybind11;
using namespace cjcrf;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using Pixels = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Points to_points(const FaceShape& s) {
  Points m(static_cast<Eigen::Index>(s.size()), 2);
  for (std::size_t i = 0; i < s.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = s[i].x;
    m(static_cast<Eigen::Index>(i), 1) = s[i].y;
  }
  return m;
}

FaceShape from_points(const Points& m) {
  std::vector<Point2> pts;
  for (Eigen::Index i = 0; i < m.rows(); ++i) pts.push_back({m(i, 0), m(i, 1)});
  return FaceShape(std::move(pts), Frame::ImagePixels);
}

GrayImage from_pixels(const Pixels& px) {
  std::vector<double> data(px.data(), px.data() + px.size());
  return GrayImage(static_cast<int>(px.cols()), static_cast<int>(px.rows()), std::move(data));
}

Pixels to_pixels(const GrayImage& img) {
  Pixels px(img.height(), img.width());
  std::copy(img.pixels().begin(), img.pixels().end(), px.data());
  return px;
}

FaceBox to_box(const std::array<double, 4>& b) {
  FaceBox box{b[0], b[1], b[2], b[3]};
  box.validate();
  return box;
}

py::dict report_dict(const cli::EvalResult& r) {
  py::dict d;
  d["samples"] = r.report.samples;
  d["mean_normalized_error"] = r.report.mean_normalized_error;
  d["per_au_f1"] = r.report.per_au_f1;
  d["weighted_f1"] = r.report.weighted_f1;
  d["per_au_auc"] = r.report.per_au_auc;
  d["weighted_auc"] = r.report.weighted_auc;
  d["per_stage_error"] = r.report.per_stage_error;
  if (!r.variant.empty()) d["variant"] = r.variant;
  if (r.baseline_error) d["baseline_error"] = *r.baseline_error;
  return d;
}

std::vector<AUProbVector> to_probs(const std::vector<Eigen::VectorXd>& rows) {
  std::vector<AUProbVector> out;
  for (const auto& r : rows) out.push_back(AUProbVector{r});
  return out;
}

std::vector<AULabelVector> to_labels(const std::vector<std::vector<int>>& rows) {
  std::vector<AULabelVector> out;
  for (const auto& r : rows) {
    AULabelVector l{r};
    validate_labels(l);
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cascaded joint landmark detection and AU recognition";

  py::register_exception<io::FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);

  m.def(
      "generate",
      [](std::size_t n, std::size_t aus, std::uint64_t seed, int image_size) {
        synth::SynthConfig cfg;
        cfg.n_samples = n;
        cfg.n_aus = aus;
        cfg.seed = seed;
        cfg.image_size = image_size;
        std::erase_if(cfg.au_pair_coupling, [&](const synth::AUCoupling& c) { return c.i >= aus || c.j >= aus; });
        std::vector<Sample> samples;
        {
          py::gil_scoped_release release;
          samples = synth::generate(cfg);
        }
        py::list out;
        for (const auto& s : samples) {
          py::dict d;
          d["image"] = to_pixels(s.image);
          d["shape"] = to_points(s.gt_shape);
          d["labels"] = s.gt_labels.values;
          d["box"] = std::array<double, 4>{s.box.left, s.box.top, s.box.width, s.box.height};
          out.append(d);
        }
        return out;
      },
      py::arg("n"), py::arg("aus") = 8, py::arg("seed") = 0, py::arg("image_size") = 128,
      "Synthetic samples as dicts with image, shape (D x 2), labels and box.");

  m.def(
      "synth",
      [](const std::filesystem::path& out, std::size_t n, std::size_t aus, std::uint64_t seed, int image_size) {
        synth::SynthConfig cfg;
        cfg.n_samples = n;
        cfg.n_aus = aus;
        cfg.seed = seed;
        cfg.image_size = image_size;
        std::erase_if(cfg.au_pair_coupling, [&](const synth::AUCoupling& c) { return c.i >= aus || c.j >= aus; });
        py::gil_scoped_release release;
        cli::synth_dataset(out, cfg);
      },
      py::arg("out"), py::arg("n"), py::arg("aus") = 8, py::arg("seed") = 0, py::arg("image_size") = 128);

  py::class_<CascadeModel>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return load_model(p); })
      .def("save", [](const CascadeModel& model, const std::filesystem::path& p) { save_model(p, model); })
      .def_property_readonly("variant", [](const CascadeModel& model) {
        return std::string(variant_name(model.config.variant));
      })
      .def_property_readonly("stages", [](const CascadeModel& model) { return model.config.stages; })
      .def_property_readonly("n_aus", &CascadeModel::n_aus)
      .def_property_readonly("landmarks", &CascadeModel::landmarks)
      .def(
          "detect",
          [](const CascadeModel& model, const Pixels& image, const std::array<double, 4>& box, double threshold) {
            const GrayImage img = from_pixels(image);
            const FaceBox b = to_box(box);
            Detection det;
            {
              py::gil_scoped_release release;
              det = infer(img, b, model, threshold);
            }
            return py::make_tuple(to_points(det.shape), det.probs.values, det.labels.values);
          },
          py::arg("image"), py::arg("box"), py::arg("threshold") = 0.5,
          "Returns (shape D x 2, AU probabilities, AU labels).");

  m.def(
      "train",
      [](const std::filesystem::path& data, const std::filesystem::path& out, const std::string& variant,
         int stages, double lambda_shape, double lambda_prob, std::size_t hidden, int epochs, int augmentations,
         std::uint64_t seed) {
        cli::TrainOptions opts;
        opts.data = data;
        opts.out = out;
        opts.cascade.variant = parse_variant(variant);
        opts.cascade.stages = stages;
        opts.cascade.lambda_shape = lambda_shape;
        opts.cascade.lambda_prob = lambda_prob;
        opts.cascade.augmentations = augmentations;
        opts.cascade.seed = seed;
        opts.cd.hidden = hidden;
        opts.cd.epochs = epochs;
        opts.cd.seed = seed;
        CascadeModel model;
        {
          py::gil_scoped_release release;
          model = cli::train_model(opts);
          save_model(out, model);
        }
        return model;
      },
      py::arg("data"), py::arg("out"), py::arg("variant") = "full", py::arg("stages") = 4,
      py::arg("lambda_shape") = 0.5, py::arg("lambda_prob") = 0.5, py::arg("hidden") = 150,
      py::arg("epochs") = 800, py::arg("augmentations") = 10, py::arg("seed") = 0);

  m.def(
      "evaluate_model",
      [](const CascadeModel& model, const std::filesystem::path& truth, double threshold) {
        cli::EvalResult r;
        {
          py::gil_scoped_release release;
          r = cli::evaluate_model(model, truth, threshold);
        }
        return report_dict(r);
      },
      py::arg("model"), py::arg("truth"), py::arg("threshold") = 0.5);

  m.def(
      "evaluate_predictions",
      [](const std::filesystem::path& pred, const std::filesystem::path& truth, double threshold) {
        return report_dict(cli::evaluate_predictions(pred, truth, threshold));
      },
      py::arg("pred"), py::arg("truth"), py::arg("threshold") = 0.5);

  m.def(
      "normalized_error",
      [](const Points& pred, const Points& gt, std::pair<std::size_t, std::size_t> eyes) {
        return normalized_error(from_points(pred), from_points(gt), eyes);
      },
      py::arg("pred"), py::arg("gt"), py::arg("eyes"));

  m.def(
      "f1_scores",
      [](const std::vector<Eigen::VectorXd>& probs, const std::vector<std::vector<int>>& labels, double threshold) {
        const F1Scores s = f1_scores(to_probs(probs), to_labels(labels), threshold);
        return py::make_tuple(s.per_au, s.weighted);
      },
      py::arg("probs"), py::arg("labels"), py::arg("threshold") = 0.5);

  m.def(
      "auc_scores",
      [](const std::vector<Eigen::VectorXd>& probs, const std::vector<std::vector<int>>& labels) {
        const AUCScores s = auc_scores(to_probs(probs), to_labels(labels));
        return py::make_tuple(s.per_au, s.weighted);
      },
      py::arg("probs"), py::arg("labels"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> owned{"cjcrf"};
        owned.insert(owned.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : owned) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
