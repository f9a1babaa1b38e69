#include "cjcrf/commands.hpp"

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cjcrf/io.hpp"
#include "cjcrf/model_file.hpp"

namespace cjcrf::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string trace_text(const std::vector<FaceShape>& shapes, const std::vector<AUProbVector>& probs) {
  std::string s;
  for (std::size_t t = 0; t < shapes.size(); ++t) {
    s += "stage " + std::to_string(t) + "\n";
    s += io::shape_to_text(shapes[t]);
    s += "p " + io::probs_to_text(probs[t]);
  }
  return s;
}

std::string percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

json optional_vector(const std::vector<std::optional<double>>& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(x ? json(*x) : json(nullptr));
  return out;
}

}  // namespace

std::vector<synth::AUCoupling> parse_coupling(const std::string& text) {
  std::vector<synth::AUCoupling> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    synth::AUCoupling c;
    char sep1 = 0, sep2 = 0;
    std::istringstream is(item);
    if (!(is >> c.i >> sep1 >> c.j >> sep2 >> c.strength) || sep1 != ':' || sep2 != ':' || !is.eof()) {
      throw UsageError("--coupling: expected i:j:strength, got '" + item + "'");
    }
    out.push_back(c);
  }
  return out;
}

void synth_dataset(const fs::path& out_dir, const synth::SynthConfig& cfg) {
  const std::vector<Sample> samples = synth::generate(cfg);
  io::write_dataset(out_dir, samples, synth::kEyeIndices, cfg.echo());
}

CascadeModel train_model(const TrainOptions& opts) {
  const io::Dataset ds = io::read_dataset(opts.data);
  if (ds.entries.empty()) throw std::runtime_error("train: dataset is empty");
  if (opts.expect_aus && *opts.expect_aus != ds.n_aus) {
    throw DimensionMismatch("train: dataset has " + std::to_string(ds.n_aus) + " AUs, expected " +
                            std::to_string(*opts.expect_aus));
  }
  if (opts.expect_landmarks && *opts.expect_landmarks != ds.d_landmarks) {
    throw DimensionMismatch("train: dataset has " + std::to_string(ds.d_landmarks) +
                            " landmarks, expected " + std::to_string(*opts.expect_landmarks));
  }
  const std::vector<Sample> samples = ds.samples();
  std::vector<AULabelVector> labels;
  std::vector<FaceShape> canonical;
  for (const auto& s : samples) {
    labels.push_back(s.gt_labels);
    canonical.push_back(to_canonical(s.gt_shape, s.box));
  }
  const JointPrior prior = train_joint_prior(labels, canonical, opts.cd);
  return train(samples, opts.cascade, opts.descriptor, prior, ds.eye_indices);
}

void detect_one(const CascadeModel& model, const GrayImage& image, const FaceBox& box,
                const fs::path& prefix, double threshold, bool trace) {
  std::vector<FaceShape> shapes;
  std::vector<AUProbVector> probs;
  CascadeObserver obs;
  obs.on_stage = [&](int, const FaceShape& canonical, const AUProbVector& p) {
    shapes.push_back(from_canonical(canonical, box));
    probs.push_back(p);
  };
  const Detection det = infer(image, box, model, threshold, trace ? &obs : nullptr);
  io::write_file(fs::path(prefix.string() + ".pts"), io::shape_to_text(det.shape));
  io::write_file(fs::path(prefix.string() + ".auprob"), io::probs_to_text(det.probs));
  io::write_file(fs::path(prefix.string() + ".au"), io::labels_to_text(det.labels));
  if (trace) io::write_file(fs::path(prefix.string() + ".trace"), trace_text(shapes, probs));
}

void detect_dataset(const CascadeModel& model, const fs::path& data, const fs::path& out_dir,
                    double threshold, bool trace) {
  const io::Dataset ds = io::read_dataset(data);
  if (ds.n_aus != model.n_aus() || ds.d_landmarks != model.landmarks()) {
    throw DimensionMismatch("detect: dataset schema (" + std::to_string(ds.d_landmarks) + " landmarks, " +
                            std::to_string(ds.n_aus) + " AUs) does not match the model");
  }
  fs::create_directories(out_dir);
  for (const auto& e : ds.entries) {
    detect_one(model, e.sample.image, e.sample.box, out_dir / e.stem, threshold, trace);
  }
  const json meta = {{"variant", std::string(variant_name(model.config.variant))},
                     {"stages", model.config.stages},
                     {"threshold", threshold}};
  io::write_file(out_dir / "meta.json", meta.dump(2) + "\n");
}

EvalResult evaluate_predictions(const fs::path& pred_dir, const fs::path& truth_dir, double threshold) {
  const io::Dataset ds = io::read_dataset(truth_dir);
  std::vector<FaceShape> pred_shapes, gt_shapes;
  std::vector<AUProbVector> pred_probs;
  std::vector<AULabelVector> gt_labels;
  for (const auto& e : ds.entries) {
    const fs::path pts = pred_dir / (e.stem + ".pts");
    const fs::path prob = pred_dir / (e.stem + ".auprob");
    if (!fs::exists(pts) || !fs::exists(prob)) {
      throw std::runtime_error("eval: missing prediction files for sample " + e.stem);
    }
    pred_shapes.push_back(io::shape_from_text(io::read_file(pts)));
    pred_probs.push_back(io::probs_from_text(io::read_file(prob)));
    gt_shapes.push_back(e.sample.gt_shape);
    gt_labels.push_back(e.sample.gt_labels);
  }
  EvalResult out;
  out.report = evaluate(pred_shapes, gt_shapes, pred_probs, gt_labels, ds.eye_indices, threshold);
  const fs::path meta = pred_dir / "meta.json";
  if (fs::exists(meta)) {
    const json j = json::parse(io::read_file(meta), nullptr, false);
    if (j.is_object() && j.contains("variant")) out.variant = j["variant"].get<std::string>();
  }
  return out;
}

EvalResult evaluate_model(const CascadeModel& model, const fs::path& truth_dir, double threshold) {
  const io::Dataset ds = io::read_dataset(truth_dir);
  if (ds.n_aus != model.n_aus() || ds.d_landmarks != model.landmarks()) {
    throw DimensionMismatch("eval: dataset schema does not match the model");
  }
  const std::size_t n = ds.entries.size();
  const std::size_t stages = model.stages.size();
  std::vector<FaceShape> pred_shapes(n), gt_shapes(n);
  std::vector<AUProbVector> pred_probs(n);
  std::vector<AULabelVector> gt_labels(n);
  std::vector<std::vector<double>> stage_err(n, std::vector<double>(stages + 1, 0.0));

#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = ds.entries[i].sample;
    CascadeObserver obs;
    obs.on_stage = [&](int t, const FaceShape& canonical, const AUProbVector&) {
      stage_err[i][static_cast<std::size_t>(t)] =
          normalized_error(from_canonical(canonical, s.box), s.gt_shape, ds.eye_indices);
    };
    const Detection det = infer(s.image, s.box, model, threshold, &obs);
    pred_shapes[i] = det.shape;
    pred_probs[i] = det.probs;
    gt_shapes[i] = s.gt_shape;
    gt_labels[i] = s.gt_labels;
  }
  EvalResult out;
  out.report = evaluate(pred_shapes, gt_shapes, pred_probs, gt_labels, ds.eye_indices, threshold);
  out.report.per_stage_error.assign(stages + 1, 0.0);
  for (const auto& row : stage_err) {
    for (std::size_t t = 0; t <= stages; ++t) out.report.per_stage_error[t] += row[t] / static_cast<double>(n);
  }
  out.baseline_error = out.report.per_stage_error.front();
  out.variant = std::string(variant_name(model.config.variant));
  return out;
}

std::string report_to_json(const EvalResult& result) {
  const EvalReport& r = result.report;
  json j = {
      {"samples", r.samples},
      {"mean_normalized_error", r.mean_normalized_error},
      {"per_au_f1", r.per_au_f1},
      {"weighted_f1", r.weighted_f1},
      {"per_au_auc", optional_vector(r.per_au_auc)},
      {"weighted_auc", r.weighted_auc},
      {"per_stage_error", r.per_stage_error},
      {"conventions", "F1 is 0 when precision+recall is 0; AUC ties count 1/2; AUs without "
                      "positives (F1) or without both classes (AUC) are excluded from weighting; "
                      "weights are positive-instance counts"},
  };
  if (!result.variant.empty()) j["variant"] = result.variant;
  if (result.baseline_error) j["baseline_error"] = *result.baseline_error;
  return j.dump(2) + "\n";
}

std::string report_summary(const EvalResult& result) {
  std::ostringstream os;
  if (!result.variant.empty()) os << "variant: " << result.variant << "\n";
  os << "samples: " << result.report.samples << "\n";
  os << "mean normalized error: " << std::fixed << std::setprecision(6)
     << result.report.mean_normalized_error << "\n";
  if (result.baseline_error) os << "mean-shape baseline error: " << *result.baseline_error << "\n";
  os << "weighted F1 (%): " << percent(result.report.weighted_f1) << "\n";
  os << "weighted AUC (%): " << percent(result.report.weighted_auc) << "\n";
  return os.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint facial landmark detection and action unit recognition", "cjcrf"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  fs::path synth_out;
  synth::SynthConfig scfg;
  std::string coupling;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--n", scfg.n_samples, "Number of samples")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--aus", scfg.n_aus, "Number of AUs")->check(CLI::Range(1, 20));
  synth_cmd->add_option("--seed", scfg.seed, "Random seed");
  synth_cmd->add_option("--coupling", coupling, "Pairwise AU couplings i:j:s,...");
  synth_cmd->add_option("--image-size", scfg.image_size, "Image side in pixels")->check(CLI::Range(32, 4096));

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the joint prior and the cascade");
  TrainOptions topts;
  std::string variant = "full";
  std::size_t hidden = topts.cd.hidden;
  std::uint64_t seed = 0;
  std::size_t expect_aus = 0;
  train_cmd->add_option("--data", topts.data, "Dataset directory")->required();
  train_cmd->add_option("--out", topts.out, "Model file to write")->required();
  train_cmd->add_option("--stages", topts.cascade.stages, "Cascade stages")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lambda-shape", topts.cascade.lambda_shape, "Shape constraint weight")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lambda-prob", topts.cascade.lambda_prob, "AU constraint weight")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--hidden", hidden, "RBM hidden units")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", topts.cd.epochs, "CD epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--variant", variant, "full|noconstraint|constraint-landmark|constraint-au")
      ->check(CLI::IsMember({"full", "noconstraint", "constraint-landmark", "constraint-au"}));
  train_cmd->add_option("--ridge", topts.cascade.ridge, "Ridge weight relative to the mean feature energy")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--augmentations", topts.cascade.augmentations, "Perturbed starts per sample")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--aus", expect_aus, "Expected AU count (checked against the dataset)");
  train_cmd->add_option("--seed", seed, "Random seed");

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "Run the cascade on images");
  fs::path model_path, image_path, box_path, detect_out, detect_data;
  double threshold = 0.5;
  bool trace = false;
  detect_cmd->add_option("--model", model_path, "Model file")->required();
  auto* img_opt = detect_cmd->add_option("--image", image_path, "PGM image");
  auto* box_opt = detect_cmd->add_option("--box", box_path, "Face box file");
  auto* data_opt = detect_cmd->add_option("--data", detect_data, "Dataset directory (batch mode)");
  detect_cmd->add_option("--out", detect_out, "Output prefix (single) or directory (batch)")->required();
  detect_cmd->add_option("--threshold", threshold, "AU decision threshold")->check(CLI::Range(0.0, 1.0));
  detect_cmd->add_flag("--trace", trace, "Also write per-stage shapes and probabilities");
  img_opt->needs(box_opt);
  box_opt->needs(img_opt);
  data_opt->excludes(img_opt);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate predictions or a model against a dataset");
  fs::path pred_dir, truth_dir, eval_model, report_path;
  double eval_threshold = 0.5;
  auto* pred_opt = eval_cmd->add_option("--pred", pred_dir, "Prediction directory");
  eval_cmd->add_option("--truth", truth_dir, "Ground-truth dataset directory")->required();
  auto* emodel_opt = eval_cmd->add_option("--model", eval_model, "Model file (runs detection in-process)");
  eval_cmd->add_option("--report", report_path, "Write the JSON report here");
  eval_cmd->add_option("--threshold", eval_threshold, "AU decision threshold")->check(CLI::Range(0.0, 1.0));
  pred_opt->excludes(emodel_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) {
      if (!coupling.empty()) {
        scfg.au_pair_coupling = parse_coupling(coupling);
      } else {
        std::erase_if(scfg.au_pair_coupling,
                      [&](const synth::AUCoupling& c) { return c.i >= scfg.n_aus || c.j >= scfg.n_aus; });
      }
      scfg.validate();
      synth_dataset(synth_out, scfg);
      out << "wrote " << scfg.n_samples << " samples to " << synth_out.string() << "\n";
    } else if (train_cmd->parsed()) {
      topts.cascade.variant = parse_variant(variant);
      topts.cascade.seed = seed;
      topts.cd.seed = seed;
      topts.cd.hidden = hidden;
      if (expect_aus) topts.expect_aus = expect_aus;
      const CascadeModel model = train_model(topts);
      save_model(topts.out, model);
      out << "trained " << variant << " model (" << model.stages.size() << " stages) -> "
          << topts.out.string() << "\n";
    } else if (detect_cmd->parsed()) {
      if (image_path.empty() && detect_data.empty()) {
        throw UsageError("detect: give either --image/--box or --data");
      }
      const CascadeModel model = load_model(model_path);
      if (!detect_data.empty()) {
        detect_dataset(model, detect_data, detect_out, threshold, trace);
      } else {
        const GrayImage image = io::read_pgm(image_path);
        const FaceBox box = io::box_from_text(io::read_file(box_path));
        detect_one(model, image, box, detect_out, threshold, trace);
      }
    } else if (eval_cmd->parsed()) {
      if (pred_dir.empty() == eval_model.empty()) throw UsageError("eval: give exactly one of --pred or --model");
      const EvalResult result = eval_model.empty()
                                    ? evaluate_predictions(pred_dir, truth_dir, eval_threshold)
                                    : evaluate_model(load_model(eval_model), truth_dir, eval_threshold);
      if (!report_path.empty()) io::write_file(report_path, report_to_json(result));
      out << report_summary(result);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace cjcrf::cli
