#include "cjcrf/model_file.hpp"

#include <stdexcept>

#include "json.hpp"

#include "cjcrf/io.hpp"

namespace cjcrf {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
    throw io::FormatError("model file: matrix data length does not match rows x cols");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

FaceShape canonical_from_json(const json& j) {
  return FaceShape::from_flat(vector_from_json(j), Frame::Canonical);
}

}  // namespace

std::string save_model_json(const CascadeModel& model) {
  const CascadeConfig& c = model.config;
  const DescriptorConfig& d = model.descriptor;
  const CDConfig& cd = model.prior.trained_with;
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["rng"] = "splitmix64 streams: state = mix64(mix64(seed ^ mix64(domain)) ^ index)";
  doc["config"] = {
      {"stages", c.stages},
      {"lambda_shape", c.lambda_shape},
      {"lambda_prob", c.lambda_prob},
      {"ridge", c.ridge},
      {"augmentations", c.augmentations},
      {"perturb_scale", c.perturb_scale},
      {"perturb_rotation", c.perturb_rotation},
      {"perturb_translation", c.perturb_translation},
      {"variant", std::string(variant_name(c.variant))},
      {"seed", c.seed},
      {"hidden", cd.hidden},
      {"epochs", cd.epochs},
      {"cd", {{"learning_rate", cd.learning_rate},
              {"batch_size", cd.batch_size},
              {"cd_steps", cd.cd_steps},
              {"momentum", cd.momentum},
              {"weight_decay", cd.weight_decay},
              {"seed", cd.seed}}},
      {"descriptor", {{"radius_fraction", d.radius_fraction},
                      {"grid_cells", d.grid_cells},
                      {"orientation_bins", d.orientation_bins},
                      {"clip_threshold", d.clip_threshold}}},
  };
  doc["mean_shape"] = vector_to_json(model.mean.flat());
  doc["standardization"] = {{"mean", vector_to_json(model.prior.standardization.mean)},
                            {"stddev", vector_to_json(model.prior.standardization.stddev)}};
  const RBMParams& r = model.prior.rbm;
  doc["rbm"] = {{"W_x", matrix_to_json(r.Wx)},
                {"W_a", matrix_to_json(r.Wa)},
                {"b_x", vector_to_json(r.bx)},
                {"b_a", vector_to_json(r.ba)},
                {"c", vector_to_json(r.c)}};
  json au = json::array();
  for (std::size_t i = 0; i < model.prior.au_shapes.size(); ++i) {
    au.push_back({{"shape", vector_to_json(model.prior.au_shapes[i].flat())},
                  {"absent", static_cast<bool>(model.prior.au_absent[i])}});
  }
  doc["au_shapes"] = std::move(au);
  doc["fallback_shape"] = vector_to_json(model.prior.fallback_shape.flat());
  json stages = json::array();
  for (const auto& s : model.stages) stages.push_back({{"R", matrix_to_json(s.R)}, {"T", matrix_to_json(s.T)}});
  doc["stages"] = std::move(stages);
  doc["eye_indices"] = {model.eye_indices.first, model.eye_indices.second};
  return doc.dump() + "\n";
}

CascadeModel load_model_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw io::FormatError(std::string("model file: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw io::FormatError("model file: unsupported format_version");
    }
    CascadeModel model;
    const json& c = doc.at("config");
    model.config.stages = c.at("stages").get<int>();
    model.config.lambda_shape = c.at("lambda_shape").get<double>();
    model.config.lambda_prob = c.at("lambda_prob").get<double>();
    model.config.ridge = c.at("ridge").get<double>();
    model.config.augmentations = c.at("augmentations").get<int>();
    model.config.perturb_scale = c.at("perturb_scale").get<double>();
    model.config.perturb_rotation = c.at("perturb_rotation").get<double>();
    model.config.perturb_translation = c.at("perturb_translation").get<double>();
    model.config.variant = parse_variant(c.at("variant").get<std::string>());
    model.config.seed = c.at("seed").get<std::uint64_t>();

    CDConfig& cd = model.prior.trained_with;
    cd.hidden = c.at("hidden").get<std::size_t>();
    cd.epochs = c.at("epochs").get<int>();
    const json& cdj = c.at("cd");
    cd.learning_rate = cdj.at("learning_rate").get<double>();
    cd.batch_size = cdj.at("batch_size").get<int>();
    cd.cd_steps = cdj.at("cd_steps").get<int>();
    cd.momentum = cdj.at("momentum").get<double>();
    cd.weight_decay = cdj.at("weight_decay").get<double>();
    cd.seed = cdj.at("seed").get<std::uint64_t>();

    const json& dj = c.at("descriptor");
    model.descriptor.radius_fraction = dj.at("radius_fraction").get<double>();
    model.descriptor.grid_cells = dj.at("grid_cells").get<int>();
    model.descriptor.orientation_bins = dj.at("orientation_bins").get<int>();
    model.descriptor.clip_threshold = dj.at("clip_threshold").get<double>();

    model.mean = canonical_from_json(doc.at("mean_shape"));
    model.prior.standardization.mean = vector_from_json(doc.at("standardization").at("mean"));
    model.prior.standardization.stddev = vector_from_json(doc.at("standardization").at("stddev"));
    const json& rj = doc.at("rbm");
    model.prior.rbm.Wx = matrix_from_json(rj.at("W_x"));
    model.prior.rbm.Wa = matrix_from_json(rj.at("W_a"));
    model.prior.rbm.bx = vector_from_json(rj.at("b_x"));
    model.prior.rbm.ba = vector_from_json(rj.at("b_a"));
    model.prior.rbm.c = vector_from_json(rj.at("c"));
    for (const auto& a : doc.at("au_shapes")) {
      model.prior.au_shapes.push_back(canonical_from_json(a.at("shape")));
      model.prior.au_absent.push_back(a.at("absent").get<bool>());
    }
    model.prior.fallback_shape = canonical_from_json(doc.at("fallback_shape"));
    for (const auto& s : doc.at("stages")) {
      model.stages.push_back({matrix_from_json(s.at("R")), matrix_from_json(s.at("T"))});
    }
    const json& eyes = doc.at("eye_indices");
    model.eye_indices = {eyes.at(0).get<std::size_t>(), eyes.at(1).get<std::size_t>()};
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw io::FormatError(std::string("model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const CascadeModel& model) {
  io::write_file(path, save_model_json(model));
}

CascadeModel load_model(const std::filesystem::path& path) {
  return load_model_json(io::read_file(path));
}

}  // namespace cjcrf
