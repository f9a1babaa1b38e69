#include "cjcrf/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cjcrf::io {

namespace {

std::vector<std::string> tokens(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(std::move(t));
  return out;
}

double parse_real(const std::string& tok) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw FormatError("expected a finite real number, got '" + tok + "'");
  }
  return v;
}

long long parse_int(const std::string& tok) {
  long long v = 0;
  const auto* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError("expected an integer, got '" + tok + "'");
  return v;
}

std::string stem_for(std::size_t i) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw FormatError("format_real: conversion failed");
  return std::string(buf, ptr);
}

std::string shape_to_text(const FaceShape& shape) {
  std::string s = std::to_string(shape.size()) + "\n";
  for (const auto& p : shape.points()) s += format_real(p.x) + " " + format_real(p.y) + "\n";
  return s;
}

FaceShape shape_from_text(const std::string& text) {
  const auto t = tokens(text);
  if (t.empty()) throw FormatError("shape file is empty");
  const long long d = parse_int(t[0]);
  if (d < 1 || t.size() != static_cast<std::size_t>(1 + 2 * d)) {
    throw FormatError("shape file: landmark count does not match coordinates");
  }
  std::vector<Point2> pts(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = {parse_real(t[1 + 2 * i]), parse_real(t[2 + 2 * i])};
  }
  return FaceShape(std::move(pts), Frame::ImagePixels);
}

std::string labels_to_text(const AULabelVector& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) s += ' ';
    s += labels.values[i] ? '1' : '0';
  }
  return s + "\n";
}

AULabelVector labels_from_text(const std::string& text) {
  AULabelVector out;
  for (const auto& tok : tokens(text)) {
    const long long v = parse_int(tok);
    if (v != 0 && v != 1) throw FormatError("label file: entries must be 0 or 1");
    out.values.push_back(static_cast<int>(v));
  }
  if (out.values.empty()) throw FormatError("label file is empty");
  return out;
}

std::string probs_to_text(const AUProbVector& probs) {
  std::string s;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (i) s += ' ';
    s += format_real(probs.values[static_cast<Eigen::Index>(i)]);
  }
  return s + "\n";
}

AUProbVector probs_from_text(const std::string& text) {
  const auto t = tokens(text);
  if (t.empty()) throw FormatError("probability file is empty");
  AUProbVector out{Eigen::VectorXd(static_cast<Eigen::Index>(t.size()))};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = parse_real(t[i]);
    if (v < 0.0 || v > 1.0) throw FormatError("probability file: entries must lie in [0, 1]");
    out.values[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

std::string box_to_text(const FaceBox& box) {
  return format_real(box.left) + " " + format_real(box.top) + " " + format_real(box.width) + " " +
         format_real(box.height) + "\n";
}

FaceBox box_from_text(const std::string& text) {
  const auto t = tokens(text);
  if (t.size() != 4) throw FormatError("box file: expected 'left top width height'");
  FaceBox b{parse_real(t[0]), parse_real(t[1]), parse_real(t[2]), parse_real(t[3])};
  b.validate();
  return b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::string data = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  data.reserve(data.size() + image.pixels().size());
  for (double v : image.pixels()) {
    data.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  write_file(path, data);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::size_t pos = 0;
  const auto next_token = [&]() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (next_token() != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const long long w = parse_int(next_token());
  const long long h = parse_int(next_token());
  const long long maxval = parse_int(next_token());
  if (w < 1 || h < 1 || maxval != 255) throw FormatError(path.string() + ": unsupported PGM header");
  ++pos;  // single whitespace before the raster
  const std::size_t count = static_cast<std::size_t>(w * h);
  if (data.size() < pos + count) throw FormatError(path.string() + ": truncated raster");
  std::vector<double> px(count);
  for (std::size_t i = 0; i < count; ++i) {
    px[i] = static_cast<unsigned char>(data[pos + i]) / 255.0;
  }
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(px));
}

std::vector<Sample> Dataset::samples() const {
  std::vector<Sample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.sample);
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                   const EyeIndices& eyes, const std::string& config_echo) {
  std::filesystem::create_directories(dir);
  const std::size_t n_aus = samples.empty() ? 0 : samples.front().gt_labels.size();
  const std::size_t d = samples.empty() ? 0 : samples.front().gt_shape.size();
  std::ostringstream manifest;
  manifest << "cjcrf-dataset 1\n"
           << "n_samples " << samples.size() << "\n"
           << "n_aus " << n_aus << "\n"
           << "d_landmarks " << d << "\n"
           << "eye_indices " << eyes.first << " " << eyes.second << "\n"
           << "config " << config_echo << "\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string stem = stem_for(i);
    write_pgm(dir / (stem + ".pgm"), samples[i].image);
    write_file(dir / (stem + ".pts"), shape_to_text(samples[i].gt_shape));
    write_file(dir / (stem + ".au"), labels_to_text(samples[i].gt_labels));
    write_file(dir / (stem + ".box"), box_to_text(samples[i].box));
    manifest << stem << " " << stem << ".pgm " << stem << ".pts " << stem << ".au " << stem << ".box\n";
  }
  write_file(dir / "manifest.txt", manifest.str());
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::istringstream in(read_file(dir / "manifest.txt"));
  Dataset ds;
  std::string line;
  std::size_t expected = 0;
  if (!std::getline(in, line) || line.rfind("cjcrf-dataset", 0) != 0) {
    throw FormatError(dir.string() + ": manifest.txt has no cjcrf-dataset header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "n_samples") {
      ls >> expected;
    } else if (key == "n_aus") {
      ls >> ds.n_aus;
    } else if (key == "d_landmarks") {
      ls >> ds.d_landmarks;
    } else if (key == "eye_indices") {
      ls >> ds.eye_indices.first >> ds.eye_indices.second;
    } else if (key == "config") {
      std::getline(ls >> std::ws, ds.config_echo);
    } else {
      std::string pgm, pts, au, box;
      if (!(ls >> pgm >> pts >> au >> box)) throw FormatError("manifest: malformed file line: " + line);
      DatasetEntry e;
      e.stem = key;
      e.sample.image = read_pgm(dir / pgm);
      e.sample.gt_shape = shape_from_text(read_file(dir / pts));
      e.sample.gt_labels = labels_from_text(read_file(dir / au));
      e.sample.box = box_from_text(read_file(dir / box));
      if (e.sample.gt_labels.size() != ds.n_aus || e.sample.gt_shape.size() != ds.d_landmarks) {
        throw FormatError("dataset: " + key + " does not match the manifest schema");
      }
      ds.entries.push_back(std::move(e));
    }
  }
  if (ds.entries.size() != expected) throw FormatError("manifest: sample count mismatch");
  return ds;
}

}  // namespace cjcrf::io
