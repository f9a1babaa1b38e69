#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cjcrf/core.hpp"

namespace cjcrf::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal that parses back to the same binary64 value.
std::string format_real(double v);

// Text formats. Shapes: first line D, then D lines "x y" (pixel frame).
// Labels: one line of N space-separated 0/1. Probabilities: one line of N
// reals. Boxes: one line "left top width height".
std::string shape_to_text(const FaceShape& shape);
FaceShape shape_from_text(const std::string& text);
std::string labels_to_text(const AULabelVector& labels);
AULabelVector labels_from_text(const std::string& text);
std::string probs_to_text(const AUProbVector& probs);
AUProbVector probs_from_text(const std::string& text);
std::string box_to_text(const FaceBox& box);
FaceBox box_from_text(const std::string& text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

/// Binary P5, maxval 255. Intensities are quantised to k / 255.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

struct DatasetEntry {
  std::string stem;  // e.g. "0007"
  Sample sample;
};

struct Dataset {
  std::vector<DatasetEntry> entries;
  std::size_t n_aus = 0;
  std::size_t d_landmarks = 0;
  EyeIndices eye_indices{0, 1};
  std::string config_echo;

  std::vector<Sample> samples() const;
};

/// Writes NNNN.{pgm,pts,au,box} per sample plus manifest.txt.
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                   const EyeIndices& eyes, const std::string& config_echo);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace cjcrf::io
