#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cjcrf/cascade.hpp"
#include "cjcrf/metrics.hpp"
#include "cjcrf/synth.hpp"

namespace cjcrf::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses "i:j:s,i:j:s,...".
std::vector<synth::AUCoupling> parse_coupling(const std::string& text);

/// Entry point used by the `cjcrf` executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// In-process versions of the subcommands; these throw on failure.

void synth_dataset(const std::filesystem::path& out_dir, const synth::SynthConfig& cfg);

struct TrainOptions {
  std::filesystem::path data;
  std::filesystem::path out;
  CascadeConfig cascade;
  CDConfig cd;
  DescriptorConfig descriptor;
  std::optional<std::size_t> expect_aus;
  std::optional<std::size_t> expect_landmarks;
};

CascadeModel train_model(const TrainOptions& opts);

/// Writes `.pts`, `.auprob`, `.au` (and `.trace` when requested) for one
/// image under `prefix`.
void detect_one(const CascadeModel& model, const GrayImage& image, const FaceBox& box,
                const std::filesystem::path& prefix, double threshold, bool trace);

/// Runs detection over a dataset directory, one prefix per sample stem, and
/// writes meta.json with the model variant.
void detect_dataset(const CascadeModel& model, const std::filesystem::path& data,
                    const std::filesystem::path& out_dir, double threshold, bool trace);

struct EvalResult {
  EvalReport report;
  std::string variant;  // empty when unknown
  std::optional<double> baseline_error;  // mean-shape initialisation error
};

/// Compares prediction files (STEM.pts, STEM.auprob) against a dataset.
EvalResult evaluate_predictions(const std::filesystem::path& pred_dir,
                                const std::filesystem::path& truth_dir, double threshold);
/// Runs the model over a dataset in-process and evaluates it, including the
/// per-stage error trace.
EvalResult evaluate_model(const CascadeModel& model, const std::filesystem::path& truth_dir,
                          double threshold);

std::string report_to_json(const EvalResult& result);
/// Summary lines with F1 and AUC as percentages to two decimals.
std::string report_summary(const EvalResult& result);

}  // namespace cjcrf::cli
