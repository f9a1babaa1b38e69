#pragma once

#include <filesystem>
#include <string>

#include "cjcrf/cascade.hpp"

namespace cjcrf {

inline constexpr int kModelFormatVersion = 1;

/// JSON model document (format_version 1). Matrices are stored as
/// {"rows", "cols", "data"} with row-major data; every real is written as the
/// shortest decimal that reads back to the same binary64 value.
std::string save_model_json(const CascadeModel& model);
CascadeModel load_model_json(const std::string& text);

void save_model(const std::filesystem::path& path, const CascadeModel& model);
CascadeModel load_model(const std::filesystem::path& path);

}  // namespace cjcrf
