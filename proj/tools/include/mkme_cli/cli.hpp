#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkme/types.hpp"

namespace mkme::cli {

/// Bad command line or configuration; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::string name;
  DataMatrix matrix;
  std::optional<std::size_t> label_col;
  std::vector<double> labels;  // filled when label_col is set
};

/// Comma-separated numeric table. Errors name the offending line (1-based,
/// header included): missing file, ragged rows, non-numeric or non-finite
/// cells, no data rows, label column out of range.
Dataset load_csv(const std::filesystem::path& path, bool has_header, std::optional<std::size_t> label_col = {});

/// Parses and runs one command; returns the process exit code
/// (0 success, 1 runtime failure, 2 usage error). Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mkme::cli
