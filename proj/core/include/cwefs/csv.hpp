#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cwefs::csv {

/// Reads a dense numeric CSV. Every cell must parse as a finite decimal;
/// failures raise DataError naming the file, row and column (1-based).
/// With `header` set the first line is skipped.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path, bool header = false);

/// Writes with 17 significant digits so that read_matrix round-trips exactly.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// Reads all comma- or newline-separated non-empty tokens, trimmed.
std::vector<std::string> read_tokens(const std::filesystem::path& path);

std::string format_double(double v);

/// Splits on `sep`, trimming ASCII whitespace around each field.
std::vector<std::string> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

/// Parses a full string as a finite double; returns false on any leftover input.
bool parse_double(std::string_view s, double& out);

}  // namespace cwefs::csv
