#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace s2c {

/// Row-major nested array.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);

/// Parses a row-major nested array; all rows must have equal length.
/// Throws ParseError naming `what` on malformed input.
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j,
                                 const std::string& what);

/// Finite values as numbers, +-inf as the strings "inf"/"-inf", NaN as null.
nlohmann::json real_to_json(double v);
/// Inverse of real_to_json. Throws ParseError on other types.
double real_from_json(const nlohmann::json& j, const std::string& what);

std::string read_text(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace s2c
