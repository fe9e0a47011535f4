#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "s2c/model.hpp"
#include "s2c/pipeline.hpp"

namespace s2c {

enum class CodeTarget { python, c_header };

struct GeneratedArtifact {
  CodeTarget target = CodeTarget::python;
  std::string source_filename;
  std::string manifest_filename;
  std::string controller_source;
  /// P, Y, gamma, alpha, K, spectrum, metrics, spec snapshot, tool version
  /// and the SHA-256 of controller_source.
  nlohmann::json certificate_manifest;
};

struct GenerateOptions {
  CodeTarget target = CodeTarget::python;
  /// Specs the manifest metrics are measured against; the record's own
  /// snapshot when absent.
  std::optional<SpecSet> metric_specs;
};

inline constexpr int kManifestSchemaVersion = 1;
const char* tool_version();

/// Throws PipelineError for records without a successful certificate.
GeneratedArtifact generate(const DesignRecord& rec, const PlantModel& p,
                           const GenerateOptions& opts = {});

/// Rechecks the artifact against the plant: source hash and embedded gain,
/// Psi < 0 and the decay block < 0 at the stored (P, Y, gamma, alpha),
/// lambda_min(P) >= 0.1, K = Y P^{-1}, the closed-loop decay and the
/// closed-loop norm against gamma. Throws DimensionError when the manifest
/// does not fit the plant and ParseError when it is malformed.
bool reverify(const GeneratedArtifact& a, const PlantModel& p);

/// Gain matrix between the BEGIN GAIN / END GAIN markers of a generated
/// source. Throws ParseError when the block is missing or ragged.
MatrixXd parse_embedded_gain(const std::string& source);

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& data);

/// Writes both files into `dir`; returns their paths.
std::pair<std::filesystem::path, std::filesystem::path> write_artifact(
    const GeneratedArtifact& a, const std::filesystem::path& dir);

}  // namespace s2c
