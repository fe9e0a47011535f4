#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace s2c {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class TimeDomain { continuous, discrete };

/// Linear time-invariant plant
///
///   x' = A x + B u + E w,   z = Cz x + Dz u,   y = Cy x
///
/// with the matrix aliases E = B1, Cz = C1, Dz = D12. For discrete plants the
/// same equations are read as difference equations with sampling period Ts.
struct PlantModel {
  std::string name;
  MatrixXd A;
  MatrixXd B;
  MatrixXd E;
  MatrixXd Cz;
  MatrixXd Dz;
  std::optional<MatrixXd> Cy;
  TimeDomain domain = TimeDomain::continuous;
  std::optional<double> Ts;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index disturbances() const { return E.cols(); }
  Eigen::Index regulated() const { return Cz.rows(); }
  Eigen::Index measured() const { return Cy ? Cy->rows() : 0; }

  /// Throws DimensionError or DomainError when an invariant is broken.
  void validate() const;

  bool operator==(const PlantModel&) const;
};

enum class Priority { low, medium, high, critical };

std::string_view to_string(Priority p);
/// Throws ParseError for anything outside the four levels.
Priority priority_from_string(std::string_view s);

struct SpecEntry {
  double target = 0.0;
  double slack = 0.0;
  Priority priority = Priority::medium;
  bool operator==(const SpecEntry&) const = default;
};

/// Performance specification driving one synthesis round. `hinf_min` is the
/// gamma floor raised by the adaptation guardrail.
struct SpecSet {
  SpecEntry hinf;
  double hinf_min = 0.0;
  SpecEntry settling_time;
  SpecEntry overshoot;
  std::optional<double> decay_rate;

  /// Decay rate imposed on the closed loop: the explicit override when
  /// present, otherwise 3.9 / settling target (2% settling of e^{-at}).
  double alpha() const;

  /// Throws DomainError when an invariant is broken.
  void validate() const;

  /// Largest admissible floor for the current gamma target.
  double floor_cap() const { return 0.9 * hinf.target; }

  bool operator==(const SpecSet&) const = default;
};

/// Decay rate matching a 2% settling time.
double alpha_from_settling(double settling_time_s);

nlohmann::json plant_to_json(const PlantModel& p);
PlantModel plant_from_json(const nlohmann::json& j);

/// Reads and validates a plant file. Throws ParseError, DimensionError or
/// DomainError.
PlantModel load_plant(const std::filesystem::path& path);
void write_plant(const PlantModel& p, const std::filesystem::path& path);

nlohmann::json specset_to_json(const SpecSet& s);
SpecSet specset_from_json(const nlohmann::json& j);

/// Condition number cap on (A_d + I) for the bilinear conversion.
inline constexpr double kTustinConditionCap = 1e8;

/// Bilinear (Tustin) discrete-to-continuous conversion. Both input channels
/// (B and E) are mapped; Cz and Dz follow the output/feedthrough formulas.
/// Throws DomainError for continuous input and NearSingularError when
/// cond2(A_d + I) exceeds kTustinConditionCap.
PlantModel tustin_d2c(const PlantModel& p);

struct ChannelMatrices {
  MatrixXd E;
  MatrixXd Cz;
  MatrixXd Dz;
};

/// Disturbance / regulated-output triple consumed by synthesis.
ChannelMatrices alias_matrices(const PlantModel& p);

}  // namespace s2c
