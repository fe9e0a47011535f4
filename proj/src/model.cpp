#include "s2c/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "s2c/errors.hpp"
#include "s2c/json_io.hpp"

namespace s2c {

namespace {

void require_shape(const MatrixXd& M, Eigen::Index rows, Eigen::Index cols,
                   const char* name) {
  if (M.rows() != rows || M.cols() != cols) {
    std::ostringstream msg;
    msg << "matrix " << name << " is " << M.rows() << "x" << M.cols()
        << ", expected " << rows << "x" << cols;
    throw DimensionError(msg.str());
  }
}

void require_finite(const MatrixXd& M, const char* name) {
  if (!M.allFinite()) {
    throw DomainError(std::string("matrix ") + name +
                      " has non-finite entries");
  }
}

}  // namespace

void PlantModel::validate() const {
  const Eigen::Index n = A.rows();
  if (n == 0 || A.cols() != n) {
    throw DimensionError("A must be a non-empty square matrix");
  }
  if (B.rows() != n || B.cols() == 0) {
    throw DimensionError("B must have n rows and at least one column");
  }
  if (E.rows() != n) throw DimensionError("E must have n rows");
  if (E.cols() == 0) throw DimensionError("empty disturbance channel E");
  if (Cz.cols() != n || Cz.rows() == 0) {
    throw DimensionError("Cz must have n columns and at least one row");
  }
  require_shape(Dz, Cz.rows(), B.cols(), "Dz");
  if (Cy && Cy->cols() != n) throw DimensionError("Cy must have n columns");

  require_finite(A, "A");
  require_finite(B, "B");
  require_finite(E, "E");
  require_finite(Cz, "Cz");
  require_finite(Dz, "Dz");
  if (Cy) require_finite(*Cy, "Cy");

  if (domain == TimeDomain::discrete) {
    if (!Ts) throw DomainError("discrete plant requires a sampling period Ts");
    if (!(std::isfinite(*Ts) && *Ts > 0.0)) {
      throw DomainError("sampling period Ts must be positive");
    }
  } else if (Ts) {
    throw DomainError("continuous plant must not carry a sampling period");
  }
}

bool PlantModel::operator==(const PlantModel& o) const {
  auto same = [](const MatrixXd& x, const MatrixXd& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  if (Cy.has_value() != o.Cy.has_value()) return false;
  if (Cy && !same(*Cy, *o.Cy)) return false;
  return name == o.name && domain == o.domain && Ts == o.Ts && same(A, o.A) &&
         same(B, o.B) && same(E, o.E) && same(Cz, o.Cz) && same(Dz, o.Dz);
}

std::string_view to_string(Priority p) {
  switch (p) {
    case Priority::low:
      return "low";
    case Priority::medium:
      return "medium";
    case Priority::high:
      return "high";
    case Priority::critical:
      return "critical";
  }
  return "medium";
}

Priority priority_from_string(std::string_view s) {
  if (s == "low") return Priority::low;
  if (s == "medium") return Priority::medium;
  if (s == "high") return Priority::high;
  if (s == "critical") return Priority::critical;
  throw ParseError("unknown priority '" + std::string(s) + "'");
}

double alpha_from_settling(double settling_time_s) {
  return 3.9 / settling_time_s;
}

double SpecSet::alpha() const {
  if (decay_rate) return *decay_rate;
  return alpha_from_settling(settling_time.target);
}

void SpecSet::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(hinf.target) || hinf.target <= 0.0) {
    throw DomainError("h-infinity target must be positive");
  }
  if (!finite(hinf_min) || hinf_min < 0.0 ||
      hinf_min > floor_cap() * (1.0 + 1e-12)) {
    throw DomainError("gamma floor must lie in [0, 0.9 * target]");
  }
  if (!finite(settling_time.target) || settling_time.target <= 0.0) {
    throw DomainError("settling time target must be positive");
  }
  if (!finite(overshoot.target) || overshoot.target < 0.0 ||
      overshoot.target >= 1.0) {
    throw DomainError("overshoot target must lie in [0, 1)");
  }
  for (const SpecEntry* e : {&hinf, &settling_time, &overshoot}) {
    if (!finite(e->slack) || e->slack < 0.0) {
      throw DomainError("slack must be non-negative");
    }
  }
  if (decay_rate && (!finite(*decay_rate) || *decay_rate < 0.0)) {
    throw DomainError("decay rate must be non-negative");
  }
}

nlohmann::json plant_to_json(const PlantModel& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["domain"] = p.domain == TimeDomain::discrete ? "discrete" : "continuous";
  if (p.Ts) j["Ts"] = *p.Ts;
  j["A"] = matrix_to_json(p.A);
  j["B"] = matrix_to_json(p.B);
  j["E"] = matrix_to_json(p.E);
  j["Cz"] = matrix_to_json(p.Cz);
  j["Dz"] = matrix_to_json(p.Dz);
  if (p.Cy) j["Cy"] = matrix_to_json(*p.Cy);
  return j;
}

PlantModel plant_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("plant document must be an object");
  PlantModel p;
  try {
    p.name = j.value("name", std::string{});
    const std::string domain = j.at("domain").get<std::string>();
    if (domain == "continuous") {
      p.domain = TimeDomain::continuous;
    } else if (domain == "discrete") {
      p.domain = TimeDomain::discrete;
    } else {
      throw ParseError("domain must be 'continuous' or 'discrete'");
    }
    if (j.contains("Ts") && !j.at("Ts").is_null()) {
      if (!j.at("Ts").is_number()) throw ParseError("Ts must be a number");
      p.Ts = j.at("Ts").get<double>();
    }
    p.A = matrix_from_json(j.at("A"), "A");
    p.B = matrix_from_json(j.at("B"), "B");
    p.E = matrix_from_json(j.at("E"), "E");
    p.Cz = matrix_from_json(j.at("Cz"), "Cz");
    p.Dz = matrix_from_json(j.at("Dz"), "Dz");
    if (j.contains("Cy") && !j.at("Cy").is_null()) {
      p.Cy = matrix_from_json(j.at("Cy"), "Cy");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("plant document: ") + e.what());
  }
  p.validate();
  return p;
}

PlantModel load_plant(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open plant file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return plant_from_json(j);
}

void write_plant(const PlantModel& p, const std::filesystem::path& path) {
  write_text_atomic(path, plant_to_json(p).dump(2) + "\n");
}

nlohmann::json specset_to_json(const SpecSet& s) {
  auto entry = [](const SpecEntry& e) {
    return nlohmann::json{{"target", e.target},
                          {"slack", e.slack},
                          {"priority", std::string(to_string(e.priority))}};
  };
  nlohmann::json j;
  j["h_infinity_norm"] = entry(s.hinf);
  j["h_infinity_norm"]["min"] = s.hinf_min;
  j["settling_time"] = entry(s.settling_time);
  j["overshoot"] = entry(s.overshoot);
  if (s.decay_rate) j["decay_rate"] = {{"target", *s.decay_rate}};
  j["alpha"] = s.alpha();
  return j;
}

SpecSet specset_from_json(const nlohmann::json& j) {
  auto entry = [](const nlohmann::json& e) {
    SpecEntry out;
    out.target = e.at("target").get<double>();
    out.slack = e.value("slack", 0.0);
    out.priority =
        priority_from_string(e.value("priority", std::string("medium")));
    return out;
  };
  SpecSet s;
  try {
    s.hinf = entry(j.at("h_infinity_norm"));
    s.hinf_min = j.at("h_infinity_norm").value("min", 0.0);
    s.settling_time = entry(j.at("settling_time"));
    s.overshoot = entry(j.at("overshoot"));
    if (j.contains("decay_rate")) {
      s.decay_rate = j.at("decay_rate").at("target").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("spec document: ") + e.what());
  }
  s.validate();
  return s;
}

PlantModel tustin_d2c(const PlantModel& p) {
  if (p.domain != TimeDomain::discrete) {
    throw DomainError("tustin_d2c expects a discrete plant");
  }
  p.validate();
  const double ts = *p.Ts;
  const Eigen::Index n = p.states();
  const MatrixXd I = MatrixXd::Identity(n, n);
  const MatrixXd M = p.A + I;

  Eigen::JacobiSVD<MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  const double cond = smin > 0.0 ? sv(0) / smin
                                 : std::numeric_limits<double>::infinity();
  if (!(cond <= kTustinConditionCap)) {
    std::ostringstream msg;
    msg << "A_d + I is near-singular (condition number " << cond << ")";
    throw NearSingularError(msg.str(), cond);
  }

  const Eigen::PartialPivLU<MatrixXd> lu(M);
  // Right-multiplication by M^{-1}: X M^{-1} = (M^{-T} X^T)^T.
  const Eigen::PartialPivLU<MatrixXd> lu_t(M.transpose());
  auto right_solve = [&](const MatrixXd& X) -> MatrixXd {
    return lu_t.solve(X.transpose()).transpose();
  };

  PlantModel c = p;
  c.domain = TimeDomain::continuous;
  c.Ts.reset();
  c.A = (2.0 / ts) * right_solve(p.A - I);
  c.B = (2.0 / ts) * lu.solve(p.B);
  c.E = (2.0 / ts) * lu.solve(p.E);
  const MatrixXd Cz_minv = right_solve(p.Cz);
  c.Cz = Cz_minv;
  c.Dz = p.Dz - Cz_minv * p.B;
  if (p.Cy) c.Cy = right_solve(*p.Cy);
  return c;
}

ChannelMatrices alias_matrices(const PlantModel& p) {
  ChannelMatrices out{p.E, p.Cz, p.Dz};
  if (out.Dz.size() == 0) out.Dz = MatrixXd::Zero(p.regulated(), p.inputs());
  return out;
}

}  // namespace s2c
