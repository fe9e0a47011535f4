#include "s2c/codegen.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "s2c/embedded_assets.hpp"
#include "s2c/errors.hpp"
#include "s2c/json_io.hpp"
#include "s2c/synthesis.hpp"

namespace s2c {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string replace_all(std::string s, const std::string& from,
                        const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string identifier(const std::string& name) {
  std::string id;
  for (char c : name) {
    const auto u = static_cast<unsigned char>(c);
    id += std::isalnum(u) ? static_cast<char>(std::tolower(u)) : '_';
  }
  if (id.empty() || std::isdigit(static_cast<unsigned char>(id[0]))) {
    id = "s2c_" + id;
  }
  return id;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string gain_rows(const MatrixXd& K, CodeTarget t) {
  const char open = t == CodeTarget::python ? '[' : '{';
  const char close = t == CodeTarget::python ? ']' : '}';
  std::ostringstream out;
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    out << "    " << open;
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      if (j) out << ", ";
      out << fmt17(K(i, j));
    }
    out << close << (i + 1 < K.rows() ? "," : "");
    if (i + 1 < K.rows()) out << "\n";
  }
  return out.str();
}

double min_sym_eig(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_sym_eig(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

const char* tool_version() { return "0.1.0"; }

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

GeneratedArtifact generate(const DesignRecord& rec, const PlantModel& p,
                           const GenerateOptions& opts) {
  const SynthesisCertificate& c = rec.certificate;
  if (c.status != SynthesisStatus::success) {
    throw PipelineError("refusing to generate code for a design with status " +
                        std::string(to_string(c.status)));
  }
  const std::string base = identifier(p.name.empty() ? "plant" : p.name);
  GeneratedArtifact a;
  a.target = opts.target;
  a.source_filename = base + "_controller" +
                      (opts.target == CodeTarget::python ? ".py" : ".h");
  a.manifest_filename = base + "_certificate.json";

  std::string src = opts.target == CodeTarget::python
                        ? assets::kPythonTemplate
                        : assets::kCHeaderTemplate;
  src = replace_all(src, "{{PLANT}}", p.name.empty() ? base : p.name);
  src = replace_all(src, "{{GAMMA}}", fmt17(c.gamma));
  src = replace_all(src, "{{ALPHA}}", fmt17(c.alpha));
  src = replace_all(src, "{{VERSION}}", tool_version());
  src = replace_all(src, "{{MANIFEST}}", a.manifest_filename);
  src = replace_all(src, "{{N}}", std::to_string(c.K.cols()));
  src = replace_all(src, "{{M}}", std::to_string(c.K.rows()));
  src = replace_all(src, "{{MACRO}}", upper(base));
  src = replace_all(src, "{{IDENT}}", base);
  src = replace_all(src, "{{GAIN_ROWS}}", gain_rows(c.K, opts.target));
  a.controller_source = src;

  const SpecSet& metric_specs = opts.metric_specs.value_or(rec.specs_snapshot);
  nlohmann::json m;
  m["schema_version"] = kManifestSchemaVersion;
  m["tool"] = {{"name", "s2c"}, {"version", tool_version()}};
  m["plant"] = p.name;
  m["iteration"] = rec.iteration;
  m["dimensions"] = {{"states", c.K.cols()}, {"inputs", c.K.rows()}};
  m["K"] = matrix_to_json(c.K);
  m["P"] = matrix_to_json(c.P);
  m["Y"] = matrix_to_json(c.Y);
  m["gamma"] = c.gamma;
  m["alpha"] = c.alpha;
  m["psi_max_eig"] = c.psi_max_eig;
  m["decay_lmi_max_eig"] = c.decay_lmi_max_eig;
  m["closed_loop_spectrum"] = to_json(c.closed_loop_spectrum);
  m["metrics"] = to_json(compute_metrics(rec, metric_specs));
  m["specs"] = specset_to_json(rec.specs_snapshot);
  m["source"] = {{"file", a.source_filename},
                 {"language",
                  opts.target == CodeTarget::python ? "python" : "c"},
                 {"sha256", sha256_hex(a.controller_source)}};
  a.certificate_manifest = std::move(m);
  return a;
}

MatrixXd parse_embedded_gain(const std::string& source) {
  const auto begin = source.find("BEGIN GAIN");
  const auto end = source.find("END GAIN", begin == std::string::npos ? 0 : begin);
  if (begin == std::string::npos || end == std::string::npos) {
    throw ParseError("gain block markers not found");
  }
  const auto eq = source.find('=', begin);
  if (eq == std::string::npos || eq > end) {
    throw ParseError("gain block has no initializer");
  }
  std::vector<std::vector<double>> rows;
  int depth = 0;
  std::string tok;
  auto flush = [&]() {
    if (tok.empty()) return;
    char* stop = nullptr;
    const double v = std::strtod(tok.c_str(), &stop);
    if (stop == tok.c_str() || *stop != '\0') {
      throw ParseError("bad number '" + tok + "' in gain block");
    }
    if (rows.empty()) throw ParseError("gain value outside a row");
    rows.back().push_back(v);
    tok.clear();
  };
  for (std::size_t i = eq + 1; i < end; ++i) {
    const char ch = source[i];
    if (ch == '[' || ch == '{') {
      ++depth;
      if (depth == 2) rows.emplace_back();
    } else if (ch == ']' || ch == '}') {
      if (depth == 2) flush();
      --depth;
    } else if (ch == ',') {
      if (depth == 2) flush();
    } else if (!std::isspace(static_cast<unsigned char>(ch)) && depth == 2) {
      tok += ch;
    }
  }
  if (rows.empty()) throw ParseError("empty gain block");
  MatrixXd K(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ParseError("ragged gain block");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return K;
}

bool reverify(const GeneratedArtifact& a, const PlantModel& plant) {
  const nlohmann::json& m = a.certificate_manifest;
  MatrixXd K, P, Y;
  double gamma = 0.0;
  double alpha = 0.0;
  std::string hash;
  try {
    K = matrix_from_json(m.at("K"), "K");
    P = matrix_from_json(m.at("P"), "P");
    Y = matrix_from_json(m.at("Y"), "Y");
    gamma = m.at("gamma").get<double>();
    alpha = m.at("alpha").get<double>();
    hash = m.at("source").at("sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("certificate manifest: ") + e.what());
  }
  const PlantModel p =
      plant.domain == TimeDomain::discrete ? tustin_d2c(plant) : plant;
  p.validate();
  const Eigen::Index n = p.states();
  const Eigen::Index mu = p.inputs();
  if (K.rows() != mu || K.cols() != n || P.rows() != n || P.cols() != n ||
      Y.rows() != mu || Y.cols() != n) {
    throw DimensionError("certificate manifest does not match the plant");
  }
  if (!(std::isfinite(gamma) && gamma > 0.0 && std::isfinite(alpha) &&
        alpha >= 0.0)) {
    return false;
  }
  if (sha256_hex(a.controller_source) != hash) return false;
  MatrixXd embedded;
  try {
    embedded = parse_embedded_gain(a.controller_source);
  } catch (const ParseError&) {
    return false;
  }
  if (embedded.rows() != K.rows() || embedded.cols() != K.cols() ||
      embedded != K) {
    return false;
  }

  if (!(max_sym_eig(assemble_psi(p, P, Y, gamma)) < 0.0)) return false;
  if (!(max_sym_eig(assemble_decay(p, P, Y, alpha)) < 0.0)) return false;
  if (!(min_sym_eig(P) >= kConditioningFloor - 1e-6)) return false;
  const Eigen::LLT<MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) return false;
  const MatrixXd K_cert = llt.solve(Y.transpose()).transpose();
  if (!((K - K_cert).norm() <= 1e-8 * std::max(1.0, K_cert.norm()))) {
    return false;
  }
  const Spectrum s = eigvals(p.A + p.B * K);
  if (!(s.max_real_part < 0.0 && s.max_real_part < -alpha + 1e-6)) {
    return false;
  }
  return closed_loop_hinf(p, K) <= gamma * (1.0 + 1e-3);
}

std::pair<std::filesystem::path, std::filesystem::path> write_artifact(
    const GeneratedArtifact& a, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto src = dir / a.source_filename;
  const auto man = dir / a.manifest_filename;
  write_text_atomic(src, a.controller_source);
  write_text_atomic(man, a.certificate_manifest.dump(2) + "\n");
  return {src, man};
}

}  // namespace s2c
