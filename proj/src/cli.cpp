#include "s2c/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "s2c/codegen.hpp"
#include "s2c/errors.hpp"
#include "s2c/json_io.hpp"

namespace s2c::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kExitCodeHelp =
    "Exit codes: 0 success, 1 error, 2 fallback design (pipeline only).";

// CLI11 parses from argv; args excludes the program name.
int parse_args(CLI::App& app, const std::vector<std::string>& args,
               std::ostream& out, std::ostream& err, bool& done) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back(app.get_name());
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  done = false;
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    done = true;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    done = true;
    return kExitError;
  }
  return kExitOk;
}

std::string num(const std::optional<double>& v) {
  if (!v) return "";
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  if (std::isnan(*v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

std::string read_requirement(const std::string& where) {
  if (where == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  return read_text(where);
}

std::unique_ptr<llm::LlmClient> client_for(const std::string& mode,
                                           std::ostream& err) {
  if (mode != "on") return nullptr;
  const llm::LlmConfig cfg = llm::LlmConfig::from_env();
  if (cfg.endpoint.empty()) {
    err << "warning: --llm on without S2C_LLM_ENDPOINT; using rules and "
           "heuristics\n";
    return nullptr;
  }
  return llm::make_client(cfg);
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const Method m = method_from_string(item);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw ParseError("no methods selected");
  return out;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) {
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  }
  return out;
}

bool controllable(const MatrixXd& A, const MatrixXd& B) {
  const Eigen::Index n = A.rows();
  MatrixXd C(n, n * B.cols());
  MatrixXd blk = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    C.middleCols(k * B.cols(), B.cols()) = blk;
    blk = A * blk;
  }
  Eigen::JacobiSVD<MatrixXd> svd(C);
  const auto& s = svd.singularValues();
  return s(n - 1) > 1e-8 * std::max(1.0, s(0));
}

bool observable(const MatrixXd& A, const MatrixXd& C) {
  return controllable(A.transpose(), C.transpose());
}

}  // namespace

const char* default_requirement() {
  return "Design a robust H-infinity state-feedback controller. "
         "Settling time under 8 seconds with 2s tolerance; "
         "overshoot below 25%; "
         "H-infinity norm less than 20.\n";
}

std::optional<double> median_of(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

std::vector<SuiteProblem> load_suite(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("problems") ||
      !j.at("problems").is_array()) {
    throw ParseError("suite must contain a 'problems' array");
  }
  const fs::path dir = path.parent_path();
  std::vector<SuiteProblem> out;
  for (const auto& p : j.at("problems")) {
    try {
      SuiteProblem sp;
      sp.plant = dir / p.at("plant").get<std::string>();
      sp.req = dir / p.at("req").get<std::string>();
      sp.name = p.value("name", sp.plant.stem().string());
      if (!fs::exists(sp.plant)) throw ParseError("missing " + sp.plant.string());
      if (!fs::exists(sp.req)) throw ParseError("missing " + sp.req.string());
      out.push_back(std::move(sp));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("suite entry: ") + e.what());
    }
  }
  if (out.empty()) throw ParseError("suite is empty");
  return out;
}

std::vector<BenchRow> run_bench(const std::vector<SuiteProblem>& suite,
                                const BenchOptions& opts) {
  std::vector<BenchRow> rows(suite.size() * opts.methods.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    std::unique_ptr<llm::LlmClient> client;
    if (opts.llm) {
      std::ostringstream sink;
      client = client_for("on", sink);
    }
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= rows.size()) return;
      const SuiteProblem& prob = suite[idx / opts.methods.size()];
      BenchRow& row = rows[idx];
      row.problem = prob.name;
      row.method = opts.methods[idx % opts.methods.size()];
      row.result.method = row.method;
      try {
        const PlantModel plant = load_plant(prob.plant);
        const RequirementText req{read_text(prob.req), RequirementSource::user};
        const SpecParse parsed =
            client ? parse_llm(req, *client) : parse_rules(req);
        const SpecSet specs = to_specset(parsed.spec, plant);
        RunConfig cfg;
        cfg.max_iter = opts.max_iter;
        cfg.seed = opts.seed;
        cfg.client = client.get();
        row.result = run_baseline(plant, specs, row.method, cfg);
      } catch (const std::exception& e) {
        row.result.error = e.what();
      }
    }
  };
  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

std::string aggregate_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "problem,method,success,iterations,gamma,gamma_over_target,"
         "decay_sat,dist_rej,settling_median,overshoot_median\n";
  for (const auto& r : rows) {
    const MetricSet& m = r.result.metrics;
    out << r.problem << ',' << to_string(r.method) << ','
        << (m.success ? 1 : 0) << ',' << r.result.iterations << ','
        << num(m.gamma) << ',' << num(m.gamma_over_target) << ','
        << num(m.decay_sat) << ',' << num(m.disturbance_rejection) << ','
        << num(m.settling_median_s) << ',' << num(m.overshoot_median) << '\n';
  }
  return out.str();
}

nlohmann::json aggregate_report(const std::vector<BenchRow>& rows,
                                const std::vector<Method>& methods) {
  auto collect = [&](Method m, auto getter) {
    std::vector<double> v;
    for (const auto& r : rows) {
      if (r.method != m) continue;
      if (const std::optional<double> x = getter(r)) v.push_back(*x);
    }
    return v;
  };
  auto dist = [](const BenchRow& r) { return r.result.metrics.disturbance_rejection; };
  std::optional<double> brl_dist;
  if (std::find(methods.begin(), methods.end(), Method::brl) != methods.end()) {
    brl_dist = median_of(collect(Method::brl, dist));
  }
  auto opt_json = [](const std::optional<double>& v) {
    return v ? real_to_json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json per = nlohmann::json::object();
  for (Method m : methods) {
    std::size_t n = 0, succ = 0, conv6 = 0;
    for (const auto& r : rows) {
      if (r.method != m) continue;
      ++n;
      if (r.result.metrics.success) ++succ;
      if (r.result.converged && r.result.iterations <= 6) ++conv6;
    }
    const auto d = median_of(collect(m, dist));
    std::optional<double> d_norm;
    if (d && brl_dist && *brl_dist > 0.0) d_norm = *d / *brl_dist;
    per[to_string(m)] = {
        {"problems", n},
        {"success_rate", n ? static_cast<double>(succ) / n : 0.0},
        {"converged_within_6_rate", n ? static_cast<double>(conv6) / n : 0.0},
        {"dist_rej_median", opt_json(d)},
        {"dist_rej_normalized_to_brl", opt_json(d_norm)},
        {"gamma_over_target_median",
         opt_json(median_of(collect(m, [](const BenchRow& r) {
           return r.result.metrics.gamma_over_target;
         })))},
        {"decay_sat_median", opt_json(median_of(collect(m, [](const BenchRow& r) {
           return r.result.metrics.decay_sat;
         })))}};
  }
  nlohmann::json names = nlohmann::json::array();
  for (Method m : methods) names.push_back(to_string(m));
  return {{"schema_version", 1}, {"methods", names}, {"per_method", per}};
}

void parse_dims(const std::string& spec, GenSuiteOptions& o) {
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    const auto dots = item.find("..");
    if (colon == std::string::npos || dots == std::string::npos) {
      throw ParseError("dims entry '" + item + "' is not key:lo..hi");
    }
    const std::string key = item.substr(0, colon);
    int lo = 0, hi = 0;
    try {
      lo = std::stoi(item.substr(colon + 1, dots - colon - 1));
      hi = std::stoi(item.substr(dots + 2));
    } catch (const std::exception&) {
      throw ParseError("dims entry '" + item + "' has bad bounds");
    }
    if (lo < 1 || hi < lo) throw ParseError("dims range must satisfy 1 <= lo <= hi");
    if (key == "n") {
      o.n_min = lo;
      o.n_max = hi;
    } else if (key == "m") {
      o.m_min = lo;
      o.m_max = hi;
    } else {
      throw ParseError("unknown dims key '" + key + "'");
    }
  }
}

double parse_fraction(const std::string& s) {
  double v = 0.0;
  try {
    const auto slash = s.find('/');
    if (slash != std::string::npos) {
      const double a = std::stod(s.substr(0, slash));
      const double b = std::stod(s.substr(slash + 1));
      if (b == 0.0) throw ParseError("zero denominator");
      v = a / b;
    } else {
      v = std::stod(s);
    }
  } catch (const std::logic_error&) {
    throw ParseError("bad fraction '" + s + "'");
  }
  if (!(v >= 0.0 && v <= 1.0)) throw ParseError("fraction must lie in [0, 1]");
  return v;
}

std::vector<PlantModel> generate_plants(const GenSuiteOptions& o) {
  if (o.count <= 0) throw ParseError("suite count must be positive");
  const int n_unstable =
      static_cast<int>(std::lround(o.count * o.unstable_frac));
  std::vector<int> order(static_cast<std::size_t>(o.count));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(o.seed);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  std::vector<bool> unstable(static_cast<std::size_t>(o.count), false);
  for (int i = 0; i < n_unstable; ++i) {
    unstable[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  }

  std::vector<PlantModel> out;
  for (int k = 0; k < o.count; ++k) {
    std::seed_seq seq{static_cast<std::uint32_t>(o.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(o.seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> margin(0.2, 1.0);
    auto pick = [&](int lo, int hi) {
      return std::uniform_int_distribution<int>(lo, hi)(rng);
    };
    auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
      MatrixXd M(r, c);
      for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) M(i, j) = normal(rng);
      }
      return M;
    };
    const int n = pick(o.n_min, o.n_max);
    const int m = pick(o.m_min, std::min(o.m_max, n));
    const int w = pick(1, n);
    PlantModel p;
    p.name = "plant_" + std::string(k < 10 ? "0" : "") + std::to_string(k);
    for (;;) {
      p.A = gaussian(n, n);
      p.B = gaussian(n, m);
      if (controllable(p.A, p.B)) break;
    }
    p.E = gaussian(n, w);
    const double re = eigvals(p.A).max_real_part;
    const double shift = unstable[static_cast<std::size_t>(k)]
                             ? re - margin(rng)
                             : re + margin(rng);
    p.A -= shift * MatrixXd::Identity(n, n);
    p.Cz = MatrixXd::Zero(n + m, n);
    p.Cz.topRows(n).setIdentity();
    p.Dz = MatrixXd::Zero(n + m, m);
    p.Dz.bottomRows(m).setIdentity();
    if (!observable(p.A, p.Cz)) throw Error("generated plant not observable");
    p.validate();
    out.push_back(std::move(p));
  }
  return out;
}

int cmd_pipeline(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  CLI::App app{"Run the synthesis/verification/adaptation loop on one plant.\n" +
                   std::string(kExitCodeHelp),
               "s2c pipeline"};
  std::string plant_path, req_path, out_dir = ".", llm_mode = "off",
                                    lang = "python";
  int max_iter = 10;
  std::uint64_t seed = 42;
  app.add_option("--plant", plant_path, "Plant JSON file")->required();
  app.add_option("--req", req_path, "Requirement text file, or - for stdin")
      ->required();
  app.add_option("--max-iter", max_iter, "Iteration budget")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Monte Carlo seed");
  app.add_option("--llm", llm_mode, "Model backend")
      ->check(CLI::IsMember({"off", "on"}));
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--lang", lang, "Controller source language")
      ->check(CLI::IsMember({"python", "c"}));
  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;

  try {
    const PlantModel plant = load_plant(plant_path);
    const RequirementText req{read_requirement(req_path),
                              RequirementSource::user};
    const auto client = client_for(llm_mode, err);
    RunConfig cfg;
    cfg.max_iter = max_iter;
    cfg.seed = seed;
    cfg.client = client.get();
    const RunResult r = run(plant, req, cfg);

    GenerateOptions gopts;
    gopts.target = lang == "c" ? CodeTarget::c_header : CodeTarget::python;
    gopts.metric_specs = r.original_specs;
    PlantModel named = r.plant;
    if (named.name.empty()) named.name = fs::path(plant_path).stem().string();
    const GeneratedArtifact art = generate(r.final_record, named, gopts);
    const auto [src, man] = write_artifact(art, out_dir);
    nlohmann::json report = run_report(r);
    if (client) report["llm_calls"] = client->call_count();
    const fs::path report_path =
        fs::path(out_dir) / (safe_name(named.name) + "_run.json");
    write_text_atomic(report_path, report.dump(2) + "\n");

    out << (r.converged ? "converged" : "fallback design selected")
        << " after " << r.iterations_used << " iteration(s); gamma = "
        << r.certificate.gamma << "\n"
        << "wrote " << report_path.string() << "\n"
        << "wrote " << src.string() << "\n"
        << "wrote " << man.string() << "\n";
    return r.converged ? kExitOk : kExitFallback;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_bench(const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err) {
  CLI::App app{"Run baseline methods over a suite and aggregate metrics.\n" +
                   std::string(kExitCodeHelp),
               "s2c bench"};
  std::string suite_path, methods = "brl,brl_alpha,s2c_nofloor,s2c_full,lqr_h2",
                          out_dir = "bench_out", llm_mode = "off";
  BenchOptions opts;
  app.add_option("--suite", suite_path, "Suite JSON file")->required();
  app.add_option("--methods", methods, "Comma-separated methods");
  app.add_option("--seed", opts.seed, "Monte Carlo seed");
  app.add_option("--max-iter", opts.max_iter, "Iteration budget")
      ->check(CLI::PositiveNumber);
  app.add_option("--jobs", opts.jobs, "Worker threads")
      ->check(CLI::PositiveNumber);
  app.add_option("--llm", llm_mode, "Model backend")
      ->check(CLI::IsMember({"off", "on"}));
  app.add_option("--out", out_dir, "Output directory");
  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;

  try {
    opts.methods = parse_methods(methods);
    opts.llm = llm_mode == "on";
    const auto suite = load_suite(suite_path);
    const auto rows = run_bench(suite, opts);

    const fs::path dir(out_dir);
    fs::create_directories(dir / "runs");
    for (const auto& r : rows) {
      nlohmann::json j = {{"problem", r.problem},
                          {"method", to_string(r.method)},
                          {"iterations", r.result.iterations},
                          {"converged", r.result.converged},
                          {"error", r.result.error},
                          {"metrics", to_json(r.result.metrics)}};
      if (r.result.run) j["run"] = run_report(*r.result.run);
      write_text_atomic(dir / "runs" /
                            (safe_name(r.problem) + "__" +
                             to_string(r.method) + ".json"),
                        j.dump(2) + "\n");
    }
    write_text_atomic(dir / "aggregate.csv", aggregate_csv(rows));
    const nlohmann::json agg = aggregate_report(rows, opts.methods);
    write_text_atomic(dir / "aggregate.json", agg.dump(2) + "\n");

    struct Panel {
      const char* file;
      const char* key;
    };
    const Panel panels[] = {
        {"panel_a_success.csv", "success_rate"},
        {"panel_b_dist_rej.csv", "dist_rej_normalized_to_brl"},
        {"panel_c_gamma_over_target.csv", "gamma_over_target_median"},
        {"panel_d_decay_sat.csv", "decay_sat_median"},
        {"panel_e_converged_within_6.csv", "converged_within_6_rate"}};
    for (const auto& p : panels) {
      std::ostringstream csv;
      csv << "method," << p.key << "\n";
      for (Method m : opts.methods) {
        const auto& v = agg["per_method"][to_string(m)][p.key];
        csv << to_string(m) << ','
            << (v.is_number() ? num(v.get<double>())
                              : v.is_string() ? v.get<std::string>() : "")
            << "\n";
      }
      write_text_atomic(dir / p.file, csv.str());
    }
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.result.metrics.success ? 0 : 1;
    out << rows.size() << " runs (" << failed << " without a design); wrote "
        << (dir / "aggregate.csv").string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_d2c(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Convert a discrete plant to continuous time (Tustin).\n" +
                   std::string(kExitCodeHelp),
               "s2c d2c"};
  std::string plant_path, out_path;
  app.add_option("--plant", plant_path, "Discrete plant JSON file")->required();
  app.add_option("--out", out_path, "Output plant JSON file")->required();
  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;
  try {
    const PlantModel p = load_plant(plant_path);
    if (p.domain != TimeDomain::discrete) {
      err << "error: plant is already continuous\n" << app.help();
      return kExitError;
    }
    write_plant(tustin_d2c(p), out_path);
    out << "wrote " << out_path << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_gen_suite(const std::vector<std::string>& args, std::ostream& out,
                  std::ostream& err) {
  CLI::App app{"Generate a suite of random controllable plants.\n" +
                   std::string(kExitCodeHelp),
               "s2c gen-suite"};
  GenSuiteOptions o;
  std::string dims = "n:2..4,m:1..2", frac = "2/14", out_dir = "suite";
  app.add_option("--count", o.count, "Number of plants");
  app.add_option("--seed", o.seed, "Generator seed");
  app.add_option("--dims", dims, "Dimension ranges, e.g. n:2..4,m:1..2");
  app.add_option("--unstable-frac", frac, "Unstable fraction, a/b or decimal");
  app.add_option("--out", out_dir, "Output directory");
  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;
  try {
    parse_dims(dims, o);
    o.unstable_frac = parse_fraction(frac);
    const auto plants = generate_plants(o);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_text_atomic(dir / "requirement.txt", default_requirement());
    nlohmann::json problems = nlohmann::json::array();
    for (const auto& p : plants) {
      const std::string file = p.name + ".json";
      write_plant(p, dir / file);
      problems.push_back(
          {{"name", p.name}, {"plant", file}, {"req", "requirement.txt"}});
    }
    const nlohmann::json suite = {{"schema_version", 1},
                                  {"seed", o.seed},
                                  {"problems", problems}};
    write_text_atomic(dir / "suite.json", suite.dump(2) + "\n");
    out << "wrote " << plants.size() << " plants to " << dir.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  const std::string usage =
      "usage: s2c <pipeline|bench|d2c|gen-suite> [options]\n"
      "Run 's2c <command> --help' for command options.\n" +
      std::string(kExitCodeHelp) + "\n";
  if (args.empty()) {
    err << usage;
    return kExitError;
  }
  const std::string& cmd = args[0];
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  if (cmd == "pipeline") return cmd_pipeline(rest, out, err);
  if (cmd == "bench") return cmd_bench(rest, out, err);
  if (cmd == "d2c") return cmd_d2c(rest, out, err);
  if (cmd == "gen-suite") return cmd_gen_suite(rest, out, err);
  if (cmd == "--help" || cmd == "-h") {
    out << usage;
    return kExitOk;
  }
  err << "unknown command '" << cmd << "'\n" << usage;
  return kExitError;
}

}  // namespace s2c::cli
