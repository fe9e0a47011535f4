#include "s2c/specint.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <set>

#include "s2c/errors.hpp"

namespace s2c {

namespace {

enum class Kind { settling, overshoot, hinf, decay };

enum class Unit { none, seconds, millis, percent };

struct Token {
  enum Type { word, number, symbol } type;
  std::string text;
  double value = 0.0;
  Unit unit = Unit::none;
};

struct Extracted {
  std::optional<double> target;
  std::optional<double> slack;
  std::optional<Priority> priority;
};

// Multi-byte symbols are mapped to ASCII before tokenizing; any other
// non-ASCII byte becomes a separator.
std::string normalize(const std::string& in) {
  static const std::pair<const char*, const char*> kMap[] = {
      {"\xCE\xB1", " alpha "},  {"\xCE\xB3", " gamma "},
      {"\xE2\x88\x9E", "inf"},  {"\xE2\x89\xA5", " >= "},
      {"\xE2\x89\xA4", " <= "}, {"\xC2\xB1", " +/- "},
      {"\xE2\x88\x92", "-"},
  };
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    bool mapped = false;
    for (const auto& [from, to] : kMap) {
      const std::size_t len = std::char_traits<char>::length(from);
      if (in.compare(i, len, from) == 0) {
        out += to;
        i += len;
        mapped = true;
        break;
      }
    }
    if (mapped) continue;
    const auto c = static_cast<unsigned char>(in[i]);
    out += c < 0x80 ? static_cast<char>(std::tolower(c)) : ' ';
    ++i;
  }
  return out;
}

// Sentence-level split on ; : ! ? newlines and on '.' unless it sits between
// two digits.
std::vector<std::string> split_clauses(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  auto is_digit = [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    bool cut = c == ';' || c == ':' || c == '!' || c == '?' || c == '\n';
    if (c == '.') {
      const bool decimal = i > 0 && i + 1 < s.size() && is_digit(s[i - 1]) &&
                           is_digit(s[i + 1]);
      const bool leading = i + 1 < s.size() && is_digit(s[i + 1]) &&
                           (i == 0 || !std::isalnum(static_cast<unsigned char>(
                                          s[i - 1])));
      cut = !decimal && !leading;
    }
    if (cut) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<Unit> unit_word(const std::string& w) {
  static const std::set<std::string> kSeconds = {"s", "sec", "secs", "second",
                                                 "seconds"};
  static const std::set<std::string> kMillis = {
      "ms", "msec", "msecs", "millisecond", "milliseconds"};
  if (kSeconds.count(w)) return Unit::seconds;
  if (kMillis.count(w)) return Unit::millis;
  return std::nullopt;
}

std::vector<Token> tokenize(const std::string& clause) {
  std::vector<Token> out;
  const std::size_t n = clause.size();
  auto alpha = [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
  };
  auto digit = [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
  };
  std::size_t i = 0;
  while (i < n) {
    const char c = clause[i];
    if (alpha(c) || c == '_') {
      std::size_t j = i;
      while (j < n && (alpha(clause[j]) || digit(clause[j]) ||
                       clause[j] == '_' || clause[j] == '-')) {
        ++j;
      }
      std::string w = clause.substr(i, j - i);
      while (!w.empty() && w.back() == '-') w.pop_back();
      // Words carrying digits ("nn1") are identifiers, not quantities.
      out.push_back({Token::word, w});
      i = j;
    } else if (digit(c) || (c == '.' && i + 1 < n && digit(clause[i + 1]))) {
      std::size_t j = i;
      while (j < n && digit(clause[j])) ++j;
      if (j < n && clause[j] == '.' && j + 1 < n && digit(clause[j + 1])) {
        ++j;
        while (j < n && digit(clause[j])) ++j;
      }
      Token t{Token::number, clause.substr(i, j - i)};
      t.value = std::strtod(t.text.c_str(), nullptr);
      // Attached unit letters ("2s", "150ms").
      std::size_t k = j;
      while (k < n && alpha(clause[k])) ++k;
      if (k > j) {
        const auto u = unit_word(clause.substr(j, k - j));
        if (!u) {
          i = k;  // "3rd", "2x": not a quantity
          continue;
        }
        t.unit = *u;
        j = k;
      }
      out.push_back(t);
      i = j;
    } else if (c == '%') {
      if (!out.empty() && out.back().type == Token::number &&
          out.back().unit == Unit::none) {
        out.back().unit = Unit::percent;
      }
      ++i;
    } else if (c == '<' || c == '>' || c == '=' || c == '+' || c == '/') {
      std::size_t j = i;
      while (j < n && (clause[j] == '<' || clause[j] == '>' ||
                       clause[j] == '=' || clause[j] == '+' ||
                       clause[j] == '/' || clause[j] == '-')) {
        ++j;
      }
      out.push_back({Token::symbol, clause.substr(i, j - i)});
      i = j;
    } else {
      ++i;
    }
  }
  // Detached unit words ("16 seconds") fold into the preceding number.
  std::vector<Token> folded;
  for (const auto& t : out) {
    if (t.type == Token::word && !folded.empty() &&
        folded.back().type == Token::number &&
        folded.back().unit == Unit::none) {
      if (const auto u = unit_word(t.text)) {
        folded.back().unit = *u;
        continue;
      }
      if (t.text == "percent") {
        folded.back().unit = Unit::percent;
        continue;
      }
    }
    folded.push_back(t);
  }
  return folded;
}

std::optional<Kind> keyword(const std::string& w) {
  static const std::set<std::string> kSettling = {"settling", "settle",
                                                  "settles"};
  static const std::set<std::string> kOvershoot = {"overshoot", "overshoots"};
  static const std::set<std::string> kHinf = {
      "h-infinity", "hinf",   "h-inf", "h_inf",    "h_infinity",
      "hinfinity",  "infinity", "norm", "gamma",   "disturbance"};
  static const std::set<std::string> kDecay = {"decay", "alpha"};
  if (kSettling.count(w)) return Kind::settling;
  if (kOvershoot.count(w)) return Kind::overshoot;
  if (kHinf.count(w)) return Kind::hinf;
  if (kDecay.count(w)) return Kind::decay;
  return std::nullopt;
}

bool unit_fits(Unit u, Kind k) {
  switch (u) {
    case Unit::seconds:
    case Unit::millis:
      return k == Kind::settling;
    case Unit::percent:
      return k == Kind::overshoot;
    case Unit::none:
      return true;
  }
  return true;
}

bool is_word(const std::vector<Token>& t, std::size_t i, const char* w) {
  return i < t.size() && t[i].type == Token::word && t[i].text == w;
}

bool is_slack(const std::vector<Token>& t, std::size_t i) {
  if (is_word(t, i + 1, "tolerance") || is_word(t, i + 1, "slack")) {
    return true;
  }
  for (std::size_t back = 1; back <= 2 && back <= i; ++back) {
    const Token& p = t[i - back];
    if ((p.type == Token::word &&
         (p.text == "tolerance" || p.text == "slack")) ||
        (p.type == Token::symbol && p.text == "+/-")) {
      return true;
    }
  }
  return false;
}

bool upper_bound_before(const std::vector<Token>& t, std::size_t i) {
  for (std::size_t k = 0; k < i; ++k) {
    if (t[k].type == Token::symbol &&
        (t[k].text == "<" || t[k].text == "<=")) {
      return true;
    }
    if (t[k].type != Token::word) continue;
    const std::string& w = t[k].text;
    if (w == "below" || w == "under" || w == "within" || w == "maximum" ||
        w == "max" || w == "exceed" || w == "exceeding") {
      return true;
    }
    if (w == "less" && is_word(t, k + 1, "than")) return true;
    if (w == "at" && is_word(t, k + 1, "most")) return true;
    if (w == "no" && is_word(t, k + 1, "more")) return true;
    if (w == "up" && is_word(t, k + 1, "to")) return true;
  }
  return false;
}

std::optional<Priority> explicit_priority(const std::vector<Token>& t) {
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k].type != Token::word) continue;
    const std::string& w = t[k].text;
    if (w == "critical") return Priority::critical;
    if (w == "high-priority") return Priority::high;
    if (w == "medium-priority") return Priority::medium;
    if (w == "low-priority") return Priority::low;
    if (is_word(t, k + 1, "priority")) {
      if (w == "high") return Priority::high;
      if (w == "medium") return Priority::medium;
      if (w == "low") return Priority::low;
    }
  }
  return std::nullopt;
}

// Converts a bound number to the entry's canonical unit; nullopt when it is
// outside the admissible range.
std::optional<double> canonical(Kind k, const Token& t, bool slack) {
  double v = t.value;
  if (!std::isfinite(v)) return std::nullopt;
  switch (k) {
    case Kind::settling:
      if (t.unit == Unit::millis) v /= 1000.0;
      if (slack ? v < 0.0 : v <= 0.0) return std::nullopt;
      return v;
    case Kind::overshoot:
      if (t.unit == Unit::percent || v > 1.0) v /= 100.0;
      if (v < 0.0 || (!slack && v >= 1.0)) return std::nullopt;
      return v;
    case Kind::hinf:
      if (slack ? v < 0.0 : v <= 0.0) return std::nullopt;
      return v;
    case Kind::decay:
      if (v < 0.0) return std::nullopt;
      return v;
  }
  return std::nullopt;
}

bool contains_phrase(const std::vector<Token>& t, const char* a,
                     const char* b) {
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    if (is_word(t, k, a) && is_word(t, k + 1, b)) return true;
  }
  return false;
}

nlohmann::json entry(double target, double slack, Priority p) {
  return {{"target", target},
          {"slack", slack},
          {"priority", std::string(to_string(p))}};
}

double default_slack(Kind k, double target) {
  switch (k) {
    case Kind::hinf:
      return 0.1 * target;
    case Kind::settling:
      return 0.2 * target;
    case Kind::overshoot:
      return SpecDefaults::kOvershootSlack;
    case Kind::decay:
      return 0.0;
  }
  return 0.0;
}

nlohmann::json defaults_document() {
  nlohmann::json j;
  j["h_infinity_norm"] = entry(SpecDefaults::kHinfTarget,
                               SpecDefaults::kHinfSlack, Priority::medium);
  j["settling_time"] =
      entry(SpecDefaults::kSettlingTarget, SpecDefaults::kSettlingSlack,
            Priority::medium);
  j["overshoot"] = entry(SpecDefaults::kOvershootTarget,
                         SpecDefaults::kOvershootSlack, Priority::low);
  return j;
}

SpecParse parse_rules_impl(const std::string& text) {
  Extracted ex[4];
  bool fast = false;
  bool smooth = false;
  bool strong_reject = false;

  for (const auto& clause : split_clauses(normalize(text))) {
    const std::vector<Token> toks = tokenize(clause);
    std::vector<std::pair<std::size_t, Kind>> kws;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (toks[i].type != Token::word) continue;
      const std::string& w = toks[i].text;
      if (const auto k = keyword(w)) kws.emplace_back(i, *k);
      if (w == "fast" || w == "quick" || w == "quickly" || w == "rapid") {
        fast = true;
      }
      if (w == "smooth" || w == "smoothly") smooth = true;
    }
    if (contains_phrase(toks, "strongly", "reject") ||
        contains_phrase(toks, "strongly", "rejects") ||
        contains_phrase(toks, "strong", "disturbance") ||
        contains_phrase(toks, "strong", "rejection")) {
      strong_reject = true;
    }
    const auto clause_priority = explicit_priority(toks);

    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (toks[i].type != Token::number) continue;
      // Nearest compatible keyword; ties go to the one before the number.
      std::optional<Kind> best;
      std::size_t best_dist = 0;
      for (const auto& [pos, kind] : kws) {
        if (!unit_fits(toks[i].unit, kind)) continue;
        const std::size_t d = pos < i ? i - pos : pos - i;
        if (!best || d < best_dist) {
          best = kind;
          best_dist = d;
        }
      }
      if (!best) continue;
      Extracted& e = ex[static_cast<int>(*best)];
      const bool slack = is_slack(toks, i);
      const auto v = canonical(*best, toks[i], slack);
      if (!v) continue;
      if (slack) {
        if (!e.slack) e.slack = v;
        continue;
      }
      if (e.target) continue;
      e.target = v;
      if (clause_priority) {
        e.priority = clause_priority;
      } else {
        e.priority =
            upper_bound_before(toks, i) ? Priority::high : Priority::medium;
      }
    }
  }

  const double qualitative[3] = {2.5, 0.075, 1.75};
  if (!ex[static_cast<int>(Kind::settling)].target && fast) {
    ex[static_cast<int>(Kind::settling)].target = qualitative[0];
  }
  if (!ex[static_cast<int>(Kind::overshoot)].target && smooth) {
    ex[static_cast<int>(Kind::overshoot)].target = qualitative[1];
  }
  if (!ex[static_cast<int>(Kind::hinf)].target && strong_reject) {
    ex[static_cast<int>(Kind::hinf)].target = qualitative[2];
  }

  SpecParse out;
  out.spec = defaults_document();
  bool recognised = false;
  const std::pair<Kind, const char*> keys[] = {
      {Kind::hinf, "h_infinity_norm"},
      {Kind::settling, "settling_time"},
      {Kind::overshoot, "overshoot"}};
  for (const auto& [kind, key] : keys) {
    const Extracted& e = ex[static_cast<int>(kind)];
    if (!e.target) continue;
    recognised = true;
    out.spec[key] = entry(*e.target,
                          e.slack ? *e.slack : default_slack(kind, *e.target),
                          e.priority.value_or(Priority::medium));
  }
  if (const auto& d = ex[static_cast<int>(Kind::decay)]; d.target) {
    recognised = true;
    out.spec["decay_rate"] = {{"target", *d.target}, {"priority", "medium"}};
  }
  out.warning = !recognised;
  return out;
}

double finite_number(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) throw ParseError(std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " not finite");
  return v;
}

}  // namespace

SpecParse parse_rules(const RequirementText& req) {
  try {
    SpecParse out = parse_rules_impl(req.text);
    out.spec = validate_spec_json(out.spec);
    return out;
  } catch (const std::exception&) {
    SpecParse out;
    out.spec = defaults_document();
    out.warning = true;
    return out;
  }
}

SpecParse parse_llm(const RequirementText& req, llm::LlmClient& client) {
  try {
    const std::string reply = client.complete(llm::specint_prompt(), req.text);
    SpecParse out;
    out.spec = validate_spec_json(llm::extract_json(reply));
    return out;
  } catch (const std::exception&) {
    SpecParse out = parse_rules(req);
    out.fallback = true;
    return out;
  }
}

nlohmann::json validate_spec_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("spec document must be an object");
  if (!j.contains("h_infinity_norm")) {
    throw ParseError("spec document lacks h_infinity_norm");
  }
  auto read_entry = [](const nlohmann::json& e, const char* name, Kind kind,
                       Priority default_priority) {
    if (!e.is_object()) throw ParseError(std::string(name) + " not an object");
    if (!e.contains("target")) throw ParseError(std::string(name) + ".target");
    const double target = finite_number(e.at("target"), name);
    double slack = default_slack(kind, std::max(target, 0.0));
    if (e.contains("slack") && !e.at("slack").is_null()) {
      slack = finite_number(e.at("slack"), name);
    }
    Priority p = default_priority;
    if (e.contains("priority") && !e.at("priority").is_null()) {
      if (!e.at("priority").is_string()) {
        throw ParseError(std::string(name) + ".priority must be a string");
      }
      p = priority_from_string(e.at("priority").get<std::string>());
    }
    if (slack < 0.0) throw DomainError(std::string(name) + ".slack < 0");
    return std::make_tuple(target, slack, p);
  };

  nlohmann::json out;
  {
    const auto [t, s, p] = read_entry(j.at("h_infinity_norm"),
                                      "h_infinity_norm", Kind::hinf,
                                      Priority::medium);
    if (t <= 0.0) throw DomainError("h_infinity_norm.target must be > 0");
    out["h_infinity_norm"] = entry(t, s, p);
  }
  if (j.contains("settling_time") && !j.at("settling_time").is_null()) {
    const auto [t, s, p] = read_entry(j.at("settling_time"), "settling_time",
                                      Kind::settling, Priority::medium);
    if (t <= 0.0) throw DomainError("settling_time.target must be > 0");
    out["settling_time"] = entry(t, s, p);
  } else {
    out["settling_time"] = defaults_document()["settling_time"];
  }
  if (j.contains("overshoot") && !j.at("overshoot").is_null()) {
    const auto [t, s, p] = read_entry(j.at("overshoot"), "overshoot",
                                      Kind::overshoot, Priority::medium);
    if (t < 0.0 || t >= 1.0) {
      throw DomainError("overshoot.target must lie in [0, 1)");
    }
    out["overshoot"] = entry(t, s, p);
  } else {
    out["overshoot"] = defaults_document()["overshoot"];
  }
  if (j.contains("decay_rate") && !j.at("decay_rate").is_null()) {
    const auto& d = j.at("decay_rate");
    if (!d.is_object() || !d.contains("target")) {
      throw ParseError("decay_rate must be an object with a target");
    }
    const double t = finite_number(d.at("target"), "decay_rate");
    if (t < 0.0) throw DomainError("decay_rate.target must be >= 0");
    out["decay_rate"] = {{"target", t}, {"priority", "medium"}};
  }
  return out;
}

SpecSet to_specset(const nlohmann::json& j, const PlantModel& plant) {
  plant.validate();
  const nlohmann::json doc = validate_spec_json(j);
  auto read = [&](const char* key) {
    const auto& e = doc.at(key);
    return SpecEntry{e.at("target").get<double>(), e.at("slack").get<double>(),
                     priority_from_string(e.at("priority").get<std::string>())};
  };
  SpecSet s;
  s.hinf = read("h_infinity_norm");
  s.hinf_min = 0.0;
  s.settling_time = read("settling_time");
  s.overshoot = read("overshoot");
  if (doc.contains("decay_rate")) {
    s.decay_rate = doc.at("decay_rate").at("target").get<double>();
  }
  s.validate();
  return s;
}

}  // namespace s2c
